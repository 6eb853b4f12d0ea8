#pragma once

#include "gangforge/autograd.hpp"

#include <random>
#include <span>
#include <vector>

namespace gangforge {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Indices of the k largest allowed scores, largest first; equal scores keep
/// index order. Returns every allowed index when fewer than k exist.
std::vector<Eigen::Index> arg_top_k(std::span<const double> scores, std::size_t k,
                                    const std::vector<bool>* allowed = nullptr);

enum class Relaxation {
  straight_through,  // hard k-hot forward, softmax gradient backward
  soft,              // softmax values forward and backward
  hard,              // k-hot, no gradient
};

enum class SelectionScope { per_row, global };

struct GumbelOptions {
  double tau = 1.0;
  double epsilon = 0.0;  // noise scale; 0 gives deterministic selection
  Relaxation relaxation = Relaxation::straight_through;
  SelectionScope scope = SelectionScope::per_row;
};

/// Gumbel-Top-k over `logits` (per row or over the whole matrix). The noised
/// logits are (logits + ε·g) / τ with g ~ Gumbel(0, 1); masked entries
/// (mask false) get probability 0 and are never selected.
ag::Var gumbel_top_k(const ag::Var& logits, std::size_t k, const GumbelOptions& options, std::mt19937_64& rng,
                     const Mask* mask = nullptr);

/// Softmax of (logits + ε·g) / τ for every row (no selection).
ag::Var gumbel_softmax(const ag::Var& logits, double tau, double epsilon, std::mt19937_64& rng);

}  // namespace gangforge
