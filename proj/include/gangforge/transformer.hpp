#pragma once

#include "gangforge/autograd.hpp"
#include "gangforge/gumbel.hpp"

#include <random>
#include <string>
#include <vector>

namespace gangforge {

struct TransformerConfig {
  int layers = 6;
  int heads = 4;
  int model_dim = 64;
  int ffn_dim = 512;
  double dropout = 0.1;
};

/// Attention probabilities of one forward pass: maps[layer][head] is M x M.
using AttentionMaps = std::vector<std::vector<Matrix>>;

/// Post-norm encoder stack:
///   x = LN(x + Drop(MHA(x))),  x = LN(x + Drop(W2 Drop(ReLU(W1 x)))).
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(const TransformerConfig& config, std::mt19937_64& rng);

  const TransformerConfig& config() const noexcept { return config_; }

  /// `allowed(i, j)` false blocks query i from attending to key j. Dropout is
  /// active only when `dropout_rng` is given. When `maps` is non-null the
  /// attention probabilities of every layer and head are stored there.
  ag::Var forward(const ag::Var& x, const Mask* allowed = nullptr, std::mt19937_64* dropout_rng = nullptr,
                  AttentionMaps* maps = nullptr) const;

  ag::ParameterList parameters(const std::string& prefix = "transformer.") const;

 private:
  struct Layer {
    ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Var ln1_gain, ln1_bias;
    ag::Var w1, b1, w2, b2;
    ag::Var ln2_gain, ln2_bias;
  };

  TransformerConfig config_;
  std::vector<Layer> layers_;
};

}  // namespace gangforge
