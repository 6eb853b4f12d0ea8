#include "gangforge/gumbel.hpp"

#include "gangforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gangforge {

std::vector<Eigen::Index> arg_top_k(std::span<const double> scores, std::size_t k, const std::vector<bool>* allowed) {
  if (allowed && allowed->size() != scores.size()) throw InputError("arg_top_k: mask length mismatch");
  std::vector<Eigen::Index> idx;
  idx.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!allowed || (*allowed)[i]) idx.push_back(static_cast<Eigen::Index>(i));
  }
  k = std::min(k, idx.size());
  auto greater = [&](Eigen::Index a, Eigen::Index b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), greater);
  idx.resize(k);
  return idx;
}

namespace {

double gumbel_noise(std::mt19937_64& rng) {
  // U in (0, 1): avoid log(0) at either end.
  std::uniform_real_distribution<double> unit(std::numeric_limits<double>::min(), 1.0);
  return -std::log(-std::log(unit(rng)));
}

// Softmax over each group of allowed entries; groups are rows or the whole matrix.
Matrix grouped_softmax(const Matrix& z, const Mask* mask, bool global) {
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  const Eigen::Index groups = global ? 1 : z.rows();
  const Eigen::Index width = global ? z.size() : z.cols();
  for (Eigen::Index g = 0; g < groups; ++g) {
    const double* in = z.data() + g * width;
    double* o = out.data() + g * width;
    const bool* allow = mask ? mask->data() + g * width : nullptr;
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < width; ++i) {
      if (!allow || allow[i]) peak = std::max(peak, in[i]);
    }
    if (!std::isfinite(peak)) continue;
    double total = 0.0;
    for (Eigen::Index i = 0; i < width; ++i) {
      if (!allow || allow[i]) total += (o[i] = std::exp(in[i] - peak));
    }
    for (Eigen::Index i = 0; i < width; ++i) o[i] /= total;
  }
  return out;
}

ag::Var softmax_op(const ag::Var& logits, Matrix noise, double tau, const Mask* mask, bool global) {
  Matrix z = (logits.value() + noise) / tau;
  auto soft = std::make_shared<Matrix>(grouped_softmax(z, mask, global));
  auto node = logits.node();
  Matrix value = *soft;
  return ag::make_op(std::move(value), {logits}, [node, soft, tau, global](const Matrix& g) {
    const Eigen::Index groups = global ? 1 : soft->rows();
    const Eigen::Index width = global ? soft->size() : soft->cols();
    Matrix dz(soft->rows(), soft->cols());
    for (Eigen::Index r = 0; r < groups; ++r) {
      const double* s = soft->data() + r * width;
      const double* gr = g.data() + r * width;
      double inner = 0.0;
      for (Eigen::Index i = 0; i < width; ++i) inner += s[i] * gr[i];
      double* d = dz.data() + r * width;
      for (Eigen::Index i = 0; i < width; ++i) d[i] = s[i] * (gr[i] - inner) / tau;
    }
    node->accumulate(dz);
  });
}

}  // namespace

ag::Var gumbel_top_k(const ag::Var& logits, std::size_t k, const GumbelOptions& options, std::mt19937_64& rng,
                     const Mask* mask) {
  if (!(options.tau > 0.0)) throw InputError("gumbel_top_k: tau must be positive");
  if (options.epsilon < 0.0) throw InputError("gumbel_top_k: epsilon must be non-negative");
  const Matrix& raw = logits.value();
  if (mask && (mask->rows() != raw.rows() || mask->cols() != raw.cols())) throw InputError("gumbel_top_k: mask shape mismatch");

  Matrix noise = Matrix::Zero(raw.rows(), raw.cols());
  if (options.epsilon > 0.0) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = options.epsilon * gumbel_noise(rng);
  }
  const bool global = options.scope == SelectionScope::global;

  Matrix hard = Matrix::Zero(raw.rows(), raw.cols());
  if (options.relaxation != Relaxation::soft) {
    const Matrix noised = raw + noise;
    const Eigen::Index groups = global ? 1 : raw.rows();
    const Eigen::Index width = global ? raw.size() : raw.cols();
    std::vector<bool> allowed(static_cast<std::size_t>(width), true);
    for (Eigen::Index g = 0; g < groups; ++g) {
      if (mask) {
        for (Eigen::Index i = 0; i < width; ++i) allowed[static_cast<std::size_t>(i)] = mask->data()[g * width + i];
      }
      std::span<const double> row(noised.data() + g * width, static_cast<std::size_t>(width));
      for (Eigen::Index i : arg_top_k(row, k, &allowed)) hard.data()[g * width + i] = 1.0;
    }
  }

  switch (options.relaxation) {
    case Relaxation::hard:
      return ag::constant(std::move(hard));
    case Relaxation::soft:
      return softmax_op(logits, std::move(noise), options.tau, mask, global);
    case Relaxation::straight_through:
      break;
  }
  return ag::straight_through(std::move(hard), softmax_op(logits, std::move(noise), options.tau, mask, global));
}

ag::Var gumbel_softmax(const ag::Var& logits, double tau, double epsilon, std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw InputError("gumbel_softmax: tau must be positive");
  Matrix noise = Matrix::Zero(logits.rows(), logits.cols());
  if (epsilon > 0.0) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = epsilon * gumbel_noise(rng);
  }
  return softmax_op(logits, std::move(noise), tau, nullptr, false);
}

}  // namespace gangforge
