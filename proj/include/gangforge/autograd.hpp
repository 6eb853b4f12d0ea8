#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every Var is a node of a dynamically built tape; calling
// backward() on a scalar Var accumulates gradients into every ancestor that
// requires them.

#include "gangforge/graph.hpp"

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gangforge::ag {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix&)> backward;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  /// Gradient after backward(); a zero matrix of the value's shape if nothing
  /// flowed into this node.
  Matrix grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  /// Direct access for optimizers and checkpoint loading.
  Matrix& mutable_value() { return node_->value; }
  void zero_grad() const { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);

/// Builds the result of a custom op. `backward` receives the gradient of the
/// result and must accumulate into the parents it captured. When no parent
/// requires a gradient (or NoGradGuard is active) the closure is dropped.
Var make_op(Matrix value, std::vector<Var> parents, std::function<void(const Matrix&)> backward);

/// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
void backward(const Var& root);

/// Disables tape recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Elementwise / linear algebra -----------------------------------------------

Var matmul(const Var& a, const Var& b);
/// a · bᵀ
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
/// Multiplies row i of a by column(i, 0).
Var scale_rows(const Var& a, const Var& column);
/// Elementwise a ⊙ row + offset for a constant row pair (affine rescale).
Var affine_cols(const Var& a, const RowVector& factor, const RowVector& offset);

Var relu(const Var& a);
Var sigmoid(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const Eigen::Index> rows);
/// Broadcasts a 1 x c row to n rows.
Var repeat_row(const Var& row, Eigen::Index n);

Var mean_rows(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

/// Row-wise softmax. Entries where `allowed` is false get probability 0; a
/// row with no allowed entry is all zero.
Var softmax_rows(const Var& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>* allowed = nullptr);

/// Row-wise layer normalisation with learnable gain and bias rows.
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);

/// Inverted dropout. Identity when p == 0.
Var dropout(const Var& a, double p, std::mt19937_64& rng);

/// Forward value `hard`, gradient passed unchanged to `soft`.
Var straight_through(Matrix hard, const Var& soft);

/// Cosine similarity of every row of a against every row of b.
Var cosine_rows(const Var& a, const Var& b, double eps = 1e-12);

/// Class-weighted mean cross entropy of logits (n x C) against labels.
/// Normalised by the sum of the applied weights.
Var weighted_cross_entropy(const Var& logits, std::span<const int> labels, std::span<const double> class_weights);

// Parameters and optimisation -------------------------------------------------

struct NamedParameter {
  std::string name;
  Var var;
};

using ParameterList = std::vector<NamedParameter>;

/// Glorot-uniform matrix.
Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

/// Adam with coupled (L2) weight decay.
class Adam {
 public:
  Adam(ParameterList params, double learning_rate, double weight_decay = 0.0, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

 private:
  ParameterList params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  double lr_;
  double weight_decay_;
  double beta1_;
  double beta2_;
  double eps_;
  long long t_ = 0;
};

/// Deep copies of parameter values, for best-checkpoint bookkeeping.
std::vector<Matrix> snapshot(const ParameterList& params);
void restore(const ParameterList& params, const std::vector<Matrix>& values);

}  // namespace gangforge::ag
