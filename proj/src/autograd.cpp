#include "gangforge/autograd.hpp"

#include "gangforge/errors.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace gangforge::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

Var constant(Matrix value) { return Var(std::move(value), false); }
Var parameter(Matrix value) { return Var(std::move(value), true); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_op(Matrix value, std::vector<Var> parents, std::function<void(const Matrix&)> backward_fn) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  const auto& node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.requires_grad()) node->parents.push_back(p.node());
  }
  node->backward = std::move(backward_fn);
  return out;
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw InputError("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(node->grad);
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw InputError("matmul: inner dimensions differ");
  auto na = a.node();
  auto nb = b.node();
  return make_op(a.value() * b.value(), {a, b}, [na, nb](const Matrix& g) {
    if (na->requires_grad) na->accumulate(g * nb->value.transpose());
    if (nb->requires_grad) nb->accumulate(na->value.transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw InputError("matmul_nt: inner dimensions differ");
  auto na = a.node();
  auto nb = b.node();
  return make_op(a.value() * b.value().transpose(), {a, b}, [na, nb](const Matrix& g) {
    if (na->requires_grad) na->accumulate(g * nb->value);
    if (nb->requires_grad) nb->accumulate(g.transpose() * na->value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  auto na = a.node();
  auto nb = b.node();
  return make_op(a.value() + b.value(), {a, b}, [na, nb](const Matrix& g) {
    na->accumulate(g);
    nb->accumulate(g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  auto na = a.node();
  auto nb = b.node();
  return make_op(a.value() - b.value(), {a, b}, [na, nb](const Matrix& g) {
    na->accumulate(g);
    nb->accumulate(-g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  auto na = a.node();
  auto nb = b.node();
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [na, nb](const Matrix& g) {
    if (na->requires_grad) na->accumulate(g.cwiseProduct(nb->value));
    if (nb->requires_grad) nb->accumulate(g.cwiseProduct(na->value));
  });
}

Var scale(const Var& a, double s) {
  auto na = a.node();
  return make_op(a.value() * s, {a}, [na, s](const Matrix& g) { na->accumulate(g * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw InputError("add_row: bias shape mismatch");
  auto na = a.node();
  auto nr = row.node();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row}, [na, nr](const Matrix& g) {
    na->accumulate(g);
    if (nr->requires_grad) nr->accumulate(g.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Var& column) {
  if (column.cols() != 1 || column.rows() != a.rows()) throw InputError("scale_rows: column shape mismatch");
  auto na = a.node();
  auto nc = column.node();
  Matrix out = a.value().array().colwise() * column.value().col(0).array();
  return make_op(std::move(out), {a, column}, [na, nc](const Matrix& g) {
    if (na->requires_grad) {
      Matrix ga = g.array().colwise() * nc->value.col(0).array();
      na->accumulate(ga);
    }
    if (nc->requires_grad) nc->accumulate(g.cwiseProduct(na->value).rowwise().sum());
  });
}

Var affine_cols(const Var& a, const RowVector& factor, const RowVector& offset) {
  if (factor.size() != a.cols() || offset.size() != a.cols()) throw InputError("affine_cols: width mismatch");
  auto na = a.node();
  Matrix out = (a.value().array().rowwise() * factor.array()).rowwise() + offset.array();
  return make_op(std::move(out), {a}, [na, factor](const Matrix& g) {
    Matrix ga = g.array().rowwise() * factor.array();
    na->accumulate(ga);
  });
}

Var relu(const Var& a) {
  auto na = a.node();
  return make_op(a.value().cwiseMax(0.0), {a}, [na](const Matrix& g) {
    na->accumulate((na->value.array() > 0.0).select(g, 0.0));
  });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  auto na = a.node();
  auto y = std::make_shared<Matrix>(out);
  return make_op(std::move(out), {a}, [na, y](const Matrix& g) {
    na->accumulate((g.array() * y->array() * (1.0 - y->array())).matrix());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InputError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw InputError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(at);
    at += p.cols();
  }
  return make_op(std::move(out), {parts.begin(), parts.end()}, [nodes, offsets](const Matrix& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad) nodes[i]->accumulate(g.middleCols(offsets[i], nodes[i]->value.cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InputError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols && p.rows() > 0) throw InputError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    if (p.rows() > 0) out.middleRows(at, p.rows()) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(at);
    at += p.rows();
  }
  return make_op(std::move(out), {parts.begin(), parts.end()}, [nodes, offsets](const Matrix& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad && nodes[i]->value.rows() > 0) {
        nodes[i]->accumulate(g.middleRows(offsets[i], nodes[i]->value.rows()));
      }
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw InputError("slice_rows: out of range");
  auto na = a.node();
  return make_op(a.value().middleRows(start, count), {a}, [na, start, count](const Matrix& g) {
    if (na->grad.size() == 0) na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
    na->grad.middleRows(start, count) += g;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw InputError("slice_cols: out of range");
  auto na = a.node();
  return make_op(a.value().middleCols(start, count), {a}, [na, start, count](const Matrix& g) {
    if (na->grad.size() == 0) na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
    na->grad.middleCols(start, count) += g;
  });
}

Var gather_rows(const Var& a, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw InputError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  auto na = a.node();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {a}, [na, idx](const Matrix& g) {
    if (na->grad.size() == 0) na->grad = Matrix::Zero(na->value.rows(), na->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) na->grad.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var repeat_row(const Var& row, Eigen::Index n) {
  if (row.rows() != 1) throw InputError("repeat_row: expected a single row");
  auto nr = row.node();
  Matrix out = row.value().replicate(n, 1);
  return make_op(std::move(out), {row}, [nr](const Matrix& g) { nr->accumulate(g.colwise().sum()); });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0) throw InputError("mean_rows: empty input");
  auto na = a.node();
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().mean();
  return make_op(std::move(out), {a}, [na, n](const Matrix& g) {
    na->accumulate(g.replicate(na->value.rows(), 1) / n);
  });
}

Var sum(const Var& a) {
  auto na = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [na](const Matrix& g) {
    na->accumulate(Matrix::Constant(na->value.rows(), na->value.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw InputError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var softmax_rows(const Var& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>* allowed) {
  if (allowed != nullptr && (allowed->rows() != a.rows() || allowed->cols() != a.cols())) {
    throw InputError("softmax_rows: mask shape mismatch");
  }
  const Matrix& x = a.value();
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (allowed == nullptr || (*allowed)(i, j)) top = std::max(top, x(i, j));
    }
    if (!std::isfinite(top)) continue;
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (allowed == nullptr || (*allowed)(i, j)) {
        p(i, j) = std::exp(x(i, j) - top);
        total += p(i, j);
      }
    }
    p.row(i) /= total;
  }
  auto na = a.node();
  auto probs = std::make_shared<Matrix>(p);
  return make_op(std::move(p), {a}, [na, probs](const Matrix& g) {
    const Matrix& pr = *probs;
    Eigen::VectorXd dots = g.cwiseProduct(pr).rowwise().sum();
    Matrix ga = pr.array() * (g.colwise() - dots).array();
    na->accumulate(ga);
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index d = a.cols();
  if (gain.cols() != d || bias.cols() != d) throw InputError("layer_norm: parameter width mismatch");
  const Matrix& x = a.value();
  auto xhat = std::make_shared<Matrix>(x.rows(), d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    (*inv_std)(i) = 1.0 / std::sqrt(var + eps);
    xhat->row(i) = (x.row(i).array() - mu) * (*inv_std)(i);
  }
  Matrix out = (xhat->array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  auto na = a.node();
  auto ng = gain.node();
  auto nb = bias.node();
  return make_op(std::move(out), {a, gain, bias}, [na, ng, nb, xhat, inv_std](const Matrix& g) {
    if (ng->requires_grad) ng->accumulate(g.cwiseProduct(*xhat).colwise().sum());
    if (nb->requires_grad) nb->accumulate(g.colwise().sum());
    if (na->requires_grad) {
      Matrix dxhat = g.array().rowwise() * ng->value.row(0).array();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
        const double m1 = dxhat.row(i).mean();
        const double m2 = dxhat.row(i).cwiseProduct(xhat->row(i)).mean();
        dx.row(i) = ((dxhat.row(i).array() - m1) - xhat->row(i).array() * m2) * (*inv_std)(i);
      }
      na->accumulate(dx);
    }
  });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw InputError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = std::make_shared<Matrix>(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask->size(); ++i) mask->data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  auto na = a.node();
  return make_op(a.value().cwiseProduct(*mask), {a}, [na, mask](const Matrix& g) {
    na->accumulate(g.cwiseProduct(*mask));
  });
}

Var straight_through(Matrix hard, const Var& soft) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols()) throw InputError("straight_through: shape mismatch");
  auto ns = soft.node();
  return make_op(std::move(hard), {soft}, [ns](const Matrix& g) { ns->accumulate(g); });
}

Var cosine_rows(const Var& a, const Var& b, double eps) {
  if (a.cols() != b.cols()) throw InputError("cosine_rows: width mismatch");
  Eigen::VectorXd na_norm = a.value().rowwise().norm().cwiseMax(eps);
  Eigen::VectorXd nb_norm = b.value().rowwise().norm().cwiseMax(eps);
  auto an = std::make_shared<Matrix>(a.value().array().colwise() / na_norm.array());
  auto bn = std::make_shared<Matrix>(b.value().array().colwise() / nb_norm.array());
  Matrix out = (*an) * bn->transpose();
  auto node_a = a.node();
  auto node_b = b.node();
  auto norm_a = std::make_shared<Eigen::VectorXd>(std::move(na_norm));
  auto norm_b = std::make_shared<Eigen::VectorXd>(std::move(nb_norm));
  // d(x/|x|) = (dxn - xn (xn · dxn)) / |x|
  auto through_norm = [](const Matrix& dn, const Matrix& xn, const Eigen::VectorXd& norms) {
    Eigen::VectorXd dots = dn.cwiseProduct(xn).rowwise().sum();
    Matrix dx = dn - (xn.array().colwise() * dots.array()).matrix();
    return Matrix(dx.array().colwise() / norms.array());
  };
  return make_op(std::move(out), {a, b}, [=](const Matrix& g) {
    if (node_a->requires_grad) node_a->accumulate(through_norm(g * (*bn), *an, *norm_a));
    if (node_b->requires_grad) node_b->accumulate(through_norm(g.transpose() * (*an), *bn, *norm_b));
  });
}

Var weighted_cross_entropy(const Var& logits, std::span<const int> labels, std::span<const double> class_weights) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) throw InputError("cross entropy: label count mismatch");
  const Matrix& x = logits.value();
  auto probs = std::make_shared<Matrix>(x.rows(), x.cols());
  double loss = 0.0;
  double total_weight = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= x.cols()) throw InputError("cross entropy: label out of range");
    const double top = x.row(i).maxCoeff();
    const double lse = top + std::log((x.row(i).array() - top).exp().sum());
    probs->row(i) = (x.row(i).array() - lse).exp();
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
    loss += w * (lse - x(i, y));
    total_weight += w;
  }
  if (!(total_weight > 0.0)) throw InputError("cross entropy: zero total weight");
  Matrix out(1, 1);
  out(0, 0) = loss / total_weight;
  auto nl = logits.node();
  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<double> ws(class_weights.begin(), class_weights.end());
  return make_op(std::move(out), {logits}, [nl, probs, ys, ws, total_weight](const Matrix& g) {
    Matrix grad = *probs;
    for (Eigen::Index i = 0; i < grad.rows(); ++i) {
      const int y = ys[static_cast<std::size_t>(i)];
      const double w = ws.empty() ? 1.0 : ws[static_cast<std::size_t>(y)];
      grad(i, y) -= 1.0;
      grad.row(i) *= w / total_weight;
    }
    nl->accumulate(grad * g(0, 0));
  });
}

// ---------------------------------------------------------------------------

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Adam::Adam(ParameterList params, double learning_rate, double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  for (const auto& p : params_) {
    first_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
    second_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& var = params_[i].var;
    if (!var.requires_grad() || var.node()->grad.size() == 0) continue;
    Matrix g = var.node()->grad;
    if (weight_decay_ != 0.0) g += weight_decay_ * var.value();
    first_[i] = beta1_ * first_[i] + (1.0 - beta1_) * g;
    second_[i] = beta2_ * second_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    var.mutable_value().array() -=
        lr_ * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (const auto& p : params_) p.var.zero_grad();
}

std::vector<Matrix> snapshot(const ParameterList& params) {
  std::vector<Matrix> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.var.value());
  return values;
}

void restore(const ParameterList& params, const std::vector<Matrix>& values) {
  if (values.size() != params.size()) throw InputError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var var = params[i].var;
    var.mutable_value() = values[i];
  }
}

}  // namespace gangforge::ag
