#include "gangforge/propagation.hpp"

#include "gangforge/errors.hpp"

#include <cmath>

namespace gangforge {

PropagationGraph PropagationGraph::from_graph(const AttributedGraph& graph) {
  auto s = std::make_shared<Structure>();
  s->num_nodes = graph.num_nodes();
  s->offsets.assign(s->num_nodes + 1, 0);
  s->neighbors.reserve(2 * graph.num_edges());
  for (std::size_t v = 0; v < s->num_nodes; ++v) {
    auto nbrs = graph.neighbors(static_cast<NodeId>(v));
    s->neighbors.insert(s->neighbors.end(), nbrs.begin(), nbrs.end());
    s->offsets[v + 1] = s->neighbors.size();
  }
  s->outside_degree.assign(s->num_nodes, 0.0);
  PropagationGraph pg;
  pg.structure_ = std::move(s);
  return pg;
}

PropagationGraph PropagationGraph::induced(const AttributedGraph& graph, std::span<const NodeId> nodes,
                                           std::size_t appended) {
  std::vector<NodeId> local(graph.num_nodes(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    graph.check_node(nodes[i]);
    if (local[static_cast<std::size_t>(nodes[i])] >= 0) throw InputError("induced: duplicate node");
    local[static_cast<std::size_t>(nodes[i])] = static_cast<NodeId>(i);
  }
  auto s = std::make_shared<Structure>();
  s->num_nodes = nodes.size() + appended;
  s->offsets.assign(s->num_nodes + 1, 0);
  s->outside_degree.assign(s->num_nodes, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto nbrs = graph.neighbors(nodes[i]);
    std::size_t inside = 0;
    for (NodeId u : nbrs) {
      const NodeId lu = local[static_cast<std::size_t>(u)];
      if (lu >= 0) {
        s->neighbors.push_back(lu);
        ++inside;
      }
    }
    s->outside_degree[i] = static_cast<double>(nbrs.size() - inside);
    s->offsets[i + 1] = s->neighbors.size();
  }
  for (std::size_t i = nodes.size(); i < s->num_nodes; ++i) s->offsets[i + 1] = s->neighbors.size();
  PropagationGraph pg;
  pg.structure_ = std::move(s);
  return pg;
}

void PropagationGraph::set_variable_edges(ag::Var weights, std::vector<std::pair<NodeId, NodeId>> endpoints,
                                          std::vector<Eigen::Index> slots) {
  if (endpoints.size() != slots.size()) throw InputError("variable edges: endpoint/slot count mismatch");
  auto var = std::make_shared<Variable>();
  var->edges.reserve(endpoints.size());
  const auto n = static_cast<NodeId>(structure_->num_nodes);
  for (std::size_t k = 0; k < endpoints.size(); ++k) {
    const auto [a, b] = endpoints[k];
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw InputError("variable edge endpoint out of range or self-loop");
    if (slots[k] < 0 || slots[k] >= weights.value().size()) throw InputError("variable edge slot out of range");
    var->edges.push_back({a, b, slots[k]});
  }
  var->weights = std::move(weights);
  variable_ = std::move(var);
}

namespace {

// y = A m, where A holds the unit CSR edges, the weighted variable edges and
// (optionally) the identity.
template <typename Structure, typename Variable>
Matrix aggregate(const Structure& s, const Variable& var, const Matrix& m, bool self_loop) {
  Matrix y = self_loop ? m : Matrix::Zero(m.rows(), m.cols());
  for (std::size_t v = 0; v < s.num_nodes; ++v) {
    auto row = y.row(static_cast<Eigen::Index>(v));
    for (std::size_t k = s.offsets[v]; k < s.offsets[v + 1]; ++k) row += m.row(s.neighbors[k]);
  }
  if (!var.edges.empty()) {
    const double* w = var.weights.value().data();
    for (const auto& e : var.edges) {
      if (w[e.slot] == 0.0) continue;
      y.row(e.a) += w[e.slot] * m.row(e.b);
      y.row(e.b) += w[e.slot] * m.row(e.a);
    }
  }
  return y;
}

}  // namespace

ag::Var PropagationGraph::gcn(const ag::Var& h) const {
  const Structure& s = *structure_;
  if (static_cast<std::size_t>(h.rows()) != s.num_nodes) throw InputError("gcn: feature rows differ from node count");
  const auto n = static_cast<Eigen::Index>(s.num_nodes);

  Eigen::VectorXd degree(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    degree(v) = 1.0 + static_cast<double>(s.offsets[sv + 1] - s.offsets[sv]) + s.outside_degree[sv];
  }
  if (!variable_->edges.empty()) {
    const double* w = variable_->weights.value().data();
    for (const auto& e : variable_->edges) {
      degree(e.a) += w[e.slot];
      degree(e.b) += w[e.slot];
    }
  }
  auto inv_sqrt = std::make_shared<Eigen::VectorXd>(degree.array().rsqrt());
  auto scaled = std::make_shared<Matrix>(h.value().array().colwise() * inv_sqrt->array());
  auto summed = std::make_shared<Matrix>(aggregate(s, *variable_, *scaled, true));
  Matrix out = summed->array().colwise() * inv_sqrt->array();

  std::vector<ag::Var> parents{h};
  if (!variable_->edges.empty()) parents.push_back(variable_->weights);
  auto nh = h.node();
  return ag::make_op(std::move(out), std::move(parents),
                     [structure = structure_, var = variable_, nh, inv_sqrt, scaled, summed](const Matrix& g) {
    Matrix gs = g.array().colwise() * inv_sqrt->array();
    Matrix z = aggregate(*structure, *var, gs, true);
    if (nh->requires_grad) nh->accumulate(Matrix(z.array().colwise() * inv_sqrt->array()));
    const auto& nw = var->weights.node();
    if (!var->edges.empty() && nw->requires_grad) {
      // dL/dd_v = -1/2 d_v^{-3/2} (g_v . y_v + h_v . z_v)
      Eigen::VectorXd dd = g.cwiseProduct(*summed).rowwise().sum() + nh->value.cwiseProduct(z).rowwise().sum();
      dd.array() *= -0.5 * inv_sqrt->array().cube();
      Matrix gw = Matrix::Zero(nw->value.rows(), nw->value.cols());
      for (const auto& e : var->edges) {
        gw.data()[e.slot] += gs.row(e.a).dot(scaled->row(e.b)) + gs.row(e.b).dot(scaled->row(e.a)) + dd(e.a) + dd(e.b);
      }
      nw->accumulate(gw);
    }
  });
}

ag::Var PropagationGraph::mean(const ag::Var& h) const {
  const Structure& s = *structure_;
  if (static_cast<std::size_t>(h.rows()) != s.num_nodes) throw InputError("mean: feature rows differ from node count");
  const auto n = static_cast<Eigen::Index>(s.num_nodes);

  Eigen::VectorXd mass(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    mass(v) = static_cast<double>(s.offsets[sv + 1] - s.offsets[sv]);
  }
  if (!variable_->edges.empty()) {
    const double* w = variable_->weights.value().data();
    for (const auto& e : variable_->edges) {
      mass(e.a) += w[e.slot];
      mass(e.b) += w[e.slot];
    }
  }
  auto inv_mass = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index v = 0; v < n; ++v) (*inv_mass)(v) = mass(v) > 0.0 ? 1.0 / mass(v) : 0.0;

  auto out = std::make_shared<Matrix>(aggregate(s, *variable_, h.value(), false).array().colwise() * inv_mass->array());
  std::vector<ag::Var> parents{h};
  if (!variable_->edges.empty()) parents.push_back(variable_->weights);
  auto nh = h.node();
  Matrix value = *out;
  return ag::make_op(std::move(value), std::move(parents),
                     [structure = structure_, var = variable_, nh, inv_mass, out](const Matrix& g) {
    Matrix gs = g.array().colwise() * inv_mass->array();
    if (nh->requires_grad) nh->accumulate(aggregate(*structure, *var, gs, false));
    const auto& nw = var->weights.node();
    if (!var->edges.empty() && nw->requires_grad) {
      const Matrix& x = nh->value;
      Matrix gw = Matrix::Zero(nw->value.rows(), nw->value.cols());
      for (const auto& e : var->edges) {
        gw.data()[e.slot] += gs.row(e.a).dot(x.row(e.b) - out->row(e.a)) + gs.row(e.b).dot(x.row(e.a) - out->row(e.b));
      }
      nw->accumulate(gw);
    }
  });
}

}  // namespace gangforge
