#include "gangforge/graph.hpp"

#include "gangforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace gangforge {

std::string_view to_string(AttributeKind kind) {
  return kind == AttributeKind::continuous ? "continuous" : "discrete";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "continuous") return AttributeKind::continuous;
  if (text == "discrete") return AttributeKind::discrete;
  throw InputError("unknown attribute kind '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw InputError("unknown split '" + std::string(text) + "'");
}

Edge make_edge(NodeId a, NodeId b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

AttributedGraph::AttributedGraph(std::size_t num_nodes, std::vector<Edge> edges, Matrix attributes,
                                 AttributeKind kind, std::vector<int> labels)
    : num_nodes_(num_nodes), edges_(std::move(edges)), attributes_(std::move(attributes)), kind_(kind),
      labels_(std::move(labels)) {
  if (static_cast<std::size_t>(attributes_.rows()) != num_nodes_) {
    throw ValidationError("attribute matrix has " + std::to_string(attributes_.rows()) + " rows, expected " +
                          std::to_string(num_nodes_));
  }
  if (!labels_.empty() && labels_.size() != num_nodes_) {
    throw ValidationError("label vector has " + std::to_string(labels_.size()) + " entries, expected " +
                          std::to_string(num_nodes_));
  }
  for (int y : labels_) {
    if (y != 0 && y != 1 && y != kUnlabeled) throw ValidationError("label outside {0,1}: " + std::to_string(y));
  }
  if (kind_ == AttributeKind::discrete) {
    for (Eigen::Index i = 0; i < attributes_.size(); ++i) {
      const double x = attributes_.data()[i];
      if (x != 0.0 && x != 1.0) throw ValidationError("discrete attribute entry outside {0,1}");
    }
  }

  for (Edge& e : edges_) {
    if (e.u == e.v) throw ValidationError("self-loop on node " + std::to_string(e.u));
    e = make_edge(e.u, e.v);
    if (!contains(e.u) || !contains(e.v)) {
      throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw ValidationError("duplicate edge (" + std::to_string(dup->u) + "," + std::to_string(dup->v) + ")");
  }

  std::vector<std::size_t> degree(num_nodes_, 0);
  for (const Edge& e : edges_) {
    ++degree[e.u];
    ++degree[e.v];
  }
  offsets_.assign(num_nodes_ + 1, 0);
  for (std::size_t v = 0; v < num_nodes_; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    adjacency_[cursor[e.v]++] = e.u;
  }
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
  }
}

std::span<const NodeId> AttributedGraph::neighbors(NodeId v) const {
  check_node(v);
  const auto u = static_cast<std::size_t>(v);
  return {adjacency_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
}

std::size_t AttributedGraph::degree(NodeId v) const {
  check_node(v);
  const auto u = static_cast<std::size_t>(v);
  return offsets_[u + 1] - offsets_[u];
}

bool AttributedGraph::has_edge(NodeId a, NodeId b) const {
  auto nbrs = neighbors(a);
  check_node(b);
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

int AttributedGraph::label(NodeId v) const {
  check_node(v);
  return labels_.empty() ? kUnlabeled : labels_[static_cast<std::size_t>(v)];
}

void AttributedGraph::check_node(NodeId v) const {
  if (!contains(v)) {
    throw InputError("node index " + std::to_string(v) + " out of range [0," + std::to_string(num_nodes_) + ")");
  }
}

std::vector<NodeId> k_hop_neighbors(const AttributedGraph& graph, std::span<const NodeId> targets, int hops) {
  if (hops < 1) throw InputError("hop count must be >= 1");
  std::vector<int> dist(graph.num_nodes(), -1);
  std::deque<NodeId> queue;
  for (NodeId t : targets) {
    graph.check_node(t);
    if (dist[static_cast<std::size_t>(t)] < 0) {
      dist[static_cast<std::size_t>(t)] = 0;
      queue.push_back(t);
    }
  }
  std::vector<NodeId> result;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(v)];
    if (d == hops) continue;
    for (NodeId u : graph.neighbors(v)) {
      if (dist[static_cast<std::size_t>(u)] >= 0) continue;
      dist[static_cast<std::size_t>(u)] = d + 1;
      result.push_back(u);
      queue.push_back(u);
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::size_t closed_neighborhood_size(const AttributedGraph& graph, std::span<const NodeId> members) {
  std::vector<NodeId> unique(members.begin(), members.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  return unique.size() + k_hop_neighbors(graph, unique, 1).size();
}

double mean_degree(const AttributedGraph& graph, std::span<const NodeId> members) {
  if (members.empty()) throw InputError("mean degree of an empty node set");
  double total = 0.0;
  for (NodeId v : members) total += static_cast<double>(graph.degree(v));
  return total / static_cast<double>(members.size());
}

double graph_mean_degree(const AttributedGraph& graph) {
  if (graph.num_nodes() == 0) throw InputError("mean degree of an empty graph");
  return 2.0 * static_cast<double>(graph.num_edges()) / static_cast<double>(graph.num_nodes());
}

int compute_node_budget(std::size_t closed_size, double mean_closed_size, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw ConfigError("rho must lie in (0, 1]");
  if (closed_size < 1) throw InputError("closed neighborhood size must be >= 1");
  if (!(mean_closed_size > 0.0)) throw InputError("mean closed neighborhood size must be positive");
  const double capped = std::min(static_cast<double>(closed_size), mean_closed_size);
  const auto budget = static_cast<long long>(std::floor(rho * capped + 0.5));
  return static_cast<int>(std::max(budget, 1LL));
}

int compute_edge_budget(int node_budget, double target_mean_degree, double graph_mean_degree, double xi) {
  if (!(xi > 0.0)) throw ConfigError("xi must be positive");
  if (node_budget < 1) throw InputError("node budget must be >= 1");
  if (!(target_mean_degree > 0.0) || !(graph_mean_degree > 0.0)) throw InputError("degrees must be positive");
  const double capped = std::min(target_mean_degree, xi * graph_mean_degree);
  const auto per_node = std::max(static_cast<long long>(std::floor(capped + 0.5)), 1LL);
  return static_cast<int>(node_budget * per_node);
}

void assign_budgets(const AttributedGraph& graph, std::vector<TargetSet>& sets, BudgetParams params) {
  if (sets.empty()) throw ConfigError("no target sets: mean closed neighborhood size is undefined");
  if (!(params.rho > 0.0) || params.rho > 1.0) throw ConfigError("rho must lie in (0, 1]");
  if (!(params.xi > 0.0)) throw ConfigError("xi must be positive");
  double total = 0.0;
  for (TargetSet& set : sets) {
    set.closed_neighborhood_size = closed_neighborhood_size(graph, set.members);
    set.mean_degree = mean_degree(graph, set.members);
    total += static_cast<double>(set.closed_neighborhood_size);
  }
  const double mean_b = total / static_cast<double>(sets.size());
  const double d_bar = graph_mean_degree(graph);
  for (TargetSet& set : sets) {
    set.node_budget = compute_node_budget(set.closed_neighborhood_size, mean_b, params.rho);
    // Isolated targets still receive one edge per attack node.
    const double d_t = set.mean_degree > 0.0 ? set.mean_degree : 1.0;
    set.edge_budget = compute_edge_budget(set.node_budget, d_t, d_bar > 0.0 ? d_bar : 1.0, params.xi);
  }
}

void validate_target_set(const AttributedGraph& graph, const TargetSet& set) {
  if (set.members.empty()) throw ValidationError("target set is empty");
  if (!std::is_sorted(set.members.begin(), set.members.end()) ||
      std::adjacent_find(set.members.begin(), set.members.end()) != set.members.end()) {
    throw ValidationError("target set members must be sorted and unique");
  }
  for (NodeId v : set.members) {
    if (!graph.contains(v)) throw ValidationError("target member " + std::to_string(v) + " out of range");
    if (graph.label(v) != 1) throw ValidationError("target member " + std::to_string(v) + " is not a fraud");
  }
  if (set.node_budget < 1) throw ValidationError("node budget must be >= 1");
  if (set.edge_budget < set.node_budget) throw ValidationError("edge budget below node budget");
  if (set.closed_neighborhood_size < set.members.size()) {
    throw ValidationError("closed neighborhood smaller than the target set");
  }
}

GraphStatistics compute_statistics(const AttributedGraph& graph, std::span<const TargetSet> sets) {
  if (graph.num_nodes() == 0) throw InputError("statistics of an empty graph");
  if (sets.empty()) throw ConfigError("no target sets: mean closed neighborhood size is undefined");
  GraphStatistics stats;
  const Matrix& x = graph.attributes();
  stats.attr_min = x.colwise().minCoeff();
  stats.attr_max = x.colwise().maxCoeff();
  const double nonzero = static_cast<double>((x.array() != 0.0).count()) / static_cast<double>(graph.num_nodes());
  stats.mean_nonzero_attrs = std::max(1, static_cast<int>(std::floor(nonzero + 0.5)));
  double total = 0.0;
  for (const TargetSet& set : sets) {
    total += static_cast<double>(set.closed_neighborhood_size > 0 ? set.closed_neighborhood_size
                                                                  : closed_neighborhood_size(graph, set.members));
  }
  stats.mean_closed_neighborhood = total / static_cast<double>(sets.size());
  stats.mean_degree = graph_mean_degree(graph);
  return stats;
}

InjectedEdge canonical(InjectedEdge edge) {
  if (edge.b < edge.a) std::swap(edge.a, edge.b);
  return edge;
}

bool InjectionPlan::operator==(const InjectionPlan& other) const {
  return num_attack_nodes == other.num_attack_nodes && attack_attributes.rows() == other.attack_attributes.rows() &&
         attack_attributes.cols() == other.attack_attributes.cols() &&
         attack_attributes == other.attack_attributes && edges == other.edges;
}

NodeId perturbed_index(const Endpoint& endpoint, std::size_t original_nodes) {
  return endpoint.is_attack() ? static_cast<NodeId>(original_nodes) + endpoint.index : endpoint.index;
}

void validate_plan(const AttributedGraph& graph, const InjectionPlan& plan, const TargetSet& targets) {
  const int delta = plan.num_attack_nodes;
  if (delta < 1) throw ValidationError("plan must inject at least one attack node");
  if (delta > targets.node_budget) throw ValidationError("node budget exceeded");
  if (static_cast<int>(plan.edges.size()) > targets.edge_budget) throw ValidationError("edge budget exceeded");
  if (plan.attack_attributes.rows() != delta || plan.attack_attributes.cols() != static_cast<Eigen::Index>(graph.attr_dim())) {
    throw ValidationError("attack attribute matrix shape mismatch");
  }
  if (graph.attribute_kind() == AttributeKind::discrete) {
    for (Eigen::Index i = 0; i < plan.attack_attributes.size(); ++i) {
      const double x = plan.attack_attributes.data()[i];
      if (x != 0.0 && x != 1.0) throw ValidationError("discrete attack attribute outside {0,1}");
    }
  }
  if (!plan.attack_attributes.allFinite()) throw ValidationError("non-finite attack attribute");

  std::vector<InjectedEdge> seen;
  seen.reserve(plan.edges.size());
  std::vector<bool> touches_target(static_cast<std::size_t>(delta), false);
  for (const InjectedEdge& raw : plan.edges) {
    const InjectedEdge e = canonical(raw);
    for (const Endpoint& p : {e.a, e.b}) {
      if (p.is_attack() ? (p.index < 0 || p.index >= delta) : !graph.contains(p.index)) {
        throw ValidationError("edge endpoint out of range");
      }
    }
    if (e.a == e.b) throw ValidationError("self-loop");
    if (!e.a.is_attack() && !e.b.is_attack()) throw ValidationError("edge without an attack endpoint");
    seen.push_back(e);
    if (!e.a.is_attack() && std::binary_search(targets.members.begin(), targets.members.end(), e.a.index)) {
      touches_target[static_cast<std::size_t>(e.b.index)] = true;
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) throw ValidationError("duplicate edge");
  for (int i = 0; i < delta; ++i) {
    if (!touches_target[static_cast<std::size_t>(i)]) {
      throw ValidationError("dangling attack node a" + std::to_string(i) + " has no edge to a target");
    }
  }
}

AttributedGraph apply_injection(const AttributedGraph& graph, const InjectionPlan& plan, const TargetSet& targets) {
  validate_plan(graph, plan, targets);
  const std::size_t n = graph.num_nodes();
  const auto delta = static_cast<std::size_t>(plan.num_attack_nodes);

  std::vector<Edge> edges = graph.edges();
  edges.reserve(edges.size() + plan.edges.size());
  for (const InjectedEdge& e : plan.edges) edges.push_back(make_edge(perturbed_index(e.a, n), perturbed_index(e.b, n)));

  Matrix attributes(static_cast<Eigen::Index>(n + delta), graph.attributes().cols());
  attributes.topRows(static_cast<Eigen::Index>(n)) = graph.attributes();
  attributes.bottomRows(static_cast<Eigen::Index>(delta)) = plan.attack_attributes;

  std::vector<int> labels;
  if (graph.has_labels()) {
    labels = graph.labels();
    labels.resize(n + delta, kUnlabeled);
  }
  return AttributedGraph(n + delta, std::move(edges), std::move(attributes), graph.attribute_kind(), std::move(labels));
}

AttributedGraph truncate_nodes(const AttributedGraph& graph, std::size_t keep) {
  if (keep > graph.num_nodes()) throw InputError("cannot keep more nodes than the graph has");
  std::vector<Edge> edges;
  for (const Edge& e : graph.edges()) {
    if (static_cast<std::size_t>(e.v) < keep) edges.push_back(e);
  }
  Matrix attributes = graph.attributes().topRows(static_cast<Eigen::Index>(keep));
  std::vector<int> labels;
  if (graph.has_labels()) labels.assign(graph.labels().begin(), graph.labels().begin() + static_cast<std::ptrdiff_t>(keep));
  return AttributedGraph(keep, std::move(edges), std::move(attributes), graph.attribute_kind(), std::move(labels));
}

}  // namespace gangforge
