#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gangforge {

using NodeId = std::int32_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class AttributeKind { continuous, discrete };
enum class Split { train, val, test };

inline constexpr int kUnlabeled = -1;

std::string_view to_string(AttributeKind kind);
std::string_view to_string(Split split);
AttributeKind parse_attribute_kind(std::string_view text);
Split parse_split(std::string_view text);

/// Unordered node pair, stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  auto operator<=>(const Edge&) const = default;
};

Edge make_edge(NodeId a, NodeId b);

/// Undirected attributed graph. Immutable after construction; adjacency lists
/// are sorted and built once.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  /// Throws ValidationError on self-loops, duplicate pairs, out-of-range
  /// endpoints, a row-count mismatch, non-binary discrete attributes, or
  /// labels outside {0, 1, kUnlabeled}. An empty `labels` means unlabeled.
  AttributedGraph(std::size_t num_nodes, std::vector<Edge> edges, Matrix attributes,
                  AttributeKind kind, std::vector<int> labels = {});

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t attr_dim() const noexcept { return static_cast<std::size_t>(attributes_.cols()); }
  AttributeKind attribute_kind() const noexcept { return kind_; }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& attributes() const noexcept { return attributes_; }

  std::span<const NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const;
  bool has_edge(NodeId a, NodeId b) const;

  bool has_labels() const noexcept { return !labels_.empty(); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  /// kUnlabeled when the graph carries no labels or the node is unlabeled.
  int label(NodeId v) const;

  bool contains(NodeId v) const noexcept { return v >= 0 && static_cast<std::size_t>(v) < num_nodes_; }
  /// Throws InputError for an invalid node index.
  void check_node(NodeId v) const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
  Matrix attributes_;
  AttributeKind kind_ = AttributeKind::continuous;
  std::vector<int> labels_;
};

/// Nodes at shortest-path distance 1..hops from any node of `targets`,
/// excluding the targets. Sorted ascending.
std::vector<NodeId> k_hop_neighbors(const AttributedGraph& graph, std::span<const NodeId> targets,
                                    int hops);

/// B = |N^(1) ∪ T|.
std::size_t closed_neighborhood_size(const AttributedGraph& graph, std::span<const NodeId> members);

/// Average degree of the given nodes.
double mean_degree(const AttributedGraph& graph, std::span<const NodeId> members);

/// d̄ = 2|E| / n.
double graph_mean_degree(const AttributedGraph& graph);

/// Δ = max(⌊ρ·min(B, B̄) + 0.5⌋, 1).
int compute_node_budget(std::size_t closed_size, double mean_closed_size, double rho);

/// η = Δ·max(⌊min(d_T, ξ·d̄) + 0.5⌋, 1).
int compute_edge_budget(int node_budget, double target_mean_degree, double graph_mean_degree,
                        double xi);

struct BudgetParams {
  double rho = 0.05;
  double xi = 0.5;
};

/// A fraud gang together with its attack budgets.
struct TargetSet {
  std::vector<NodeId> members;          // sorted
  std::size_t closed_neighborhood_size = 0;
  double mean_degree = 0.0;
  int node_budget = 1;
  int edge_budget = 1;
  Split split = Split::train;

  std::size_t size() const noexcept { return members.size(); }
};

/// Fills B, d_T, Δ and η for every set. B̄ is taken over all sets passed in.
/// Throws ConfigError for an empty list or invalid ρ / ξ.
void assign_budgets(const AttributedGraph& graph, std::vector<TargetSet>& sets, BudgetParams params);

/// Throws ValidationError if members are empty, unsorted, out of range, not
/// labelled fraud, or the budgets are inconsistent.
void validate_target_set(const AttributedGraph& graph, const TargetSet& set);

struct GraphStatistics {
  double mean_closed_neighborhood = 0.0;  // B̄
  double mean_degree = 0.0;               // d̄
  RowVector attr_min;
  RowVector attr_max;
  int mean_nonzero_attrs = 1;             // λ
};

GraphStatistics compute_statistics(const AttributedGraph& graph, std::span<const TargetSet> sets);

// Injection plans ----------------------------------------------------------

/// One endpoint of an injected edge: either an original node or the i-th
/// attack node of the plan.
struct Endpoint {
  enum class Kind : std::uint8_t { original = 0, attack = 1 };

  Kind kind = Kind::original;
  NodeId index = 0;

  static constexpr Endpoint original(NodeId v) { return {Kind::original, v}; }
  static constexpr Endpoint attack(NodeId i) { return {Kind::attack, i}; }
  bool is_attack() const noexcept { return kind == Kind::attack; }

  auto operator<=>(const Endpoint&) const = default;
};

struct InjectedEdge {
  Endpoint a;
  Endpoint b;

  auto operator<=>(const InjectedEdge&) const = default;
};

/// Orders the endpoints so that a <= b.
InjectedEdge canonical(InjectedEdge edge);

struct InjectionPlan {
  int num_attack_nodes = 0;
  Matrix attack_attributes;           // num_attack_nodes x D
  std::vector<InjectedEdge> edges;

  bool operator==(const InjectionPlan& other) const;
};

/// Index of the endpoint in the perturbed graph (attack nodes follow the
/// original nodes).
NodeId perturbed_index(const Endpoint& endpoint, std::size_t original_nodes);

/// Throws ValidationError naming the violated invariant: node budget
/// exceeded, edge budget exceeded, self-loop, duplicate edge, edge without an
/// attack endpoint, dangling attack node (no edge to a target), endpoint out
/// of range, attribute shape or non-binary discrete attributes.
void validate_plan(const AttributedGraph& graph, const InjectionPlan& plan, const TargetSet& targets);

/// G' = (V ∪ V_in, E ∪ E_in, X ∪ X_in). Attack nodes are appended after the
/// original indices and are unlabeled.
AttributedGraph apply_injection(const AttributedGraph& graph, const InjectionPlan& plan,
                                const TargetSet& targets);

/// Induced subgraph on nodes [0, keep). Inverse of apply_injection.
AttributedGraph truncate_nodes(const AttributedGraph& graph, std::size_t keep);

}  // namespace gangforge
