#pragma once

#include "gangforge/autograd.hpp"
#include "gangforge/graph.hpp"

#include <memory>
#include <span>
#include <vector>

namespace gangforge {

/// Message-passing structure used by the detectors. Unit-weight edges are
/// stored as symmetric CSR; an optional set of variable edges takes its
/// weights from entries of an ag::Var so that gradients reach them.
class PropagationGraph {
 public:
  static PropagationGraph from_graph(const AttributedGraph& graph);

  /// Subgraph induced by `nodes` (local index i <-> nodes[i]) followed by
  /// `appended` edgeless nodes. Degree contributed by edges leaving the
  /// subgraph is kept so that symmetric normalisation matches the full graph.
  static PropagationGraph induced(const AttributedGraph& graph, std::span<const NodeId> nodes,
                                  std::size_t appended);

  /// Edge k connects local nodes endpoints[k] with weight
  /// weights.value().data()[slots[k]] (row-major flat index).
  void set_variable_edges(ag::Var weights, std::vector<std::pair<NodeId, NodeId>> endpoints,
                          std::vector<Eigen::Index> slots);

  std::size_t num_nodes() const noexcept { return structure_->num_nodes; }

  /// D^{-1/2} (A + I) D^{-1/2} h with D including self-loops and weights.
  ag::Var gcn(const ag::Var& h) const;

  /// Weighted mean of neighbour rows (zero for isolated nodes).
  ag::Var mean(const ag::Var& h) const;

 private:
  struct Structure {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> offsets{0};
    std::vector<NodeId> neighbors;
    std::vector<double> outside_degree;
  };
  struct VariableEdge {
    NodeId a;
    NodeId b;
    Eigen::Index slot;
  };
  struct Variable {
    ag::Var weights;
    std::vector<VariableEdge> edges;
  };

  // Shared so that backward closures stay valid after this object is gone.
  std::shared_ptr<const Structure> structure_ = std::make_shared<Structure>();
  std::shared_ptr<const Variable> variable_ = std::make_shared<Variable>();
};

}  // namespace gangforge
