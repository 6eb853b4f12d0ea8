#include "gangforge/baselines.hpp"

#include "gangforge/errors.hpp"

#include <algorithm>
#include <random>

namespace gangforge {

InjectionPlan random_injection(const AttributedGraph& graph, const TargetSet& targets, std::uint64_t seed, int hops) {
  validate_target_set(graph, targets);
  if (targets.edge_budget < targets.node_budget) throw ConfigError("edge budget below node budget");
  std::mt19937_64 rng(seed);
  const int delta = targets.node_budget;

  InjectionPlan plan;
  plan.num_attack_nodes = delta;
  plan.attack_attributes.resize(delta, graph.attributes().cols());
  std::uniform_int_distribution<std::size_t> pick_node(0, graph.num_nodes() - 1);
  for (int i = 0; i < delta; ++i) plan.attack_attributes.row(i) = graph.attributes().row(static_cast<Eigen::Index>(pick_node(rng)));

  std::uniform_int_distribution<std::size_t> pick_target(0, targets.members.size() - 1);
  for (int i = 0; i < delta; ++i) {
    plan.edges.push_back(canonical({Endpoint::attack(i), Endpoint::original(targets.members[pick_target(rng)])}));
  }

  std::vector<NodeId> pool = targets.members;
  const auto ring = k_hop_neighbors(graph, targets.members, hops);
  pool.insert(pool.end(), ring.begin(), ring.end());
  std::sort(pool.begin(), pool.end());

  std::vector<InjectedEdge> open;
  for (int i = 0; i < delta; ++i) {
    for (NodeId v : pool) open.push_back(canonical({Endpoint::attack(i), Endpoint::original(v)}));
    for (int j = i + 1; j < delta; ++j) open.push_back(canonical({Endpoint::attack(i), Endpoint::attack(j)}));
  }
  std::sort(open.begin(), open.end());
  std::vector<InjectedEdge> taken = plan.edges;
  std::sort(taken.begin(), taken.end());
  std::vector<InjectedEdge> free;
  std::set_difference(open.begin(), open.end(), taken.begin(), taken.end(), std::back_inserter(free));
  std::sample(free.begin(), free.end(), std::back_inserter(plan.edges),
              static_cast<std::size_t>(targets.edge_budget - delta), rng);
  std::sort(plan.edges.begin(), plan.edges.end());
  return plan;
}

AttackModel apply_ablation(const AttackModel& model, const AblationConfig& ablation) {
  AttackModel out(model.config(), ablation, model.surrogate());
  out.surrogate_path = model.surrogate_path;
  out.surrogate_sha256 = model.surrogate_sha256;
  return out;
}

}  // namespace gangforge
