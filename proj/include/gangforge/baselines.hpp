#pragma once

#include "gangforge/attack.hpp"

#include <cstdint>

namespace gangforge {

/// No-learning baseline: attributes copied from Δ uniformly drawn original
/// nodes (with replacement); each attack node wired to a random target; the
/// remaining η-Δ edges drawn uniformly from the open pairs between attack
/// nodes and targets, K-hop neighbours or other attack nodes.
InjectionPlan random_injection(const AttributedGraph& graph, const TargetSet& targets, std::uint64_t seed, int hops = 2);

/// A fresh attack model with the same configuration and surrogate as `model`
/// whose behaviour follows `ablation`.
AttackModel apply_ablation(const AttackModel& model, const AblationConfig& ablation);

}  // namespace gangforge
