#pragma once

#include "gangforge/dataset.hpp"
#include "gangforge/detector.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gangforge {

/// Fraction of rows whose argmax differs from the label. Throws InputError
/// for no rows.
double misclassification_rate(const Matrix& scores, std::span<const int> labels);
double misclassification_rate(const DetectorModel& detector, const AttributedGraph& graph, std::span<const NodeId> nodes);

struct SetResult {
  std::size_t set_id = 0;
  std::size_t size = 0;  // m
  std::size_t closed_neighborhood_size = 0;  // B
  double clean = 0.0;
  double attacked = 0.0;
  bool missing_plan = false;
  // Test nodes outside the set, before and after this set's injection.
  double non_target_clean = 0.0;
  double non_target_attacked = 0.0;
};

struct Bucket {
  std::string label;
  std::size_t sets = 0;
  std::size_t nodes = 0;
  double clean = 0.0;
  double attacked = 0.0;
};

struct AttackReport {
  std::vector<SetResult> per_set;
  double weighted_clean = 0.0;
  double weighted_attacked = 0.0;
  std::vector<Bucket> categories;
  double non_target_clean = 0.0;
  double non_target_attacked = 0.0;
  double non_target_mean_abs_delta = 0.0;
  std::size_t missing_plans = 0;
};

/// Σ m_i r_i / Σ m_i over the rows, for the clean (false) or attacked (true) rates.
double weighted_rate(std::span<const SetResult> rows, bool attacked);

/// Buckets B ≤ t0, t0 < B ≤ t1, ..., B > t_last. Empty buckets are omitted.
std::vector<Bucket> category_breakdown(std::span<const SetResult> rows, std::span<const std::size_t> thresholds);

/// Evaluates every set in `set_ids` independently on a fresh copy of the clean
/// graph. A set without a plan becomes a clean-only row flagged missing_plan.
AttackReport evaluate_attack(const DetectorModel& detector, const DatasetBundle& bundle,
                             const std::map<std::size_t, InjectionPlan>& plans, std::span<const std::size_t> set_ids,
                             int jobs = 1);

/// Aggregates rows into a report (weighted rates, buckets, non-target means).
AttackReport summarize(std::vector<SetResult> rows);

nlohmann::json to_json(const AttackReport& report);
std::string to_csv(const AttackReport& report);

}  // namespace gangforge
