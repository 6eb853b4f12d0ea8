#include "gangforge/evaluation.hpp"

#include "gangforge/errors.hpp"
#include "gangforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gangforge {

using nlohmann::json;

double misclassification_rate(const Matrix& scores, std::span<const int> labels) {
  if (labels.empty()) throw InputError("misclassification rate of an empty node set");
  if (static_cast<std::size_t>(scores.rows()) != labels.size()) throw InputError("score rows differ from label count");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) throw InputError("misclassification rate needs labelled nodes");
    wrong += predicted_label(scores, static_cast<Eigen::Index>(i)) != labels[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double misclassification_rate(const DetectorModel& detector, const AttributedGraph& graph, std::span<const NodeId> nodes) {
  std::vector<int> labels;
  for (NodeId v : nodes) labels.push_back(graph.label(v));
  return misclassification_rate(predict_scores(detector, graph, nodes), labels);
}

double weighted_rate(std::span<const SetResult> rows, bool attacked) {
  double num = 0.0, den = 0.0;
  for (const SetResult& r : rows) {
    num += static_cast<double>(r.size) * (attacked ? r.attacked : r.clean);
    den += static_cast<double>(r.size);
  }
  return den > 0 ? num / den : 0.0;
}

std::vector<Bucket> category_breakdown(std::span<const SetResult> rows, std::span<const std::size_t> thresholds) {
  std::vector<std::size_t> t(thresholds.begin(), thresholds.end());
  std::sort(t.begin(), t.end());
  std::vector<std::vector<SetResult>> groups(t.size() + 1);
  for (const SetResult& r : rows) {
    const auto k = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), r.closed_neighborhood_size) - t.begin());
    groups[k].push_back(r);
  }
  std::vector<Bucket> out;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    Bucket b;
    if (t.empty()) b.label = "all";
    else if (k == 0) b.label = "B<=" + std::to_string(t[0]);
    else if (k == t.size()) b.label = "B>" + std::to_string(t.back());
    else b.label = std::to_string(t[k - 1]) + "<B<=" + std::to_string(t[k]);
    b.sets = groups[k].size();
    for (const auto& r : groups[k]) b.nodes += r.size;
    b.clean = weighted_rate(groups[k], false);
    b.attacked = weighted_rate(groups[k], true);
    out.push_back(std::move(b));
  }
  return out;
}

AttackReport summarize(std::vector<SetResult> rows) {
  AttackReport report;
  report.per_set = std::move(rows);
  report.weighted_clean = weighted_rate(report.per_set, false);
  report.weighted_attacked = weighted_rate(report.per_set, true);
  static constexpr std::size_t kThresholds[] = {10, 1000};
  report.categories = category_breakdown(report.per_set, kThresholds);
  std::size_t planned = 0;
  for (const SetResult& r : report.per_set) {
    if (r.missing_plan) {
      ++report.missing_plans;
      continue;
    }
    ++planned;
    report.non_target_clean += r.non_target_clean;
    report.non_target_attacked += r.non_target_attacked;
    report.non_target_mean_abs_delta += std::abs(r.non_target_attacked - r.non_target_clean);
  }
  if (planned > 0) {
    report.non_target_clean /= static_cast<double>(planned);
    report.non_target_attacked /= static_cast<double>(planned);
    report.non_target_mean_abs_delta /= static_cast<double>(planned);
  }
  return report;
}

AttackReport evaluate_attack(const DetectorModel& detector, const DatasetBundle& bundle,
                             const std::map<std::size_t, InjectionPlan>& plans, std::span<const std::size_t> set_ids, int jobs) {
  const AttributedGraph& g = bundle.graph;
  std::vector<NodeId> all(g.num_nodes());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<NodeId>(v);
  const std::vector<int> clean_pred = predicted_labels(predict_scores(detector, g, all));

  auto rate = [&](const std::vector<int>& pred, std::span<const NodeId> nodes) {
    if (nodes.empty()) return 0.0;
    std::size_t wrong = 0;
    for (NodeId v : nodes) wrong += pred[static_cast<std::size_t>(v)] != g.label(v);
    return static_cast<double>(wrong) / static_cast<double>(nodes.size());
  };

  std::vector<SetResult> rows(set_ids.size());
  parallel_for(set_ids.size(), jobs, [&](std::size_t k) {
    const std::size_t id = set_ids[k];
    if (id >= bundle.target_sets.size()) throw InputError("unknown target set " + std::to_string(id));
    const TargetSet& set = bundle.target_sets[id];
    SetResult& r = rows[k];
    r.set_id = id;
    r.size = set.size();
    r.closed_neighborhood_size = set.closed_neighborhood_size;
    r.clean = rate(clean_pred, set.members);

    std::vector<NodeId> others;
    std::set_difference(bundle.test_nodes.begin(), bundle.test_nodes.end(), set.members.begin(), set.members.end(),
                        std::back_inserter(others));
    r.non_target_clean = rate(clean_pred, others);

    auto it = plans.find(id);
    if (it == plans.end()) {
      r.missing_plan = true;
      r.attacked = r.clean;
      r.non_target_attacked = r.non_target_clean;
      return;
    }
    const AttributedGraph attacked = apply_injection(g, it->second, set);
    std::vector<NodeId> original(g.num_nodes());
    for (std::size_t v = 0; v < original.size(); ++v) original[v] = static_cast<NodeId>(v);
    const std::vector<int> pred = predicted_labels(predict_scores(detector, attacked, original));
    r.attacked = rate(pred, set.members);
    r.non_target_attacked = rate(pred, others);
  });
  return summarize(std::move(rows));
}

json to_json(const AttackReport& report) {
  json rows = json::array();
  for (const SetResult& r : report.per_set) {
    rows.push_back({{"set_id", r.set_id},
                    {"size", r.size},
                    {"B", r.closed_neighborhood_size},
                    {"clean_misclassification", r.clean},
                    {"attacked_misclassification", r.attacked},
                    {"non_target_clean", r.non_target_clean},
                    {"non_target_attacked", r.non_target_attacked},
                    {"missing_plan", r.missing_plan}});
  }
  json buckets = json::array();
  for (const Bucket& b : report.categories) {
    buckets.push_back({{"bucket", b.label}, {"sets", b.sets}, {"nodes", b.nodes}, {"clean", b.clean}, {"attacked", b.attacked}});
  }
  return {{"per_set", rows},
          {"weighted_clean", report.weighted_clean},
          {"weighted_attacked", report.weighted_attacked},
          {"category_breakdown", buckets},
          {"non_target_clean", report.non_target_clean},
          {"non_target_attacked", report.non_target_attacked},
          {"non_target_mean_abs_delta", report.non_target_mean_abs_delta},
          {"missing_plans", report.missing_plans}};
}

std::string to_csv(const AttackReport& report) {
  std::ostringstream out;
  out << "set_id,size,B,clean_misclassification,attacked_misclassification,non_target_clean,non_target_attacked,missing_plan\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return std::string(buf);
  };
  for (const SetResult& r : report.per_set) {
    out << r.set_id << ',' << r.size << ',' << r.closed_neighborhood_size << ',' << num(r.clean) << ',' << num(r.attacked) << ','
        << num(r.non_target_clean) << ',' << num(r.non_target_attacked) << ',' << (r.missing_plan ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace gangforge
