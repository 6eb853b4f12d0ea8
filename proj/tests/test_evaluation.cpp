#include "support.hpp"

#include "gangforge/baselines.hpp"
#include "gangforge/errors.hpp"
#include "gangforge/evaluation.hpp"

using namespace gangforge;

namespace {

SetResult row(std::size_t size, std::size_t B, double clean, double attacked) {
  SetResult r;
  r.size = size;
  r.closed_neighborhood_size = B;
  r.clean = clean;
  r.attacked = attacked;
  return r;
}

DatasetBundle eval_bundle(std::uint64_t seed = 11) {
  SynthConfig sc;
  sc.num_nodes = 300;
  sc.num_gangs = 8;
  sc.gang_size_min = 2;
  sc.gang_size_max = 5;
  sc.seed = seed;
  return generate_synthetic_fraud_graph(sc, 0.4, {0.1, 0.5});
}

std::map<std::size_t, InjectionPlan> random_plans(const DatasetBundle& b, std::span<const std::size_t> ids, std::uint64_t seed) {
  std::map<std::size_t, InjectionPlan> plans;
  for (std::size_t id : ids) plans[id] = random_injection(b.graph, b.target_sets[id], seed + id);
  return plans;
}

}  // namespace

TEST(Misclassification, HandValues) {
  Matrix s(5, 2);
  s << 0.9, 0.1,  // predicts 0
      0.2, 0.8,   // 1
      0.5, 0.5,   // tie goes to 0
      0.1, 0.3,   // 1
      0.7, 0.6;   // 0
  EXPECT_EQ(misclassification_rate(s, std::vector<int>{0, 1, 0, 1, 0}), 0.0);
  EXPECT_EQ(misclassification_rate(s, std::vector<int>{1, 0, 1, 0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(misclassification_rate(s, std::vector<int>{0, 1, 1, 1, 1}), 0.4);
  EXPECT_THROW(misclassification_rate(Matrix(0, 2), std::vector<int>{}), InputError);
  EXPECT_THROW(misclassification_rate(s, std::vector<int>{0, 1}), InputError);
}

TEST(WeightedRate, SizeWeighting) {
  const std::vector<SetResult> rows{row(1, 5, 1.0, 0.0), row(3, 5, 0.0, 1.0)};
  EXPECT_DOUBLE_EQ(weighted_rate(rows, false), 0.25);
  EXPECT_DOUBLE_EQ(weighted_rate(rows, true), 0.75);
  EXPECT_EQ(weighted_rate(std::vector<SetResult>{}, true), 0.0);
}

TEST(WeightedRateProperty, OrderInvariantAndPlainMeanForEqualSizes) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SetResult> rows;
    const std::size_t n = 1 + rng() % 20;
    const std::size_t same = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(row(same, 10, u(rng), u(rng)));
    double mean = 0;
    for (const auto& r : rows) mean += r.attacked;
    EXPECT_NEAR(weighted_rate(rows, true), mean / static_cast<double>(n), 1e-12);
    for (auto& r : rows) r.size = 1 + rng() % 9;
    const double before = weighted_rate(rows, true);
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_NEAR(weighted_rate(rows, true), before, 1e-12);
  }
}

TEST(Buckets, ThreeRangesAndBoundaries) {
  const std::size_t t[] = {10, 1000};
  const std::vector<SetResult> rows{row(2, 5, 0.5, 1.0), row(4, 50, 0.25, 0.5), row(1, 5000, 0.0, 1.0), row(2, 10, 0.0, 0.0),
                                    row(2, 1000, 1.0, 1.0)};
  const auto b = category_breakdown(rows, t);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].label, "B<=10");
  EXPECT_EQ(b[1].label, "10<B<=1000");
  EXPECT_EQ(b[2].label, "B>1000");
  EXPECT_EQ(b[0].sets, 2u);
  EXPECT_EQ(b[0].nodes, 4u);
  EXPECT_DOUBLE_EQ(b[0].clean, 0.25);
  EXPECT_DOUBLE_EQ(b[0].attacked, 0.5);
  EXPECT_DOUBLE_EQ(b[1].clean, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(b[1].attacked, 4.0 / 6.0);
  EXPECT_EQ(b[2].attacked, 1.0);
}

TEST(Buckets, SingleBucketEqualsOverallRate) {
  const std::size_t t[] = {10, 1000};
  const std::vector<SetResult> rows{row(2, 3, 0.5, 1.0), row(5, 10, 0.2, 0.4), row(1, 7, 0.0, 1.0)};
  const auto b = category_breakdown(rows, t);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b[0].attacked, weighted_rate(rows, true));
  EXPECT_DOUBLE_EQ(b[0].clean, weighted_rate(rows, false));
  EXPECT_EQ(category_breakdown(rows, std::span<const std::size_t>{})[0].label, "all");
}

TEST(BucketsProperty, MatchesDirectSums) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  const std::size_t t[] = {10, 1000};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SetResult> rows;
    for (std::size_t i = 0, n = 1 + rng() % 30; i < n; ++i) {
      const std::size_t B = std::vector<std::size_t>{1, 10, 11, 500, 1000, 1001, 9000}[rng() % 7];
      rows.push_back(row(1 + rng() % 8, B, u(rng), u(rng)));
    }
    // Direct accumulation per range, as one would in a spreadsheet.
    double num[3] = {}, den[3] = {};
    for (const auto& r : rows) {
      const int k = r.closed_neighborhood_size <= 10 ? 0 : (r.closed_neighborhood_size <= 1000 ? 1 : 2);
      num[k] += static_cast<double>(r.size) * r.attacked;
      den[k] += static_cast<double>(r.size);
    }
    const auto b = category_breakdown(rows, t);
    std::size_t j = 0;
    for (int k = 0; k < 3; ++k) {
      if (den[k] == 0) continue;
      ASSERT_LT(j, b.size());
      EXPECT_NEAR(b[j].attacked, num[k] / den[k], 1e-9);
      ++j;
    }
    EXPECT_EQ(j, b.size());
  }
}

TEST(Evaluate, RowsMatchDirectComputation) {
  const DatasetBundle b = eval_bundle();
  const DetectorModel d = gftest::tiny_detector(b.graph.attr_dim(), 5);
  const auto ids = b.sets_in(Split::test);
  ASSERT_FALSE(ids.empty());
  const auto plans = random_plans(b, ids, 1);
  const AttackReport report = evaluate_attack(d, b, plans, ids);
  ASSERT_EQ(report.per_set.size(), ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const TargetSet& s = b.target_sets[ids[k]];
    const SetResult& r = report.per_set[k];
    EXPECT_EQ(r.set_id, ids[k]);
    EXPECT_EQ(r.size, s.size());
    EXPECT_DOUBLE_EQ(r.clean, misclassification_rate(d, b.graph, s.members));
    const AttributedGraph gp = apply_injection(b.graph, plans.at(ids[k]), s);
    EXPECT_DOUBLE_EQ(r.attacked, misclassification_rate(d, gp, s.members));
    std::vector<NodeId> others;
    for (NodeId v : b.test_nodes) {
      if (!std::binary_search(s.members.begin(), s.members.end(), v)) others.push_back(v);
    }
    EXPECT_DOUBLE_EQ(r.non_target_attacked, misclassification_rate(d, gp, others));
  }
  EXPECT_EQ(report.missing_plans, 0u);
}

TEST(Evaluate, DistantNodesKeepTheirScores) {
  const DatasetBundle b = eval_bundle();
  const DetectorModel d = gftest::tiny_detector(b.graph.attr_dim(), 5);
  const TargetSet& s = b.target_sets[0];
  const AttributedGraph gp = apply_injection(b.graph, random_injection(b.graph, s, 3), s);
  const auto dist = gftest::bfs_distances(b.graph, s.members);
  // A 2-layer detector only sees 2 hops; attack nodes sit one hop from the
  // targets and reach at most their 2-hop neighbourhood, so distance > 3 is safe.
  std::vector<NodeId> far;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] < 0 || dist[v] > 3) far.push_back(static_cast<NodeId>(v));
  }
  ASSERT_FALSE(far.empty());
  EXPECT_LT((predict_scores(d, b.graph, far) - predict_scores(d, gp, far)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evaluate, MissingPlansAreCleanRows) {
  const DatasetBundle b = eval_bundle();
  const DetectorModel d = gftest::tiny_detector(b.graph.attr_dim(), 5);
  const auto ids = b.sets_in(Split::test);
  ASSERT_GE(ids.size(), 2u);
  auto plans = random_plans(b, ids, 1);
  plans.erase(ids[0]);
  const AttackReport report = evaluate_attack(d, b, plans, ids);
  EXPECT_EQ(report.missing_plans, 1u);
  EXPECT_TRUE(report.per_set[0].missing_plan);
  EXPECT_EQ(report.per_set[0].attacked, report.per_set[0].clean);
  const std::vector<std::size_t> bad{b.target_sets.size()};
  EXPECT_THROW(evaluate_attack(d, b, plans, bad), InputError);
}

TEST(Evaluate, ResultsDoNotDependOnJobs) {
  const DatasetBundle b = eval_bundle();
  const DetectorModel d = gftest::tiny_detector(b.graph.attr_dim(), 5);
  std::vector<std::size_t> ids(b.target_sets.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto plans = random_plans(b, ids, 7);
  const std::string one = to_json(evaluate_attack(d, b, plans, ids, 1)).dump();
  EXPECT_EQ(one, to_json(evaluate_attack(d, b, plans, ids, 3)).dump());
  EXPECT_EQ(one, to_json(evaluate_attack(d, b, plans, ids, 8)).dump());
}

TEST(Evaluate, CsvHasOneLinePerSet) {
  std::vector<SetResult> rows{row(2, 5, 0.5, 1.0), row(3, 20, 0.0, 1.0 / 3.0)};
  rows[1].missing_plan = true;
  const std::string csv = to_csv(summarize(rows));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("0,3,20,0.000000,0.333333,0.000000,0.000000,1"), std::string::npos);
}

TEST(RandomInjection, SingleNodeSingleEdge) {
  const auto g = gftest::random_graph(30, 0.1, 1, 4, 5);
  const TargetSet t = gftest::make_set(g, {0, 2}, 1, 1);
  const InjectionPlan p = random_injection(g, t, 4);
  ASSERT_EQ(p.num_attack_nodes, 1);
  ASSERT_EQ(p.edges.size(), 1u);
  const Endpoint other = p.edges[0].a.is_attack() ? p.edges[0].b : p.edges[0].a;
  EXPECT_TRUE(other.index == 0 || other.index == 2);
}

TEST(RandomInjectionProperty, ValidPlansWithCopiedAttributes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = gftest::random_graph(40, 0.08, rng() % 1000, 4, 10);
    std::set<NodeId> m;
    while (m.size() < 1 + rng() % 4) m.insert(static_cast<NodeId>(rng() % 10));
    const int delta = 1 + static_cast<int>(rng() % 3);
    const int eta = delta * (1 + static_cast<int>(rng() % 4));
    const TargetSet t = gftest::make_set(g, {m.begin(), m.end()}, delta, eta);
    const InjectionPlan p = random_injection(g, t, trial);
    EXPECT_TRUE(gftest::plan_respects_budgets(g, p, t));
    EXPECT_NO_THROW(validate_plan(g, p, t));
    EXPECT_TRUE(p == random_injection(g, t, trial));
    const auto reach = k_hop_neighbors(g, t.members, 2);
    for (const auto& e : p.edges) {
      for (const Endpoint& x : {e.a, e.b}) {
        if (x.is_attack()) continue;
        EXPECT_TRUE(std::binary_search(t.members.begin(), t.members.end(), x.index) ||
                    std::binary_search(reach.begin(), reach.end(), x.index));
      }
    }
    for (Eigen::Index i = 0; i < p.attack_attributes.rows(); ++i) {
      bool found = false;
      for (Eigen::Index v = 0; v < g.attributes().rows() && !found; ++v) found = p.attack_attributes.row(i) == g.attributes().row(v);
      EXPECT_TRUE(found);
    }
  }
}
