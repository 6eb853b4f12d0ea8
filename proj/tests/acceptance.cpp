// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. The long-running checks share one reference bundle
// and one set of trained attack models.

#include "gangforge/ablation.hpp"
#include "gangforge/attack.hpp"
#include "gangforge/baselines.hpp"
#include "gangforge/dataset.hpp"
#include "gangforge/detector.hpp"
#include "gangforge/evaluation.hpp"
#include "gangforge/experiment.hpp"
#include "gangforge/gumbel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace gangforge;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr int kMinPlans = 500;
constexpr double kComplianceSeconds = 120;
constexpr int kFormulaTuples = 1000;
constexpr double kFormulaSeconds = 1;
constexpr int kGumbelDraws = 10000;
constexpr double kGumbelSeconds = 30;
constexpr int kGradEntries = 10;
constexpr double kGradStep = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradFloor = 1e-5;  // denominators below this count as absolute error
constexpr double kGradSeconds = 60;
constexpr double kDetectorF1 = 0.70;
constexpr double kDetectorSeconds = 300;
constexpr double kOverClean = 0.20;
constexpr double kOverRandom = 0.10;
constexpr double kEndToEndSeconds = 1200;
constexpr double kFixedBudgetTie = 0.01;
constexpr double kNonTargetDelta = 0.01;
constexpr int kSingleTargets = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o{false, ""};
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

std::string fmt(double x, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

// Plan invariants, checked without validate_plan. Returns an empty string
// when the plan is fine.
std::string plan_defect(const AttributedGraph& g, const InjectionPlan& plan, const TargetSet& t) {
  if (plan.num_attack_nodes != t.node_budget) return "node count";
  if (static_cast<int>(plan.edges.size()) > t.edge_budget) return "edge count";
  if (plan.attack_attributes.rows() != plan.num_attack_nodes) return "attribute rows";
  const auto n = static_cast<long>(g.num_nodes());
  std::set<std::pair<long, long>> seen;
  std::vector<bool> touches(static_cast<std::size_t>(plan.num_attack_nodes), false);
  for (const InjectedEdge& e : plan.edges) {
    const long a = e.a.is_attack() ? n + e.a.index : e.a.index;
    const long b = e.b.is_attack() ? n + e.b.index : e.b.index;
    if (!e.a.is_attack() && !e.b.is_attack()) return "edge between original nodes";
    if (a == b) return "self-loop";
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) return "duplicate edge";
    for (const auto& [x, y] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
      if (!x.is_attack()) continue;
      if (x.index < 0 || x.index >= plan.num_attack_nodes) return "attack index";
      if (!y.is_attack() && std::binary_search(t.members.begin(), t.members.end(), y.index)) touches[static_cast<std::size_t>(x.index)] = true;
    }
  }
  for (bool ok : touches) {
    if (!ok) return "attack node without target edge";
  }
  return "";
}

// 1. Budget compliance ----------------------------------------------------------------------

Outcome budget_compliance() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u;
  int plans = 0, valid = 0;
  std::string first_defect;
  for (int graph_id = 0; graph_id < 12; ++graph_id) {
    SynthConfig sc;
    sc.num_nodes = 200 + 50 * static_cast<std::size_t>(graph_id % 4);
    sc.num_gangs = 6;
    sc.gang_size_min = 2;
    sc.gang_size_max = 5;
    sc.seed = 100 + static_cast<std::uint64_t>(graph_id);
    const AttributedGraph g = generate_synthetic_graph(sc).graph;
    std::vector<NodeId> frauds;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      if (g.label(static_cast<NodeId>(v)) == 1) frauds.push_back(static_cast<NodeId>(v));
    }
    // Random fraud subsets as target sets, budgets from the formulas.
    std::vector<TargetSet> sets(50);
    for (TargetSet& s : sets) {
      std::set<NodeId> m;
      const std::size_t size = 1 + rng() % 6;
      while (m.size() < size) m.insert(frauds[rng() % frauds.size()]);
      s.members.assign(m.begin(), m.end());
    }
    assign_budgets(g, sets, {0.05 + 0.45 * u(rng), 0.2 + 1.8 * u(rng)});

    AttackConfig ac;
    ac.n_c = 4 + static_cast<int>(rng() % 29);
    ac.L = 1 + static_cast<int>(rng() % 2);
    ac.n_h = 2;
    ac.D_H = 16;
    ac.ffn_dim = 32;
    ac.seed = rng();
    DetectorConfig dc;
    dc.hidden_dim = 16;
    dc.seed = rng();
    const DetectorModel surrogate(dc, g.attr_dim());
    AblationConfig ablation;
    if (graph_id % 3 == 1) ablation = single_ablation(ablation_flag_names()[rng() % ablation_flag_names().size()]);
    const AttackModel model(ac, ablation, surrogate);
    const AttackContext ctx = model.make_context(g, sets);
    for (const TargetSet& s : sets) {
      ForwardOptions o = inference_options();
      if (rng() % 2) o = {0.01 + 10 * u(rng), 10 * u(rng), Relaxation::straight_through, false};
      std::mt19937_64 r(rng());
      const InjectionPlan plan = attack_forward(model, ctx, s, o, r).plan;
      ++plans;
      const std::string defect = plan_defect(g, plan, s);
      if (defect.empty()) ++valid;
      else if (first_defect.empty()) first_defect = defect;
    }
  }
  const double secs = seconds_since(start);
  const bool pass = plans >= kMinPlans && valid == plans && secs < kComplianceSeconds;
  return {pass, std::to_string(valid) + "/" + std::to_string(plans) + " plans satisfy every budget constraint" +
                    (first_defect.empty() ? "" : " (first defect: " + first_defect + ")") + "; " + fmt(secs, 1) + " s (limit " +
                    fmt(kComplianceSeconds, 0) + " s)"};
}

// 2. Budget formulas ----------------------------------------------------------------------

Outcome budget_formula() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u;
  int agree = 0;
  for (int i = 0; i < kFormulaTuples; ++i) {
    const auto B = static_cast<std::size_t>(1 + rng() % 5000);
    double B_bar = 1 + 3000 * u(rng);
    if (i % 10 == 0) B_bar = static_cast<double>(B) + (i % 20 == 0 ? 0.5 : 0.0);  // exact halves
    const double rho = i % 7 == 0 ? 0.05 : u(rng);
    const double d_T = 20 * u(rng);
    const double d_bar = 1 + 20 * u(rng);
    const double xi = 2 * u(rng);
    // Written out long-hand: round half up, then clamp to one.
    const double m = static_cast<double>(B) < B_bar ? static_cast<double>(B) : B_bar;
    long delta = static_cast<long>(std::floor(rho * m + 0.5));
    if (delta < 1) delta = 1;
    const double cap = d_T < xi * d_bar ? d_T : xi * d_bar;
    long per = static_cast<long>(std::floor(cap + 0.5));
    if (per < 1) per = 1;
    const long eta = delta * per;
    const int got_delta = compute_node_budget(B, B_bar, rho);
    const int got_eta = compute_edge_budget(got_delta, d_T, d_bar, xi);
    agree += got_delta == delta && got_eta == eta;
  }
  const double secs = seconds_since(start);
  return {agree == kFormulaTuples && secs < kFormulaSeconds,
          std::to_string(agree) + "/" + std::to_string(kFormulaTuples) + " tuples match exactly; " + fmt(secs, 3) + " s"};
}

// 3. Gumbel limit -----------------------------------------------------------------------------

// Best-sum k-subset by enumeration; among equal sums the lexicographically
// smallest index set wins.
std::vector<int> brute_force_top_k(const std::vector<double>& s, int k) {
  const int n = static_cast<int>(s.size());
  std::vector<int> best;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    std::vector<int> idx;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        idx.push_back(i);
        sum += s[static_cast<std::size_t>(i)];
      }
    }
    if (sum > best_sum || (sum == best_sum && idx < best)) {
      best_sum = sum;
      best = idx;
    }
  }
  return best;
}

Outcome gumbel_limit() {
  const auto start = Clock::now();
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> normal;
  int agree = 0;
  for (int draw = 0; draw < kGumbelDraws; ++draw) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    std::vector<double> s(static_cast<std::size_t>(n));
    for (double& x : s) x = draw % 4 == 0 ? static_cast<double>(rng() % 3) : normal(rng);  // every 4th draw has ties
    Matrix logits(1, n);
    for (int i = 0; i < n; ++i) logits(0, i) = s[static_cast<std::size_t>(i)];
    const GumbelOptions o{0.1 + 5.0 * static_cast<double>(rng() % 100) / 100.0, 0.0,
                          draw % 2 ? Relaxation::hard : Relaxation::straight_through,
                          draw % 3 ? SelectionScope::global : SelectionScope::per_row};
    const Matrix sel = gumbel_top_k(ag::constant(logits), static_cast<std::size_t>(k), o, rng).value();
    std::vector<int> got;
    bool binary = true;
    for (int i = 0; i < n; ++i) {
      if (sel(0, i) == 1.0) got.push_back(i);
      else binary &= sel(0, i) == 0.0;
    }
    agree += binary && got == brute_force_top_k(s, k);
  }
  const double secs = seconds_since(start);
  return {agree == kGumbelDraws && secs < kGumbelSeconds,
          std::to_string(agree) + "/" + std::to_string(kGumbelDraws) + " draws equal brute-force top-k; " + fmt(secs, 2) + " s"};
}

// 4. Gradient fidelity --------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20);
  const std::size_t n = 20, dim = 4;
  std::vector<Edge> edges;
  std::bernoulli_distribution coin(0.2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (coin(rng) || b == a + 1) edges.push_back(make_edge(static_cast<NodeId>(a), static_cast<NodeId>(b)));
    }
  }
  Matrix x = ag::gaussian(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim), 1.0, rng);
  std::vector<int> labels(n, 0);
  for (std::size_t v = 0; v < 5; ++v) labels[v] = 1;
  const AttributedGraph g(n, edges, x, AttributeKind::continuous, labels);

  DetectorConfig dc;
  dc.hidden_dim = 8;
  dc.seed = 4;
  DetectorModel surrogate(dc, dim);
  // Shift the fraud logit so every target scores as fraud; with the hinge
  // inactive the loss would be identically zero.
  ag::Var out_bias = surrogate.head_parameters().back().var;
  out_bias.mutable_value()(0, 1) += 5.0;

  AttackConfig ac;
  ac.n_c = 6;
  ac.L = 2;
  ac.n_h = 2;
  ac.D_H = 8;
  ac.ffn_dim = 16;
  ac.dropout = 0.0;
  ac.seed = 9;
  const AttackModel model(ac, {}, surrogate);
  std::vector<TargetSet> sets(1);
  sets[0].members = {0, 1, 2};
  assign_budgets(g, sets, {1.0, 1.0});
  sets[0].node_budget = 2;
  sets[0].edge_budget = 6;
  const AttackContext ctx = model.make_context(g, sets);
  const ForwardOptions soft{1.0, 0.0, Relaxation::soft, false};
  auto loss = [&] {
    std::mt19937_64 r(5);
    return attack_forward(model, ctx, sets[0], soft, r).loss;
  };

  ag::Var transformer_matrix;
  for (const auto& p : model.transformer.parameters()) {
    if (p.name == "transformer.0.wq") transformer_matrix = p.var;
  }
  const std::pair<const char*, ag::Var> targets[] = {{"W_a", model.W_a}, {"W_e", model.W_e}, {"transformer.0.wq", transformer_matrix}};

  for (const auto& p : model.parameters()) p.var.zero_grad();
  const ag::Var root = loss();
  if (!(root.scalar() > 0)) return {false, "loss is zero on the fixture"};
  ag::backward(root);

  double worst = 0;
  std::string where;
  for (const auto& [name, var] : targets) {
    const Matrix grad = var.grad();
    ag::Var param = var;
    for (int k = 0; k < kGradEntries; ++k) {
      const auto flat = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(grad.size()));
      double& entry = param.mutable_value().data()[flat];
      const double saved = entry;
      double plus, minus;
      {
        ag::NoGradGuard guard;
        entry = saved + kGradStep;
        plus = loss().scalar();
        entry = saved - kGradStep;
        minus = loss().scalar();
        entry = saved;
      }
      const double numeric = (plus - minus) / (2 * kGradStep);
      const double analytic = grad.data()[flat];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), kGradFloor});
      if (rel > worst) {
        worst = rel;
        where = std::string(name) + "[" + std::to_string(flat) + "]";
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= kGradRelTol && secs < kGradSeconds,
          "max relative error " + sci(worst) + " at " + where + " over " + std::to_string(3 * kGradEntries) + " entries (tol " +
              fmt(kGradRelTol, 4) + ", step " + fmt(kGradStep, 4) + "); " + fmt(secs, 2) + " s"};
}

// Shared reference experiment -------------------------------------------------------------------

struct Reference {
  ExperimentConfig config;
  DatasetBundle bundle;
  DetectorModel surrogate;
  DetectorModel victim;
  double surrogate_f1 = 0;
  double detector_seconds = 0;
  std::vector<std::size_t> test_ids;
};

double best_f1(const DetectorModel& m) {
  double best = 0;
  for (const auto& r : m.training_log) best = std::max(best, r.val_macro_f1);
  return best;
}

std::map<std::size_t, InjectionPlan> attack_plans(const AttackModel& model, const DatasetBundle& b, const std::vector<std::size_t>& ids) {
  const AttackContext ctx = model.make_context(b.graph, b.target_sets);
  std::map<std::size_t, InjectionPlan> plans;
  for (std::size_t id : ids) plans.emplace(id, run_attack(model, ctx, b.target_sets[id]));
  return plans;
}

std::map<std::size_t, InjectionPlan> baseline_plans(const DatasetBundle& b, const std::vector<std::size_t>& ids, std::uint64_t seed, int hops) {
  std::map<std::size_t, InjectionPlan> plans;
  for (std::size_t id : ids) plans.emplace(id, random_injection(b.graph, b.target_sets[id], seed * 1000003ULL + id, hops));
  return plans;
}

AttackModel train_variant(const Reference& r, std::uint64_t seed, const AblationConfig& ablation) {
  AttackConfig ac = r.config.attack;
  ac.seed = seed;
  AttackModel model(ac, ablation, r.surrogate);
  train_attack(model, r.bundle);
  return model;
}

// Per seed: clean, full attack, random baseline and every ablation row.
struct SeedRun {
  AttackReport full;
  AttackReport random;
  std::map<std::string, double> ablated;
  double full_seconds = 0;
};

}  // namespace

int main() {
  std::cout << "acceptance suite\n";
  report("budget_compliance", budget_compliance);
  report("budget_formula_oracle", budget_formula);
  report("gumbel_limit", gumbel_limit);
  report("gradient_fidelity", gradient_fidelity);

  Reference ref;
  ref.config = load_experiment_config(std::string(GANGFORGE_CONFIG_DIR) + "/reference.json");
  ref.bundle = generate_synthetic_fraud_graph(*ref.config.synth, ref.config.p, ref.config.budget());
  ref.test_ids = ref.bundle.sets_in(Split::test);

  report("detector_sanity", [&] {
    const auto start = Clock::now();
    DetectorConfig dc = ref.config.detector;
    dc.max_epochs = std::min(dc.max_epochs, 1000);
    ref.surrogate = train_detector(ref.bundle, dc);
    const double secs = seconds_since(start);
    ref.surrogate_f1 = best_f1(ref.surrogate);
    ref.victim = train_detector(ref.bundle, ref.config.victim);
    return Outcome{ref.surrogate_f1 >= kDetectorF1 && secs < kDetectorSeconds,
                   "GCN validation macro-F1 " + fmt(ref.surrogate_f1) + " (min " + fmt(kDetectorF1, 2) + ", victim " + fmt(best_f1(ref.victim)) +
                       "); " + fmt(secs, 1) + " s"};
  });

  std::vector<SeedRun> runs;
  double end_to_end_seconds = 0;
  const auto ablation_rows = enabled_flags(ref.config.ablation);
  for (std::uint64_t seed : ref.config.seeds) {
    SeedRun run;
    const auto start = Clock::now();
    const AttackModel full = train_variant(ref, seed, {});
    run.full = evaluate_attack(ref.victim, ref.bundle, attack_plans(full, ref.bundle, ref.test_ids), ref.test_ids);
    run.random = evaluate_attack(ref.victim, ref.bundle, baseline_plans(ref.bundle, ref.test_ids, seed, ref.config.attack.K), ref.test_ids);
    run.full_seconds = seconds_since(start);
    end_to_end_seconds += run.full_seconds;
    for (const auto& flag : ablation_rows) {
      const AttackModel m = train_variant(ref, seed, single_ablation(flag));
      run.ablated[flag] = evaluate_attack(ref.victim, ref.bundle, attack_plans(m, ref.bundle, ref.test_ids), ref.test_ids).weighted_attacked;
    }
    std::cout << "  seed " << seed << ": clean " << fmt(run.full.weighted_clean) << ", attacked " << fmt(run.full.weighted_attacked)
              << ", random " << fmt(run.random.weighted_attacked);
    for (const auto& [flag, v] : run.ablated) std::cout << ", " << flag << " " << fmt(v);
    std::cout << std::endl;
    runs.push_back(std::move(run));
  }
  const double n_seeds = static_cast<double>(runs.size());
  auto mean = [&](const std::function<double(const SeedRun&)>& f) {
    double s = 0;
    for (const auto& r : runs) s += f(r);
    return s / n_seeds;
  };
  const double clean = mean([](const SeedRun& r) { return r.full.weighted_clean; });
  const double attacked = mean([](const SeedRun& r) { return r.full.weighted_attacked; });
  const double random = mean([](const SeedRun& r) { return r.random.weighted_attacked; });

  report("end_to_end_effectiveness", [&] {
    const bool pass = attacked - clean >= kOverClean && attacked - random >= kOverRandom && end_to_end_seconds < kEndToEndSeconds;
    return Outcome{pass, "weighted misclassification clean " + fmt(clean) + ", attacked " + fmt(attacked) + ", random " + fmt(random) +
                             " (+" + fmt(100 * (attacked - clean), 1) + " pp over clean, min " + fmt(100 * kOverClean, 0) + "; +" +
                             fmt(100 * (attacked - random), 1) + " pp over random, min " + fmt(100 * kOverRandom, 0) + "); " +
                             fmt(end_to_end_seconds, 0) + " s"};
  });

  report("ablation_ordering", [&] {
    bool pass = !ablation_rows.empty();
    std::string detail = "full " + fmt(attacked);
    for (const auto& flag : ablation_rows) {
      const double v = mean([&](const SeedRun& r) { return r.ablated.at(flag); });
      const double tolerance = flag == "fixed_budget" ? kFixedBudgetTie : 0.0;
      pass &= attacked + tolerance >= v;
      detail += ", " + flag + " " + fmt(v);
    }
    return Outcome{pass, detail};
  });

  report("non_target_collateral", [&] {
    double total = 0;
    std::size_t plans = 0;
    for (const auto& r : runs) {
      for (const auto& row : r.full.per_set) {
        if (row.missing_plan) continue;
        total += std::abs(row.non_target_attacked - row.non_target_clean);
        ++plans;
      }
    }
    const double delta = plans ? total / static_cast<double>(plans) : 1.0;
    return Outcome{delta <= kNonTargetDelta, "mean |change| in non-target test misclassification " + fmt(100 * delta, 3) + " pp over " +
                                                  std::to_string(plans) + " plans (max " + fmt(100 * kNonTargetDelta, 1) + " pp)"};
  });

  report("single_target", [&] {
    // 500-node graph; every fraud node becomes its own target set with Δ = η = 1.
    SynthConfig sc = *ref.config.synth;
    sc.num_nodes = 500;
    sc.fraud_fraction = 0.2;
    sc.num_gangs = 15;
    sc.seed = 11;
    DatasetBundle b = generate_synthetic_fraud_graph(sc, ref.config.p, ref.config.budget());
    b.target_sets.clear();
    for (Split split : {Split::train, Split::val, Split::test}) {
      for (NodeId v : b.split_nodes(split)) {
        if (b.graph.label(v) != 1) continue;
        TargetSet s;
        s.members = {v};
        s.split = split;
        b.target_sets.push_back(s);
      }
    }
    assign_budgets(b.graph, b.target_sets, ref.config.budget());
    for (TargetSet& s : b.target_sets) s.node_budget = s.edge_budget = 1;
    validate_bundle(b);
    std::vector<std::size_t> ids = b.sets_in(Split::test);
    if (ids.size() < static_cast<std::size_t>(kSingleTargets)) return Outcome{false, "only " + std::to_string(ids.size()) + " test frauds"};
    ids.resize(kSingleTargets);
    const DetectorModel surrogate = train_detector(b, ref.config.detector);
    const DetectorModel victim = train_detector(b, ref.config.victim);
    double trained = 0, baseline = 0;
    for (std::uint64_t seed : ref.config.seeds) {
      AttackConfig ac = ref.config.attack;
      ac.seed = seed;
      AttackModel model(ac, {}, surrogate);
      train_attack(model, b);
      trained += evaluate_attack(victim, b, attack_plans(model, b, ids), ids).weighted_attacked;
      baseline += evaluate_attack(victim, b, baseline_plans(b, ids, seed, ac.K), ids).weighted_attacked;
    }
    trained /= n_seeds;
    baseline /= n_seeds;
    return Outcome{trained >= baseline, "single-target misclassification trained " + fmt(trained) + " vs random " + fmt(baseline) + " (" +
                                            std::to_string(kSingleTargets) + " targets x " + std::to_string(runs.size()) + " seeds)"};
  });

  report("determinism", [&] {
    // Two complete CLI pipelines on the smoke config, each in its own directory.
    std::ifstream in(std::string(GANGFORGE_CONFIG_DIR) + "/smoke.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    std::vector<std::string> reports;
    for (int pass = 0; pass < 2; ++pass) {
      const fs::path dir = fs::temp_directory_path() / ("gangforge_acceptance_" + std::to_string(::getpid()) + "_" + std::to_string(pass));
      fs::remove_all(dir);
      doc["output_dir"] = dir.string();
      const ExperimentConfig c = experiment_config_from_json(doc);
      std::ostringstream out, err;
      for (Command cmd : {Command::gen_synth, Command::train_detector, Command::train_attack, Command::attack, Command::evaluate}) {
        if (execute(cmd, c, {}, out, err) != 0) return Outcome{false, std::string(to_string(cmd)) + " failed: " + err.str()};
      }
      std::ifstream f(dir / "report.json", std::ios::binary);
      std::stringstream s;
      s << f.rdbuf();
      reports.push_back(s.str());
      fs::remove_all(dir);
    }
    const bool same = reports[0] == reports[1] && !reports[0].empty();
    return Outcome{same, same ? "report.json byte-identical across two pipeline runs (" + std::to_string(reports[0].size()) + " bytes)"
                              : "report.json differs between runs"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
