#pragma once
// Small fixtures and independent oracles shared by the unit tests.

#include "gangforge/attack.hpp"
#include "gangforge/autograd.hpp"
#include "gangforge/dataset.hpp"
#include "gangforge/detector.hpp"
#include "gangforge/graph.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include <unistd.h>

namespace gftest {

using namespace gangforge;

inline AttributedGraph path_graph(std::size_t n, std::size_t dim = 2) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back(make_edge(static_cast<NodeId>(i), static_cast<NodeId>(i + 1)));
  return AttributedGraph(n, edges, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)),
                         AttributeKind::continuous);
}

/// Erdos-Renyi graph with Gaussian attributes and the given number of frauds
/// (nodes 0..frauds-1 are fraud).
inline AttributedGraph random_graph(std::size_t n, double p, std::uint64_t seed, std::size_t dim = 4, std::size_t frauds = 0,
                                    AttributeKind kind = AttributeKind::continuous) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (coin(rng)) edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    }
  }
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::normal_distribution<double> normal;
  std::bernoulli_distribution bit(0.3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = kind == AttributeKind::continuous ? normal(rng) : (bit(rng) ? 1.0 : 0.0);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < frauds && i < n; ++i) labels[i] = 1;
  return AttributedGraph(n, std::move(edges), std::move(x), kind, std::move(labels));
}

/// Plain BFS distances from a set of sources; -1 for unreachable.
inline std::vector<int> bfs_distances(const AttributedGraph& g, const std::vector<NodeId>& sources) {
  std::vector<std::vector<NodeId>> adj(g.num_nodes());
  for (const Edge& e : g.edges()) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  std::vector<int> dist(g.num_nodes(), -1);
  std::deque<NodeId> queue;
  for (NodeId s : sources) {
    dist[static_cast<std::size_t>(s)] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

/// The node and edge budget formulas, evaluated directly.
inline int oracle_node_budget(double B, double mean_B, double rho) {
  const double raw = std::floor(rho * std::min(B, mean_B) + 0.5);
  return raw < 1.0 ? 1 : static_cast<int>(raw);
}

inline int oracle_edge_budget(int delta, double d_T, double d_bar, double xi) {
  const double per = std::floor(std::min(d_T, xi * d_bar) + 0.5);
  return delta * (per < 1.0 ? 1 : static_cast<int>(per));
}

/// A target set with explicit budgets (B and d_T computed from the graph).
inline TargetSet make_set(const AttributedGraph& g, std::vector<NodeId> members, int delta, int eta, Split split = Split::train) {
  TargetSet s;
  std::sort(members.begin(), members.end());
  s.members = std::move(members);
  s.closed_neighborhood_size = closed_neighborhood_size(g, s.members);
  s.mean_degree = mean_degree(g, s.members);
  s.node_budget = delta;
  s.edge_budget = eta;
  s.split = split;
  return s;
}

/// Central finite difference of `loss` with respect to entry `flat` of `param`.
inline double finite_difference(ag::Var param, Eigen::Index flat, double step, const std::function<double()>& loss) {
  double& entry = param.mutable_value().data()[flat];
  const double saved = entry;
  entry = saved + step;
  const double plus = loss();
  entry = saved - step;
  const double minus = loss();
  entry = saved;
  return (plus - minus) / (2.0 * step);
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Checks every sampled entry; returns the largest relative error.
inline double max_gradient_error(const std::vector<std::pair<ag::Var, Eigen::Index>>& entries, const std::function<ag::Var()>& build,
                                 double step, double floor = 1e-6) {
  for (const auto& [p, i] : entries) p.zero_grad();
  ag::Var root = build();
  ag::backward(root);
  std::vector<double> analytic;
  for (const auto& [p, i] : entries) analytic.push_back(p.grad().data()[i]);
  double worst = 0.0;
  auto value = [&] {
    ag::NoGradGuard guard;
    return build().scalar();
  };
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double numeric = finite_difference(entries[k].first, entries[k].second, step, value);
    worst = std::max(worst, relative_error(analytic[k], numeric, floor));
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gangforge_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small attack configuration for unit tests.
inline AttackConfig tiny_attack_config(std::uint64_t seed = 0) {
  AttackConfig c;
  c.n_c = 6;
  c.L = 2;
  c.n_h = 2;
  c.D_H = 8;
  c.ffn_dim = 16;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

inline DetectorModel tiny_detector(std::size_t input_dim, std::uint64_t seed = 3, Architecture arch = Architecture::gcn) {
  DetectorConfig dc;
  dc.architecture = arch;
  dc.hidden_dim = 8;
  dc.seed = seed;
  return DetectorModel(dc, input_dim);
}

/// Checks the plan invariants directly, without validate_plan.
inline ::testing::AssertionResult plan_respects_budgets(const AttributedGraph& g, const InjectionPlan& plan, const TargetSet& t) {
  if (plan.num_attack_nodes != t.node_budget) return ::testing::AssertionFailure() << "node count " << plan.num_attack_nodes;
  if (static_cast<int>(plan.edges.size()) > t.edge_budget) return ::testing::AssertionFailure() << "edge count " << plan.edges.size();
  if (plan.attack_attributes.rows() != plan.num_attack_nodes || plan.attack_attributes.cols() != static_cast<Eigen::Index>(g.attr_dim())) {
    return ::testing::AssertionFailure() << "attribute shape";
  }
  std::set<std::pair<NodeId, NodeId>> seen;
  std::vector<bool> touches_target(static_cast<std::size_t>(plan.num_attack_nodes), false);
  const auto n = static_cast<NodeId>(g.num_nodes());
  for (const InjectedEdge& e : plan.edges) {
    const NodeId a = e.a.is_attack() ? n + e.a.index : e.a.index;
    const NodeId b = e.b.is_attack() ? n + e.b.index : e.b.index;
    if (!e.a.is_attack() && !e.b.is_attack()) return ::testing::AssertionFailure() << "edge between original nodes";
    if (a == b) return ::testing::AssertionFailure() << "self-loop";
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) return ::testing::AssertionFailure() << "duplicate edge";
    for (const auto& [x, y] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
      if (!x.is_attack()) continue;
      if (x.index < 0 || x.index >= plan.num_attack_nodes) return ::testing::AssertionFailure() << "attack index out of range";
      if (!y.is_attack() && std::binary_search(t.members.begin(), t.members.end(), y.index)) {
        touches_target[static_cast<std::size_t>(x.index)] = true;
      }
    }
  }
  for (bool ok : touches_target) {
    if (!ok) return ::testing::AssertionFailure() << "attack node without a target edge";
  }
  return ::testing::AssertionSuccess();
}

}  // namespace gftest
