#include "gangforge/dataset.hpp"

#include "gangforge/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gangforge {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<NodeId>& DatasetBundle::split_nodes(Split split) const {
  switch (split) {
    case Split::train: return train_nodes;
    case Split::val: return val_nodes;
    case Split::test: return test_nodes;
  }
  return train_nodes;
}

std::vector<std::size_t> DatasetBundle::sets_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < target_sets.size(); ++i) {
    if (target_sets[i].split == split) out.push_back(i);
  }
  return out;
}

void validate_bundle(const DatasetBundle& bundle) {
  const AttributedGraph& g = bundle.graph;
  std::vector<int> owner(g.num_nodes(), -1);
  for (Split split : {Split::train, Split::val, Split::test}) {
    for (NodeId v : bundle.split_nodes(split)) {
      if (!g.contains(v)) throw ValidationError("split node " + std::to_string(v) + " out of range");
      if (owner[static_cast<std::size_t>(v)] >= 0) throw ValidationError("node " + std::to_string(v) + " appears in more than one split");
      if (g.label(v) == kUnlabeled) throw ValidationError("split node " + std::to_string(v) + " is unlabeled");
      owner[static_cast<std::size_t>(v)] = static_cast<int>(split);
    }
  }
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (g.label(static_cast<NodeId>(v)) != kUnlabeled && owner[v] < 0) {
      throw ValidationError("labelled node " + std::to_string(v) + " belongs to no split");
    }
  }
  for (std::size_t i = 0; i < bundle.target_sets.size(); ++i) {
    const TargetSet& set = bundle.target_sets[i];
    validate_target_set(g, set);
    for (NodeId v : set.members) {
      if (owner[static_cast<std::size_t>(v)] != static_cast<int>(set.split)) {
        throw ValidationError("target set " + std::to_string(i) + " member " + std::to_string(v) + " lies outside split " +
                              std::string(to_string(set.split)));
      }
    }
  }
}

// Loading ------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.filename().string(), 0, "missing or unreadable file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(path.filename().string(), 0, std::string("malformed JSON: ") + e.what());
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Calls fn(line_number, content) for every non-blank line with `#` comments removed.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + start, end - start);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) fn(line_no, line);
    if (end == text.size()) break;
    start = end + 1;
  }
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  token = trim(token);
  if (token.empty()) return false;
  const char* begin = token.data();
  if constexpr (std::is_floating_point_v<T>) {
    if (*begin == '+') ++begin;
  }
  auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

std::vector<NodeId> node_list(const json& value, const std::string& file, const std::string& what, std::size_t n) {
  if (!value.is_array()) throw LoadError(file, 0, what + " must be an array of node indices");
  std::vector<NodeId> nodes;
  for (const json& v : value) {
    if (!v.is_number_integer()) throw LoadError(file, 0, what + " contains a non-integer entry");
    const auto id = v.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= n) throw LoadError(file, 0, what + " node " + std::to_string(id) + " out of range");
    nodes.push_back(static_cast<NodeId>(id));
  }
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) throw LoadError(file, 0, what + " lists a node twice");
  return nodes;
}

}  // namespace

DatasetBundle load_dataset(const fs::path& directory, BudgetParams budget) {
  for (const char* name : {"meta.json", "edges.txt", "features.csv", "labels.csv", "target_sets.json", "splits.json"}) {
    if (!fs::exists(directory / name)) throw LoadError(name, 0, "missing file in " + directory.string());
  }

  const json meta = read_json(directory / "meta.json");
  std::size_t n = 0;
  std::size_t dim = 0;
  AttributeKind kind = AttributeKind::continuous;
  try {
    const auto raw_n = meta.at("num_nodes").get<long long>();
    const auto raw_d = meta.at("attr_dim").get<long long>();
    if (raw_n <= 0 || raw_d <= 0) throw LoadError("meta.json", 0, "num_nodes and attr_dim must be positive");
    n = static_cast<std::size_t>(raw_n);
    dim = static_cast<std::size_t>(raw_d);
    kind = parse_attribute_kind(meta.at("attribute_kind").get<std::string>());
  } catch (const json::exception& e) {
    throw LoadError("meta.json", 0, std::string("invalid field: ") + e.what());
  } catch (const InputError& e) {
    throw LoadError("meta.json", 0, e.what());
  }

  std::vector<Edge> edges;
  {
    std::set<Edge> seen;
    for_each_line(read_file(directory / "edges.txt"), [&](std::size_t line_no, std::string_view line) {
      const auto parts = split_whitespace(line);
      long long u = 0;
      long long v = 0;
      if (parts.size() != 2 || !parse_number(parts[0], u) || !parse_number(parts[1], v)) {
        throw LoadError("edges.txt", line_no, "malformed line, expected 'u v'");
      }
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
        throw LoadError("edges.txt", line_no, "node index out of range");
      }
      if (u >= v) throw LoadError("edges.txt", line_no, "edge must satisfy u < v");
      const Edge e{static_cast<NodeId>(u), static_cast<NodeId>(v)};
      if (!seen.insert(e).second) throw LoadError("edges.txt", line_no, "duplicate edge");
      edges.push_back(e);
    });
  }

  Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  {
    std::size_t row = 0;
    for_each_line(read_file(directory / "features.csv"), [&](std::size_t line_no, std::string_view line) {
      if (row >= n) throw LoadError("features.csv", line_no, "more rows than num_nodes");
      const auto parts = split_on(line, ',');
      if (parts.size() != dim) {
        throw LoadError("features.csv", line_no, "expected " + std::to_string(dim) + " values, got " + std::to_string(parts.size()));
      }
      for (std::size_t j = 0; j < dim; ++j) {
        double x = 0.0;
        if (!parse_number(parts[j], x) || !std::isfinite(x)) throw LoadError("features.csv", line_no, "malformed number");
        if (kind == AttributeKind::discrete && x != 0.0 && x != 1.0) {
          throw LoadError("features.csv", line_no, "discrete attribute outside {0,1}");
        }
        features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = x;
      }
      ++row;
    });
    if (row != n) throw LoadError("features.csv", 0, "expected " + std::to_string(n) + " rows, got " + std::to_string(row));
  }

  std::vector<int> labels(n, kUnlabeled);
  {
    std::vector<bool> seen(n, false);
    for_each_line(read_file(directory / "labels.csv"), [&](std::size_t line_no, std::string_view line) {
      const auto parts = split_on(line, ',');
      long long node = 0;
      long long label = 0;
      if (parts.size() != 2 || !parse_number(parts[0], node) || !parse_number(parts[1], label)) {
        throw LoadError("labels.csv", line_no, "malformed line, expected 'node,label'");
      }
      if (node < 0 || static_cast<std::size_t>(node) >= n) throw LoadError("labels.csv", line_no, "node index out of range");
      if (label != 0 && label != 1) throw LoadError("labels.csv", line_no, "label outside {0,1}");
      if (seen[static_cast<std::size_t>(node)]) throw LoadError("labels.csv", line_no, "node labelled twice");
      seen[static_cast<std::size_t>(node)] = true;
      labels[static_cast<std::size_t>(node)] = static_cast<int>(label);
    });
  }

  DatasetBundle bundle;
  try {
    bundle.graph = AttributedGraph(n, std::move(edges), std::move(features), kind, std::move(labels));
  } catch (const ValidationError& e) {
    throw LoadError("edges.txt", 0, e.what());
  }
  bundle.budget = budget;

  const json splits = read_json(directory / "splits.json");
  if (!splits.is_object()) throw LoadError("splits.json", 0, "expected an object with train/val/test");
  for (const char* key : {"train", "val", "test"}) {
    if (!splits.contains(key)) throw LoadError("splits.json", 0, std::string("missing split '") + key + "'");
  }
  bundle.train_nodes = node_list(splits["train"], "splits.json", "train", n);
  bundle.val_nodes = node_list(splits["val"], "splits.json", "val", n);
  bundle.test_nodes = node_list(splits["test"], "splits.json", "test", n);
  {
    std::vector<NodeId> all;
    for (const auto* s : {&bundle.train_nodes, &bundle.val_nodes, &bundle.test_nodes}) all.insert(all.end(), s->begin(), s->end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw LoadError("splits.json", 0, "overlapping splits");
  }

  const json sets = read_json(directory / "target_sets.json");
  if (!sets.is_array()) throw LoadError("target_sets.json", 0, "expected a list of target sets");
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const json& entry = sets[i];
    const std::string what = "target set " + std::to_string(i);
    if (!entry.is_object() || !entry.contains("members") || !entry.contains("split") || !entry["split"].is_string()) {
      throw LoadError("target_sets.json", 0, what + " needs 'members' and 'split'");
    }
    TargetSet set;
    set.members = node_list(entry["members"], "target_sets.json", what, n);
    if (set.members.empty()) throw LoadError("target_sets.json", 0, what + " is empty");
    try {
      set.split = parse_split(entry["split"].get<std::string>());
    } catch (const InputError& e) {
      throw LoadError("target_sets.json", 0, what + ": " + e.what());
    }
    for (NodeId v : set.members) {
      if (bundle.graph.label(v) != 1) throw LoadError("target_sets.json", 0, what + " member " + std::to_string(v) + " is not a fraud");
    }
    bundle.target_sets.push_back(std::move(set));
  }
  if (bundle.target_sets.empty()) throw LoadError("target_sets.json", 0, "no target sets");

  try {
    assign_budgets(bundle.graph, bundle.target_sets, budget);
    validate_bundle(bundle);
  } catch (const ValidationError& e) {
    throw LoadError("splits.json", 0, e.what());
  }
  return bundle;
}

void save_dataset(const DatasetBundle& bundle, const fs::path& directory) {
  fs::create_directories(directory);
  const AttributedGraph& g = bundle.graph;
  {
    json meta = {{"num_nodes", g.num_nodes()}, {"attr_dim", g.attr_dim()}, {"attribute_kind", to_string(g.attribute_kind())}};
    std::ofstream(directory / "meta.json") << meta.dump(2) << '\n';
  }
  {
    std::ofstream out(directory / "edges.txt");
    out << "# u v (0-based, u < v)\n";
    for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
  }
  {
    std::ofstream out(directory / "features.csv");
    out << std::setprecision(17);
    const Matrix& x = g.attributes();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j > 0) out << ',';
        out << x(i, j);
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(directory / "labels.csv");
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      const int y = g.label(static_cast<NodeId>(v));
      if (y != kUnlabeled) out << v << ',' << y << '\n';
    }
  }
  {
    json sets = json::array();
    for (const TargetSet& set : bundle.target_sets) sets.push_back({{"members", set.members}, {"split", to_string(set.split)}});
    std::ofstream(directory / "target_sets.json") << sets.dump(2) << '\n';
  }
  {
    json splits = {{"train", bundle.train_nodes}, {"val", bundle.val_nodes}, {"test", bundle.test_nodes}};
    std::ofstream(directory / "splits.json") << splits.dump() << '\n';
  }
}

// Injection plans -------------------------------------------------------------

std::string injection_to_json(const InjectionPlan& plan) {
  json attrs = json::array();
  for (Eigen::Index i = 0; i < plan.attack_attributes.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < plan.attack_attributes.cols(); ++j) row.push_back(plan.attack_attributes(i, j));
    attrs.push_back(std::move(row));
  }
  auto endpoint = [](const Endpoint& p) -> json {
    if (p.is_attack()) return "a" + std::to_string(p.index);
    return p.index;
  };
  json edges = json::array();
  for (const InjectedEdge& e : plan.edges) edges.push_back(json::array({endpoint(e.a), endpoint(e.b)}));
  json doc = {{"num_attack_nodes", plan.num_attack_nodes}, {"attributes", attrs}, {"edges", edges}};
  return doc.dump(1);
}

InjectionPlan injection_from_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(source, 0, std::string("malformed JSON: ") + e.what());
  }
  InjectionPlan plan;
  try {
    const auto delta = doc.at("num_attack_nodes").get<long long>();
    if (delta < 1) throw LoadError(source, 0, "num_attack_nodes must be >= 1");
    plan.num_attack_nodes = static_cast<int>(delta);
    const json& attrs = doc.at("attributes");
    if (!attrs.is_array() || attrs.size() != static_cast<std::size_t>(delta)) {
      throw LoadError(source, 0, "attributes must have num_attack_nodes rows");
    }
    const std::size_t dim = attrs.empty() ? 0 : attrs[0].size();
    plan.attack_attributes.resize(delta, static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (!attrs[i].is_array() || attrs[i].size() != dim) throw LoadError(source, 0, "ragged attribute rows");
      for (std::size_t j = 0; j < dim; ++j) {
        if (!attrs[i][j].is_number()) throw LoadError(source, 0, "non-numeric attribute");
        plan.attack_attributes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = attrs[i][j].get<double>();
      }
    }
    auto endpoint = [&](const json& value) {
      if (value.is_number_integer()) {
        const auto v = value.get<long long>();
        if (v < 0) throw LoadError(source, 0, "negative node index");
        return Endpoint::original(static_cast<NodeId>(v));
      }
      if (value.is_string()) {
        const std::string s = value.get<std::string>();
        long long idx = -1;
        if (s.size() < 2 || s[0] != 'a' || !parse_number(std::string_view(s).substr(1), idx)) {
          throw LoadError(source, 0, "malformed attack endpoint '" + s + "'");
        }
        if (idx < 0 || idx >= delta) throw LoadError(source, 0, "attack endpoint '" + s + "' out of range");
        return Endpoint::attack(static_cast<NodeId>(idx));
      }
      throw LoadError(source, 0, "edge endpoint must be an integer or \"a<i>\"");
    };
    for (const json& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw LoadError(source, 0, "edge must be a pair");
      plan.edges.push_back({endpoint(e[0]), endpoint(e[1])});
    }
  } catch (const json::exception& e) {
    throw LoadError(source, 0, std::string("invalid field: ") + e.what());
  }
  return plan;
}

void save_injection(const InjectionPlan& plan, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path) << injection_to_json(plan) << '\n';
}

InjectionPlan load_injection(const fs::path& path) {
  return injection_from_json(read_file(path), path.filename().string());
}

// Splitting ---------------------------------------------------------------------

DatasetBundle split_dataset(AttributedGraph graph, std::vector<std::vector<NodeId>> gangs, double train_fraction,
                            std::uint64_t seed, BudgetParams budget) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction p must lie in (0, 1)");
  std::mt19937_64 rng(seed);

  std::vector<NodeId> labelled;
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    if (graph.label(static_cast<NodeId>(v)) != kUnlabeled) labelled.push_back(static_cast<NodeId>(v));
  }
  const std::size_t total = labelled.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(total - n_train) / 3.0));
  const std::size_t capacity[3] = {n_train, n_val, total - n_train - n_val};

  std::vector<int> owner(graph.num_nodes(), -1);
  for (auto& gang : gangs) {
    std::sort(gang.begin(), gang.end());
    if (gang.empty()) throw ConfigError("empty gang");
    for (NodeId v : gang) {
      graph.check_node(v);
      if (graph.label(v) != 1) throw ConfigError("gang member " + std::to_string(v) + " is not a fraud");
      if (owner[static_cast<std::size_t>(v)] >= 0) throw ConfigError("node " + std::to_string(v) + " belongs to two gangs");
      owner[static_cast<std::size_t>(v)] = 3;
    }
  }

  std::vector<std::size_t> order(gangs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t g_total = gangs.size();
  const auto g_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(g_total)));
  const auto g_val = static_cast<std::size_t>(std::llround(static_cast<double>(g_total - g_train) / 3.0));

  std::vector<NodeId> members[3];
  DatasetBundle bundle;
  bundle.budget = budget;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int split = k < g_train ? 0 : (k < g_train + g_val ? 1 : 2);
    const auto& gang = gangs[order[k]];
    for (NodeId v : gang) owner[static_cast<std::size_t>(v)] = split;
    members[split].insert(members[split].end(), gang.begin(), gang.end());
    TargetSet set;
    set.members = gang;
    set.split = static_cast<Split>(split);
    bundle.target_sets.push_back(std::move(set));
  }
  for (int s = 0; s < 3; ++s) {
    if (members[s].size() > capacity[s]) throw ConfigError("gangs do not fit into split " + std::string(to_string(static_cast<Split>(s))));
  }

  std::vector<NodeId> rest;
  for (NodeId v : labelled) {
    if (owner[static_cast<std::size_t>(v)] < 0) rest.push_back(v);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  std::size_t cursor = 0;
  for (int s = 0; s < 3; ++s) {
    while (members[s].size() < capacity[s]) members[s].push_back(rest[cursor++]);
    std::sort(members[s].begin(), members[s].end());
  }
  bundle.train_nodes = std::move(members[0]);
  bundle.val_nodes = std::move(members[1]);
  bundle.test_nodes = std::move(members[2]);
  bundle.graph = std::move(graph);
  // Keep a stable set order (by split, then by smallest member).
  std::stable_sort(bundle.target_sets.begin(), bundle.target_sets.end(), [](const TargetSet& a, const TargetSet& b) {
    if (a.split != b.split) return a.split < b.split;
    return a.members.front() < b.members.front();
  });
  if (!bundle.target_sets.empty()) assign_budgets(bundle.graph, bundle.target_sets, budget);
  validate_bundle(bundle);
  return bundle;
}

// Synthetic generator -----------------------------------------------------------------

void validate(const SynthConfig& c) {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(c.intra_gang_edge_prob, "intra_gang_edge_prob");
  prob(c.camouflage_edge_prob, "camouflage_edge_prob");
  prob(c.background_edge_prob, "background_edge_prob");
  if (!(c.fraud_fraction > 0.0 && c.fraud_fraction < 1.0)) throw ConfigError("fraud_fraction must lie in (0, 1)");
  if (c.num_nodes < 2) throw ConfigError("num_nodes must be >= 2");
  if (c.gang_size_min < 1) throw ConfigError("gang sizes must be >= 1");
  if (c.gang_size_max < c.gang_size_min) throw ConfigError("gang_size_max below gang_size_min");
  if (c.attr_dim < 2) throw ConfigError("attr_dim must be >= 2");
  if (c.num_gangs < 1) throw ConfigError("num_gangs must be >= 1");
  if (!(c.class_separation >= 0.0)) throw ConfigError("class_separation must be non-negative");
  const auto frauds = static_cast<std::size_t>(std::llround(c.fraud_fraction * static_cast<double>(c.num_nodes)));
  if (c.num_gangs * c.gang_size_min > frauds) {
    throw ConfigError("infeasible config: " + std::to_string(c.num_gangs) + " gangs of size >= " + std::to_string(c.gang_size_min) +
                      " exceed the " + std::to_string(frauds) + " fraud nodes");
  }
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

SyntheticGraph generate_synthetic_graph(const SynthConfig& c) {
  validate(c);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = c.num_nodes;
  const auto n_fraud = static_cast<std::size_t>(std::llround(c.fraud_fraction * static_cast<double>(n)));

  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<NodeId> frauds(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_fraud));
  std::vector<NodeId> benign(perm.begin() + static_cast<std::ptrdiff_t>(n_fraud), perm.end());
  std::sort(benign.begin(), benign.end());

  std::vector<int> labels(n, 0);
  for (NodeId v : frauds) labels[static_cast<std::size_t>(v)] = 1;

  // Gang sizes: uniform in [min, max], shrunk (largest first) to fit the fraud pool.
  std::uniform_int_distribution<std::size_t> size_dist(c.gang_size_min, c.gang_size_max);
  std::vector<std::size_t> sizes(c.num_gangs);
  for (auto& s : sizes) s = size_dist(rng);
  std::size_t used = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  while (used > n_fraud) {
    auto largest = std::max_element(sizes.begin(), sizes.end());
    --*largest;
    --used;
  }
  std::vector<std::vector<NodeId>> gangs;
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    std::vector<NodeId> gang(frauds.begin() + static_cast<std::ptrdiff_t>(at), frauds.begin() + static_cast<std::ptrdiff_t>(at + s));
    std::sort(gang.begin(), gang.end());
    gangs.push_back(std::move(gang));
    at += s;
  }

  std::vector<Edge> edges;
  auto maybe_link = [&](NodeId a, NodeId b, double p) {
    if (p > 0.0 && unit(rng) < p) edges.push_back(make_edge(a, b));
  };
  for (std::size_t i = 0; i < benign.size(); ++i) {
    for (std::size_t j = i + 1; j < benign.size(); ++j) maybe_link(benign[i], benign[j], c.background_edge_prob);
  }
  for (const auto& gang : gangs) {
    for (std::size_t i = 0; i < gang.size(); ++i) {
      for (std::size_t j = i + 1; j < gang.size(); ++j) maybe_link(gang[i], gang[j], c.intra_gang_edge_prob);
    }
  }
  std::vector<NodeId> sorted_frauds = frauds;
  std::sort(sorted_frauds.begin(), sorted_frauds.end());
  for (NodeId f : sorted_frauds) {
    for (NodeId b : benign) maybe_link(f, b, c.camouflage_edge_prob);
  }

  // Spanning-tree repair: attach every other component to the one holding node 0.
  DisjointSets dsu(n);
  for (const Edge& e : edges) dsu.unite(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v));
  std::vector<std::vector<NodeId>> components;
  {
    std::vector<int> index(n, -1);
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t root = dsu.find(v);
      if (index[root] < 0) {
        index[root] = static_cast<int>(components.size());
        components.emplace_back();
      }
      components[static_cast<std::size_t>(index[root])].push_back(static_cast<NodeId>(v));
    }
  }
  if (components.size() > 1) {
    const auto main = static_cast<std::size_t>(std::distance(
        components.begin(), std::max_element(components.begin(), components.end(),
                                             [](const auto& a, const auto& b) { return a.size() < b.size(); })));
    for (std::size_t k = 0; k < components.size(); ++k) {
      if (k == main) continue;
      std::uniform_int_distribution<std::size_t> pick_a(0, components[k].size() - 1);
      std::uniform_int_distribution<std::size_t> pick_b(0, components[main].size() - 1);
      edges.push_back(make_edge(components[k][pick_a(rng)], components[main][pick_b(rng)]));
    }
  }

  const auto dim = static_cast<Eigen::Index>(c.attr_dim);
  Matrix x(static_cast<Eigen::Index>(n), dim);
  if (c.attribute_kind == AttributeKind::continuous) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RowVector direction(dim);
    for (Eigen::Index j = 0; j < dim; ++j) direction(j) = normal(rng);
    direction /= direction.norm();
    for (std::size_t v = 0; v < n; ++v) {
      for (Eigen::Index j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(v), j) = normal(rng);
      if (labels[v] == 1) x.row(static_cast<Eigen::Index>(v)) += c.class_separation * direction;
    }
  } else {
    constexpr double kBaseRate = 0.1;
    std::vector<Eigen::Index> dims(static_cast<std::size_t>(dim));
    std::iota(dims.begin(), dims.end(), 0);
    std::shuffle(dims.begin(), dims.end(), rng);
    const auto marked = std::max<Eigen::Index>(1, dim / 4);
    RowVector fraud_rate = RowVector::Constant(dim, kBaseRate);
    for (Eigen::Index k = 0; k < marked; ++k) {
      fraud_rate(dims[static_cast<std::size_t>(k)]) = std::min(0.9, kBaseRate + 0.2 * c.class_separation);
    }
    for (std::size_t v = 0; v < n; ++v) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        const double rate = labels[v] == 1 ? fraud_rate(j) : kBaseRate;
        x(static_cast<Eigen::Index>(v), j) = unit(rng) < rate ? 1.0 : 0.0;
      }
    }
  }

  return {AttributedGraph(n, std::move(edges), std::move(x), c.attribute_kind, std::move(labels)), std::move(gangs)};
}

DatasetBundle generate_synthetic_fraud_graph(const SynthConfig& config, double train_fraction, BudgetParams budget) {
  SyntheticGraph synth = generate_synthetic_graph(config);
  return split_dataset(std::move(synth.graph), std::move(synth.gangs), train_fraction, config.seed, budget);
}

}  // namespace gangforge
