#pragma once

#include "gangforge/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gangforge {

/// A graph with its labelled splits and fraud-gang target sets.
struct DatasetBundle {
  AttributedGraph graph;
  std::vector<TargetSet> target_sets;
  std::vector<NodeId> train_nodes;  // sorted
  std::vector<NodeId> val_nodes;
  std::vector<NodeId> test_nodes;
  BudgetParams budget;

  const std::vector<NodeId>& split_nodes(Split split) const;
  /// Indices into target_sets of the sets belonging to `split`.
  std::vector<std::size_t> sets_in(Split split) const;
};

/// Throws ValidationError unless splits are disjoint, cover every labelled
/// node, and each target set lies inside the split it declares.
void validate_bundle(const DatasetBundle& bundle);

/// Reads meta.json, edges.txt, features.csv, labels.csv, target_sets.json and
/// splits.json from `directory`, validates them and computes budgets.
/// Throws LoadError (file + line) on any defect.
DatasetBundle load_dataset(const std::filesystem::path& directory, BudgetParams budget);

/// Writes the directory layout read by load_dataset.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& directory);

/// injection.json: attack nodes are written as "a<i>" strings.
void save_injection(const InjectionPlan& plan, const std::filesystem::path& path);
InjectionPlan load_injection(const std::filesystem::path& path);
std::string injection_to_json(const InjectionPlan& plan);
InjectionPlan injection_from_json(const std::string& text, const std::string& source = "<memory>");

/// Partitions labelled nodes into train / val / test with fractions
/// p, (1-p)/3, 2(1-p)/3. Whole gangs are placed first (gang counts split in
/// the same proportions), then the remaining nodes fill each split.
DatasetBundle split_dataset(AttributedGraph graph, std::vector<std::vector<NodeId>> gangs, double train_fraction,
                            std::uint64_t seed, BudgetParams budget);

struct SynthConfig {
  std::size_t num_nodes = 2000;
  double fraud_fraction = 0.1;
  std::size_t num_gangs = 40;
  std::size_t gang_size_min = 3;
  std::size_t gang_size_max = 8;
  double intra_gang_edge_prob = 0.7;
  double camouflage_edge_prob = 0.002;  // fraud -> benign
  double background_edge_prob = 0.005;  // benign -> benign
  std::size_t attr_dim = 16;
  AttributeKind attribute_kind = AttributeKind::continuous;
  double class_separation = 2.0;
  std::uint64_t seed = 7;
};

void validate(const SynthConfig& config);

struct SyntheticGraph {
  AttributedGraph graph;
  std::vector<std::vector<NodeId>> gangs;
};

/// Planted fraud gangs on a sparse benign background; connected by
/// construction. Deterministic given the seed.
SyntheticGraph generate_synthetic_graph(const SynthConfig& config);

/// generate_synthetic_graph followed by split_dataset (same seed).
DatasetBundle generate_synthetic_fraud_graph(const SynthConfig& config, double train_fraction, BudgetParams budget);

}  // namespace gangforge
