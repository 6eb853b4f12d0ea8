#pragma once

#include "gangforge/ablation.hpp"
#include "gangforge/autograd.hpp"
#include "gangforge/dataset.hpp"
#include "gangforge/detector.hpp"
#include "gangforge/gumbel.hpp"
#include "gangforge/transformer.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace gangforge {

struct AttackConfig {
  int K = 2;
  int n_c = 128;
  int L = 6;
  int n_h = 4;
  int D_H = 64;
  int ffn_dim = 512;
  double dropout = 0.1;
  bool mask_attack_nodes = false;
  double learning_rate = 0.001;
  double weight_decay = 1e-4;
  int epochs = 100;
  int patience = 10;
  double tau_start = 10.0;
  double tau_end = 0.01;
  double epsilon_start = 10.0;
  double epsilon_end = 0.01;
  double decay_rate = 0.63;
  std::uint64_t seed = 0;
};

void validate(const AttackConfig& config);
nlohmann::json to_json(const AttackConfig& config);
AttackConfig attack_config_from_json(const nlohmann::json& j);

/// max(start · decay^epoch, end)
double annealed(double start, double end, double decay, int epoch);

/// A two-layer perceptron in -> hidden -> out with ReLU in between.
struct Mlp {
  ag::Var w1, b1, w2, b2;

  static Mlp create(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::mt19937_64& rng);
  ag::Var operator()(const ag::Var& x) const;
  void append(ag::ParameterList& list, const std::string& prefix) const;
};

/// P(x, d, h) = MLP(ReLU([(x W + b1) || (d w + b2) || h])).
struct NodeEncoder {
  ag::Var W, b1, w, b2;
  Mlp mlp;

  static NodeEncoder create(Eigen::Index attr_dim, Eigen::Index repr_dim, Eigen::Index hidden, std::mt19937_64& rng);
  /// `drop_degree` replaces the degree block with zeros.
  ag::Var operator()(const Matrix& x, const Matrix& degree, const Matrix& h, bool drop_degree) const;
  void append(ag::ParameterList& list, const std::string& prefix) const;
};

/// Per-graph quantities shared by every forward pass: surrogate
/// representations of all clean nodes, attribute ranges and λ.
struct AttackContext {
  const AttributedGraph* graph = nullptr;
  Matrix representations;  // n x surrogate hidden
  RowVector attr_min;
  RowVector attr_max;
  int lambda = 1;
};

class AttackModel {
 public:
  AttackModel() = default;
  /// The surrogate is copied and frozen. Parameters are drawn from config.seed.
  AttackModel(AttackConfig config, AblationConfig ablation, const DetectorModel& surrogate);

  AttackModel(const AttackModel& other);
  AttackModel& operator=(const AttackModel& other);
  AttackModel(AttackModel&&) noexcept = default;
  AttackModel& operator=(AttackModel&&) noexcept = default;

  const AttackConfig& config() const noexcept { return config_; }
  const AblationConfig& ablation() const noexcept { return ablation_; }
  const DetectorModel& surrogate() const { return *surrogate_; }
  std::size_t attr_dim() const noexcept { return attr_dim_; }

  /// Every parameter (shared encoder parameters listed once).
  ag::ParameterList parameters() const;

  AttackContext make_context(const AttributedGraph& graph, std::span<const TargetSet> sets) const;

  // Components, exposed for the operations below and for tests.
  Mlp q_mlp, m_mlp, score_mlp;
  NodeEncoder target_encoder;
  NodeEncoder candidate_encoder;
  ag::Var p_target, p_candidate, p_attack;  // 1 x D_H
  TransformerEncoder transformer;
  ag::Var W_a, b_a;  // D_H x D, 1 x D
  ag::Var W_e, b_e;  // D_H x D_H, 1 x D_H

  // Reference to the surrogate checkpoint recorded in attack checkpoints.
  std::string surrogate_path;
  std::string surrogate_sha256;

 private:
  void build(std::mt19937_64& rng);

  AttackConfig config_;
  AblationConfig ablation_;
  std::shared_ptr<DetectorModel> surrogate_;
  std::size_t attr_dim_ = 0;
};

/// How selections behave in one forward pass.
struct ForwardOptions {
  double tau = 1.0;
  double epsilon = 0.0;
  Relaxation relaxation = Relaxation::hard;
  bool dropout = false;
};

ForwardOptions inference_options();

struct CandidateSelection {
  std::vector<NodeId> nodes;  // ⊆ N^(K), ascending
  ag::Var weights;            // |nodes| x 1 selection values (1 forward)
  Matrix scores;              // J for every node of N^(K); empty when not scored
  std::vector<NodeId> pool;   // N^(K)
};

CandidateSelection select_candidates(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                                     const ForwardOptions& options, std::mt19937_64& rng);

/// Z = [target block; candidate block; attack block], one row per node.
struct EncodedSequence {
  ag::Var z;
  Eigen::Index m = 0;
  Eigen::Index alpha = 0;
  Eigen::Index delta = 0;
  int layer = 0;

  Eigen::Index length() const { return m + alpha + delta; }
  Matrix target_block() const { return z.value().topRows(m); }
  Matrix candidate_block() const { return z.value().middleRows(m, alpha); }
  Matrix attack_block() const { return z.value().bottomRows(delta); }
};

EncodedSequence build_input_sequence(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                                     const CandidateSelection& candidates, std::mt19937_64& rng);

/// `allowed` of the attention: with mask_attack_nodes on, target and
/// candidate queries do not see attack keys.
Mask attention_mask(Eigen::Index m, Eigen::Index alpha, Eigen::Index delta);

EncodedSequence run_structure_encoder(const AttackModel& model, const EncodedSequence& seq, std::mt19937_64* dropout_rng,
                                      AttentionMaps* maps = nullptr);

/// Δ x D attack attributes.
ag::Var generate_attributes(const AttackModel& model, const EncodedSequence& seq, const AttackContext& ctx,
                            AttributeKind kind, const ForwardOptions& options, std::mt19937_64& rng);

struct EdgeSelection {
  ag::Var weights;       // Δ x M, 1 where an edge is selected
  Matrix scores;         // cosine score matrix Ê
  Mask allowed;          // pairs that may carry an edge
};

/// Which entries of the Δ x M score matrix can ever hold an edge: no
/// self-pairs, and an attack pair (i, j) only as j > i.
Mask allowed_edge_pairs(Eigen::Index m, Eigen::Index alpha, Eigen::Index delta, bool include_attack);

EdgeSelection generate_edges(const AttackModel& model, const EncodedSequence& seq, const TargetSet& targets,
                             const ForwardOptions& options, std::mt19937_64& rng);

/// Converts a hard Δ x M selection into plan edges.
std::vector<InjectedEdge> selection_to_edges(const Matrix& weights, const TargetSet& targets,
                                             std::span<const NodeId> candidates);

/// Mean over targets of max(s1 - s0, 0). Throws InputError for no rows.
ag::Var attack_loss(const ag::Var& scores);

struct ForwardResult {
  InjectionPlan plan;
  ag::Var loss;
  ag::Var target_scores;  // |T| x 2 surrogate scores on G'
  CandidateSelection candidates;
  EdgeSelection edges;
  ag::Var attributes;
};

ForwardResult attack_forward(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                             const ForwardOptions& options, std::mt19937_64& rng);

/// Nodes needed to score `targets` exactly on G' with an L-layer detector:
/// the L-ball around the targets, the (L-2)-ball around the candidates.
std::vector<NodeId> receptive_field(const AttributedGraph& graph, std::span<const NodeId> targets,
                                    std::span<const NodeId> candidates, int layers);

struct EpochRecord {
  int epoch = 0;
  double tau = 0.0;
  double epsilon = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
};

/// Trains on the bundle's train target sets and keeps the parameters with the
/// lowest validation loss (ε = 0, hard selections). Throws ConfigError when
/// there are no training target sets.
TrainingHistory train_attack(AttackModel& model, const DatasetBundle& bundle);

/// Deterministic inference forward (ε = 0, hard selections). The random
/// attack-node initialisation is seeded from config.seed and the members.
InjectionPlan run_attack(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets);
InjectionPlan run_attack(const AttackModel& model, const AttributedGraph& graph, const TargetSet& targets);

std::uint64_t target_seed(std::uint64_t seed, const TargetSet& targets);

void save_attack(const AttackModel& model, const std::filesystem::path& path, const TrainingHistory* history = nullptr);
/// Refuses a checkpoint whose recorded surrogate hash differs from the hash
/// of `surrogate_path`.
AttackModel load_attack(const std::filesystem::path& path, const std::filesystem::path& surrogate_path);

}  // namespace gangforge
