#include "gangforge/attack.hpp"

#include "gangforge/checkpoint.hpp"
#include "gangforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace gangforge {

using nlohmann::json;

// Configuration ---------------------------------------------------------------

void validate(const AttackConfig& c) {
  if (c.K < 1) throw ConfigError("attack.K must be >= 1");
  if (c.n_c < 1) throw ConfigError("attack.n_c must be >= 1");
  if (c.L < 0) throw ConfigError("attack.L must be >= 0");
  if (c.n_h < 1) throw ConfigError("attack.n_h must be >= 1");
  if (c.D_H < 1 || c.D_H % c.n_h != 0) throw ConfigError("attack.D_H must be a positive multiple of attack.n_h");
  if (c.ffn_dim < 1) throw ConfigError("attack.ffn_dim must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("attack.dropout must lie in [0, 1)");
  if (!(c.learning_rate > 0.0)) throw ConfigError("attack.learning_rate must be positive");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("attack.weight_decay must be non-negative");
  if (c.epochs < 0) throw ConfigError("attack.epochs must be >= 0");
  if (c.patience < 0) throw ConfigError("attack.patience must be >= 0");
  if (!(c.tau_end > 0.0) || !(c.tau_start >= c.tau_end)) throw ConfigError("attack.tau_end must be positive and <= tau_start");
  if (!(c.epsilon_end >= 0.0) || !(c.epsilon_start >= c.epsilon_end)) {
    throw ConfigError("attack.epsilon_end must be non-negative and <= epsilon_start");
  }
  if (!(c.decay_rate > 0.0 && c.decay_rate <= 1.0)) throw ConfigError("attack.decay_rate must lie in (0, 1]");
}

json to_json(const AttackConfig& c) {
  return {{"K", c.K},
          {"n_c", c.n_c},
          {"L", c.L},
          {"n_h", c.n_h},
          {"D_H", c.D_H},
          {"ffn_dim", c.ffn_dim},
          {"dropout", c.dropout},
          {"mask_attack_nodes", c.mask_attack_nodes},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"tau_start", c.tau_start},
          {"tau_end", c.tau_end},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"decay_rate", c.decay_rate},
          {"seed", c.seed}};
}

AttackConfig attack_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("attack config must be an object");
  AttackConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "K") c.K = value.get<int>();
      else if (key == "n_c") c.n_c = value.get<int>();
      else if (key == "L") c.L = value.get<int>();
      else if (key == "n_h") c.n_h = value.get<int>();
      else if (key == "D_H") c.D_H = value.get<int>();
      else if (key == "ffn_dim") c.ffn_dim = value.get<int>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "mask_attack_nodes") c.mask_attack_nodes = value.get<bool>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "tau_start") c.tau_start = value.get<double>();
      else if (key == "tau_end") c.tau_end = value.get<double>();
      else if (key == "epsilon_start") c.epsilon_start = value.get<double>();
      else if (key == "epsilon_end") c.epsilon_end = value.get<double>();
      else if (key == "decay_rate") c.decay_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("attack: unknown field '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError("attack." + key + ": wrong type");
    }
  }
  validate(c);
  return c;
}

double annealed(double start, double end, double decay, int epoch) {
  return std::max(start * std::pow(decay, epoch), end);
}

// Building blocks -------------------------------------------------------------------

Mlp Mlp::create(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::mt19937_64& rng) {
  return {ag::parameter(ag::glorot(in, hidden, rng)), ag::parameter(Matrix::Zero(1, hidden)),
          ag::parameter(ag::glorot(hidden, out, rng)), ag::parameter(Matrix::Zero(1, out))};
}

ag::Var Mlp::operator()(const ag::Var& x) const {
  return ag::add_row(ag::matmul(ag::relu(ag::add_row(ag::matmul(x, w1), b1)), w2), b2);
}

void Mlp::append(ag::ParameterList& list, const std::string& prefix) const {
  list.push_back({prefix + "w1", w1});
  list.push_back({prefix + "b1", b1});
  list.push_back({prefix + "w2", w2});
  list.push_back({prefix + "b2", b2});
}

NodeEncoder NodeEncoder::create(Eigen::Index attr_dim, Eigen::Index repr_dim, Eigen::Index hidden, std::mt19937_64& rng) {
  NodeEncoder e;
  e.W = ag::parameter(ag::glorot(attr_dim, hidden, rng));
  e.b1 = ag::parameter(Matrix::Zero(1, hidden));
  e.w = ag::parameter(ag::glorot(1, hidden, rng));
  e.b2 = ag::parameter(Matrix::Zero(1, hidden));
  e.mlp = Mlp::create(2 * hidden + repr_dim, hidden, hidden, rng);
  return e;
}

ag::Var NodeEncoder::operator()(const Matrix& x, const Matrix& degree, const Matrix& h, bool drop_degree) const {
  ag::Var xs = ag::add_row(ag::matmul(ag::constant(x), W), b1);
  ag::Var ds = drop_degree ? ag::constant(Matrix::Zero(x.rows(), w.cols()))
                           : ag::add_row(ag::matmul(ag::constant(degree), w), b2);
  const ag::Var parts[] = {xs, ds, ag::constant(h)};
  return mlp(ag::relu(ag::concat_cols(parts)));
}

void NodeEncoder::append(ag::ParameterList& list, const std::string& prefix) const {
  list.push_back({prefix + "W", W});
  list.push_back({prefix + "b1", b1});
  list.push_back({prefix + "w", w});
  list.push_back({prefix + "b2", b2});
  mlp.append(list, prefix + "mlp.");
}

// Model -------------------------------------------------------------------------------

AttackModel::AttackModel(AttackConfig config, AblationConfig ablation, const DetectorModel& surrogate)
    : config_(config), ablation_(ablation), attr_dim_(surrogate.input_dim()) {
  validate(config_);
  validate(ablation_);
  auto frozen = std::make_shared<DetectorModel>(surrogate);
  frozen->set_trainable(false);
  surrogate_ = std::move(frozen);
  std::mt19937_64 rng(config_.seed);
  build(rng);
}

void AttackModel::build(std::mt19937_64& rng) {
  const auto D = static_cast<Eigen::Index>(attr_dim_);
  const auto H = static_cast<Eigen::Index>(config_.D_H);
  const auto S = static_cast<Eigen::Index>(surrogate_->config().hidden_dim);
  q_mlp = Mlp::create(D, H, H, rng);
  m_mlp = Mlp::create(2, H, H, rng);
  score_mlp = Mlp::create(2 * H + 2 * S, H, 1, rng);
  target_encoder = NodeEncoder::create(D, S, H, rng);
  candidate_encoder = ablation_.shared_encoder_parameters ? target_encoder : NodeEncoder::create(D, S, H, rng);
  for (ag::Var* p : {&p_target, &p_candidate, &p_attack}) {
    *p = ag::parameter(ag::gaussian(1, H, 0.02, rng));
    if (ablation_.no_positional_encoding) {
      p->mutable_value().setZero();
      p->node()->requires_grad = false;
    }
  }
  transformer = TransformerEncoder({config_.L, config_.n_h, config_.D_H, config_.ffn_dim, config_.dropout}, rng);
  W_a = ag::parameter(ag::glorot(H, D, rng));
  b_a = ag::parameter(Matrix::Zero(1, D));
  W_e = ag::parameter(ag::glorot(H, H, rng));
  b_e = ag::parameter(Matrix::Zero(1, H));
}

AttackModel::AttackModel(const AttackModel& other)
    : surrogate_path(other.surrogate_path),
      surrogate_sha256(other.surrogate_sha256),
      config_(other.config_),
      ablation_(other.ablation_),
      surrogate_(other.surrogate_),
      attr_dim_(other.attr_dim_) {
  if (!surrogate_) return;
  std::mt19937_64 rng(config_.seed);
  build(rng);
  ag::restore(parameters(), ag::snapshot(other.parameters()));
}

AttackModel& AttackModel::operator=(const AttackModel& other) {
  if (this != &other) *this = AttackModel(other);
  return *this;
}

ag::ParameterList AttackModel::parameters() const {
  ag::ParameterList out;
  q_mlp.append(out, "scorer.q.");
  m_mlp.append(out, "scorer.m.");
  score_mlp.append(out, "scorer.j.");
  target_encoder.append(out, "target_encoder.");
  if (!ablation_.shared_encoder_parameters) candidate_encoder.append(out, "candidate_encoder.");
  out.push_back({"pos.target", p_target});
  out.push_back({"pos.candidate", p_candidate});
  out.push_back({"pos.attack", p_attack});
  for (auto& p : transformer.parameters("transformer.")) out.push_back(std::move(p));
  out.push_back({"attr_head.W", W_a});
  out.push_back({"attr_head.b", b_a});
  out.push_back({"edge_head.W", W_e});
  out.push_back({"edge_head.b", b_e});
  return out;
}

AttackContext AttackModel::make_context(const AttributedGraph& graph, std::span<const TargetSet> sets) const {
  if (graph.attr_dim() != attr_dim_) throw InputError("attack model and graph attribute dimensions differ");
  AttackContext ctx;
  ctx.graph = &graph;
  std::vector<NodeId> all(graph.num_nodes());
  std::iota(all.begin(), all.end(), 0);
  ctx.representations = encode_nodes(*surrogate_, graph, all);
  const Matrix& x = graph.attributes();
  ctx.attr_min = x.colwise().minCoeff();
  ctx.attr_max = x.colwise().maxCoeff();
  ctx.lambda = sets.empty() ? 1 : compute_statistics(graph, sets).mean_nonzero_attrs;
  if (sets.empty()) {
    const double nonzero = static_cast<double>((x.array() != 0.0).count()) / static_cast<double>(graph.num_nodes());
    ctx.lambda = std::max(1, static_cast<int>(std::floor(nonzero + 0.5)));
  }
  return ctx;
}

ForwardOptions inference_options() { return {1.0, 0.0, Relaxation::hard, false}; }

// Selection helper ----------------------------------------------------------------------

namespace {

struct Selected {
  ag::Var var;  // what flows downstream
  Matrix hard;  // the discrete choice
};

// In soft mode the downstream value is the relaxation while the discrete
// choice comes from a noise-free top-k of the same logits.
Selected select(const ag::Var& logits, std::size_t k, const ForwardOptions& options, SelectionScope scope,
                std::mt19937_64& rng, const Mask* mask) {
  GumbelOptions g{options.tau, options.epsilon, options.relaxation, scope};
  ag::Var v = gumbel_top_k(logits, k, g, rng, mask);
  if (options.relaxation != Relaxation::soft) return {v, v.value()};
  GumbelOptions h{options.tau, 0.0, Relaxation::hard, scope};
  return {v, gumbel_top_k(ag::constant(logits.value()), k, h, rng, mask).value()};
}

Matrix rows_of(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(nodes[i]);
  return out;
}

Matrix degrees_of(const AttributedGraph& g, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = static_cast<double>(g.degree(nodes[i]));
  return out;
}

}  // namespace

// Candidate selection ----------------------------------------------------------------

CandidateSelection select_candidates(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                                     const ForwardOptions& options, std::mt19937_64& rng) {
  const AttributedGraph& g = *ctx.graph;
  const AttackConfig& c = model.config();
  CandidateSelection out;
  out.pool = k_hop_neighbors(g, targets.members, c.K);
  const auto n_c = static_cast<std::size_t>(c.n_c);

  if (model.ablation().no_candidates) {
    out.weights = ag::constant(Matrix(0, 1));
    return out;
  }
  if (out.pool.size() <= n_c) {
    out.nodes = out.pool;
    out.weights = ag::constant(Matrix::Ones(static_cast<Eigen::Index>(out.nodes.size()), 1));
    return out;
  }
  if (model.ablation().random_candidates) {
    std::sample(out.pool.begin(), out.pool.end(), std::back_inserter(out.nodes), n_c, rng);
    out.weights = ag::constant(Matrix::Ones(static_cast<Eigen::Index>(n_c), 1));
    return out;
  }

  const auto n = static_cast<Eigen::Index>(out.pool.size());
  Matrix structure(n, 2);
  std::vector<bool> is_target(g.num_nodes(), false);
  for (NodeId t : targets.members) is_target[static_cast<std::size_t>(t)] = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const NodeId v = out.pool[static_cast<std::size_t>(i)];
    double beta = 0;
    for (NodeId u : g.neighbors(v)) beta += is_target[static_cast<std::size_t>(u)];
    structure(i, 0) = static_cast<double>(g.degree(v));
    structure(i, 1) = beta;
  }
  const Matrix h_pool = rows_of(ctx.representations, out.pool);
  const RowVector h_targets = rows_of(ctx.representations, targets.members).colwise().mean();
  const ag::Var parts[] = {model.q_mlp(ag::constant(rows_of(g.attributes(), out.pool))), model.m_mlp(ag::constant(structure)),
                           ag::constant(h_pool), ag::constant(h_targets.replicate(n, 1))};
  ag::Var scores = model.score_mlp(ag::relu(ag::concat_cols(parts)));
  out.scores = scores.value();

  Selected sel = select(scores, n_c, options, SelectionScope::global, rng, nullptr);
  std::vector<Eigen::Index> picked;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sel.hard(i, 0) != 0.0) {
      picked.push_back(i);
      out.nodes.push_back(out.pool[static_cast<std::size_t>(i)]);
    }
  }
  out.weights = ag::gather_rows(sel.var, picked);
  return out;
}

// Sequence construction -------------------------------------------------------------------

EncodedSequence build_input_sequence(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                                     const CandidateSelection& candidates, std::mt19937_64& rng) {
  const AttributedGraph& g = *ctx.graph;
  const bool drop_degree = model.ablation().no_degree;
  EncodedSequence seq;
  seq.m = static_cast<Eigen::Index>(targets.members.size());
  seq.alpha = static_cast<Eigen::Index>(candidates.nodes.size());
  seq.delta = targets.node_budget;
  const auto H = static_cast<Eigen::Index>(model.config().D_H);

  std::vector<ag::Var> blocks;
  ag::Var zt = model.target_encoder(rows_of(g.attributes(), targets.members), degrees_of(g, targets.members),
                                    rows_of(ctx.representations, targets.members), drop_degree);
  blocks.push_back(ag::add_row(zt, model.p_target));
  if (seq.alpha > 0) {
    ag::Var zc = model.candidate_encoder(rows_of(g.attributes(), candidates.nodes), degrees_of(g, candidates.nodes),
                                         rows_of(ctx.representations, candidates.nodes), drop_degree);
    blocks.push_back(ag::add_row(ag::scale_rows(zc, candidates.weights), model.p_candidate));
  }
  // A single attack node starts from zero; several start from N(0, I).
  Matrix za = seq.delta == 1 ? Matrix::Zero(1, H) : ag::gaussian(seq.delta, H, 1.0, rng);
  blocks.push_back(ag::add_row(ag::constant(std::move(za)), model.p_attack));
  seq.z = ag::concat_rows(blocks);
  return seq;
}

Mask attention_mask(Eigen::Index m, Eigen::Index alpha, Eigen::Index delta) {
  const Eigen::Index M = m + alpha + delta;
  Mask allowed = Mask::Constant(M, M, true);
  allowed.block(0, m + alpha, m + alpha, delta).setConstant(false);
  return allowed;
}

EncodedSequence run_structure_encoder(const AttackModel& model, const EncodedSequence& seq, std::mt19937_64* dropout_rng,
                                      AttentionMaps* maps) {
  if (seq.layer != 0) throw InputError("structure encoder expects the layer-0 sequence");
  EncodedSequence out = seq;
  Mask mask;
  if (model.config().mask_attack_nodes) mask = attention_mask(seq.m, seq.alpha, seq.delta);
  out.z = model.transformer.forward(seq.z, model.config().mask_attack_nodes ? &mask : nullptr, dropout_rng, maps);
  out.layer = model.config().L;
  return out;
}

// Attribute generation ----------------------------------------------------------------------

namespace {

Selected attributes_selected(const AttackModel& model, const EncodedSequence& seq, const AttackContext& ctx, AttributeKind kind,
                             const ForwardOptions& options, std::mt19937_64& rng) {
  const AttributedGraph& g = *ctx.graph;
  if (kind != g.attribute_kind()) throw ConfigError("attribute kind differs from the graph's");
  if (model.ablation().random_attributes) {
    std::uniform_int_distribution<std::size_t> pick(0, g.num_nodes() - 1);
    Matrix rows(seq.delta, g.attributes().cols());
    for (Eigen::Index i = 0; i < seq.delta; ++i) rows.row(i) = g.attributes().row(static_cast<Eigen::Index>(pick(rng)));
    ag::Var v = ag::constant(rows);
    return {v, rows};
  }
  ag::Var z_attack = ag::slice_rows(seq.z, seq.m + seq.alpha, seq.delta);
  ag::Var f = ag::sigmoid(ag::add_row(ag::matmul(z_attack, model.W_a), model.b_a));
  if (kind == AttributeKind::continuous) {
    ag::Var x = ag::affine_cols(f, ctx.attr_max - ctx.attr_min, ctx.attr_min);
    return {x, x.value()};
  }
  return select(f, static_cast<std::size_t>(ctx.lambda), options, SelectionScope::per_row, rng, nullptr);
}

}  // namespace

ag::Var generate_attributes(const AttackModel& model, const EncodedSequence& seq, const AttackContext& ctx, AttributeKind kind,
                            const ForwardOptions& options, std::mt19937_64& rng) {
  return attributes_selected(model, seq, ctx, kind, options, rng).var;
}

// Edge generation -----------------------------------------------------------------------------

Mask allowed_edge_pairs(Eigen::Index m, Eigen::Index alpha, Eigen::Index delta, bool include_attack) {
  Mask allowed = Mask::Constant(delta, m + alpha + delta, true);
  for (Eigen::Index i = 0; i < delta; ++i) {
    for (Eigen::Index j = 0; j < delta; ++j) allowed(i, m + alpha + j) = include_attack && j > i;
  }
  return allowed;
}

namespace {

struct EdgeResult {
  EdgeSelection selection;
  Matrix hard;
};

EdgeResult edges_selected(const AttackModel& model, const EncodedSequence& seq, const TargetSet& targets,
                          const ForwardOptions& options, std::mt19937_64& rng) {
  const Eigen::Index m = seq.m, alpha = seq.alpha, delta = seq.delta, M = seq.length();
  const int eta = targets.edge_budget;
  if (eta < delta) throw ConfigError("edge budget below node budget");
  const AblationConfig& ab = model.ablation();

  EdgeResult out;
  ag::Var r = ag::add_row(ag::matmul(seq.z, model.W_e), model.b_e);
  ag::Var scores = ag::cosine_rows(ag::slice_rows(r, m + alpha, delta), r);
  out.selection.scores = scores.value();
  out.selection.allowed = allowed_edge_pairs(m, alpha, delta, !ab.fixed_budget);

  Mask to_targets = Mask::Constant(delta, M, false);
  to_targets.leftCols(m).setConstant(true);

  if (ab.random_edges) {
    Matrix hard = Matrix::Zero(delta, M);
    std::uniform_int_distribution<Eigen::Index> pick_target(0, m - 1);
    for (Eigen::Index i = 0; i < delta; ++i) hard(i, pick_target(rng)) = 1.0;
    std::vector<Eigen::Index> open;
    for (Eigen::Index f = 0; f < hard.size(); ++f) {
      if (out.selection.allowed.data()[f] && hard.data()[f] == 0.0) open.push_back(f);
    }
    std::vector<Eigen::Index> chosen;
    std::sample(open.begin(), open.end(), std::back_inserter(chosen), static_cast<std::size_t>(eta - delta), rng);
    for (Eigen::Index f : chosen) hard.data()[f] = 1.0;
    out.selection.weights = ag::constant(hard);
    out.hard = std::move(hard);
    return out;
  }

  Selected first = select(scores, 1, options, SelectionScope::per_row, rng, &to_targets);
  Mask rest = out.selection.allowed && (first.hard.array() == 0.0);

  if (ab.fixed_budget) {
    // Every attack node gets exactly floor(eta / delta) edges; the rest of
    // the budget stays unused. Extra edges go to targets and candidates only.
    std::vector<ag::Var> rows;
    Matrix hard = first.hard;
    for (Eigen::Index i = 0; i < delta; ++i) {
      const Eigen::Index quota = eta / delta - 1;
      const Mask row_mask = rest.row(i);
      const auto open = static_cast<Eigen::Index>(row_mask.count());
      const auto k = static_cast<std::size_t>(std::min(quota, open));
      if (k == 0) {
        rows.push_back(ag::constant(Matrix::Zero(1, M)));
        continue;
      }
      Selected s = select(ag::slice_rows(scores, i, 1), k, options, SelectionScope::per_row, rng, &row_mask);
      rows.push_back(s.var);
      hard.row(i) += s.hard;
    }
    out.selection.weights = ag::add(first.var, ag::concat_rows(rows));
    out.hard = std::move(hard);
    return out;
  }

  const auto k2 = static_cast<std::size_t>(std::min<Eigen::Index>(eta - delta, rest.count()));
  if (k2 == 0) {
    out.selection.weights = first.var;
    out.hard = first.hard;
    return out;
  }
  Selected second = select(scores, k2, options, SelectionScope::global, rng, &rest);
  out.selection.weights = ag::add(first.var, second.var);
  out.hard = first.hard + second.hard;
  return out;
}

}  // namespace

EdgeSelection generate_edges(const AttackModel& model, const EncodedSequence& seq, const TargetSet& targets,
                             const ForwardOptions& options, std::mt19937_64& rng) {
  return edges_selected(model, seq, targets, options, rng).selection;
}

std::vector<InjectedEdge> selection_to_edges(const Matrix& weights, const TargetSet& targets, std::span<const NodeId> candidates) {
  const auto m = static_cast<Eigen::Index>(targets.members.size());
  const auto alpha = static_cast<Eigen::Index>(candidates.size());
  std::vector<InjectedEdge> edges;
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      if (weights(i, j) == 0.0) continue;
      Endpoint other;
      if (j < m) other = Endpoint::original(targets.members[static_cast<std::size_t>(j)]);
      else if (j < m + alpha) other = Endpoint::original(candidates[static_cast<std::size_t>(j - m)]);
      else other = Endpoint::attack(static_cast<NodeId>(j - m - alpha));
      edges.push_back(canonical({Endpoint::attack(static_cast<NodeId>(i)), other}));
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

// Loss and full forward -----------------------------------------------------------------------

ag::Var attack_loss(const ag::Var& scores) {
  if (scores.rows() == 0) throw InputError("attack loss of an empty target set");
  if (scores.cols() != 2) throw InputError("attack loss expects two-class scores");
  return ag::mean(ag::relu(ag::sub(ag::slice_cols(scores, 1, 1), ag::slice_cols(scores, 0, 1))));
}

namespace {

std::vector<NodeId> ball(const AttributedGraph& g, std::span<const NodeId> centers, int radius) {
  std::vector<NodeId> out(centers.begin(), centers.end());
  if (radius >= 1 && !centers.empty()) {
    auto ring = k_hop_neighbors(g, centers, radius);
    out.insert(out.end(), ring.begin(), ring.end());
  }
  return out;
}

}  // namespace

std::vector<NodeId> receptive_field(const AttributedGraph& graph, std::span<const NodeId> targets,
                                    std::span<const NodeId> candidates, int layers) {
  std::vector<NodeId> out = ball(graph, targets, layers);
  auto around = ball(graph, candidates, std::max(layers - 2, 0));
  out.insert(out.end(), around.begin(), around.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ForwardResult attack_forward(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets,
                             const ForwardOptions& options, std::mt19937_64& rng) {
  const AttributedGraph& g = *ctx.graph;
  validate_target_set(g, targets);
  ForwardResult out;
  out.candidates = select_candidates(model, ctx, targets, options, rng);
  const EncodedSequence z0 = build_input_sequence(model, ctx, targets, out.candidates, rng);
  const EncodedSequence zl = run_structure_encoder(model, z0, options.dropout ? &rng : nullptr);

  Selected attrs = attributes_selected(model, zl, ctx, g.attribute_kind(), options, rng);
  EdgeResult edges = edges_selected(model, zl, targets, options, rng);
  out.attributes = attrs.var;
  out.edges = edges.selection;

  out.plan.num_attack_nodes = static_cast<int>(zl.delta);
  out.plan.attack_attributes = attrs.hard;
  out.plan.edges = selection_to_edges(edges.hard, targets, out.candidates.nodes);

  // Score the targets on the part of G' that can reach them.
  const auto& cands = out.candidates.nodes;
  const std::vector<NodeId> field = receptive_field(g, targets.members, cands, model.surrogate().config().num_layers);
  auto local = [&](NodeId v) {
    return static_cast<NodeId>(std::lower_bound(field.begin(), field.end(), v) - field.begin());
  };
  PropagationGraph pg = PropagationGraph::induced(g, field, static_cast<std::size_t>(zl.delta));
  const auto base = static_cast<NodeId>(field.size());
  const Eigen::Index m = zl.m, alpha = zl.alpha, M = zl.length();
  std::vector<std::pair<NodeId, NodeId>> endpoints;
  std::vector<Eigen::Index> slots;
  for (Eigen::Index i = 0; i < zl.delta; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      if (!edges.selection.allowed(i, j)) continue;
      NodeId other;
      if (j < m) other = local(targets.members[static_cast<std::size_t>(j)]);
      else if (j < m + alpha) other = local(cands[static_cast<std::size_t>(j - m)]);
      else other = base + static_cast<NodeId>(j - m - alpha);
      endpoints.emplace_back(base + static_cast<NodeId>(i), other);
      slots.push_back(i * M + j);
    }
  }
  pg.set_variable_edges(edges.selection.weights, std::move(endpoints), std::move(slots));

  const ag::Var features[] = {ag::constant(rows_of(g.attributes(), field)), attrs.var};
  const DetectorModel& surrogate = model.surrogate();
  ag::Var logits = surrogate.head(surrogate.encode(pg, ag::concat_rows(features)));
  std::vector<Eigen::Index> target_rows;
  for (NodeId t : targets.members) target_rows.push_back(local(t));
  out.target_scores = ag::gather_rows(logits, target_rows);
  out.loss = attack_loss(out.target_scores);
  return out;
}

// Training and inference -----------------------------------------------------------------------

std::uint64_t target_seed(std::uint64_t seed, const TargetSet& targets) {
  // FNV-1a over the member ids, mixed with the model seed.
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (NodeId v : targets.members) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 1099511628211ULL;
  }
  return h;
}

InjectionPlan run_attack(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets) {
  ag::NoGradGuard guard;
  std::mt19937_64 rng(target_seed(model.config().seed, targets));
  return attack_forward(model, ctx, targets, inference_options(), rng).plan;
}

InjectionPlan run_attack(const AttackModel& model, const AttributedGraph& graph, const TargetSet& targets) {
  const AttackContext ctx = model.make_context(graph, std::span<const TargetSet>(&targets, 1));
  return run_attack(model, ctx, targets);
}

namespace {

double inference_loss(const AttackModel& model, const AttackContext& ctx, const TargetSet& targets) {
  ag::NoGradGuard guard;
  std::mt19937_64 rng(target_seed(model.config().seed, targets));
  return attack_forward(model, ctx, targets, inference_options(), rng).loss.scalar();
}

}  // namespace

TrainingHistory train_attack(AttackModel& model, const DatasetBundle& bundle) {
  const AttackConfig& c = model.config();
  const std::vector<std::size_t> train_ids = bundle.sets_in(Split::train);
  const std::vector<std::size_t> val_ids = bundle.sets_in(Split::val);
  if (train_ids.empty()) throw ConfigError("no training target sets");
  const AttackContext ctx = model.make_context(bundle.graph, bundle.target_sets);

  ag::ParameterList params = model.parameters();
  ag::Adam optimizer(params, c.learning_rate, c.weight_decay);
  std::mt19937_64 rng(c.seed ^ 0x5DEECE66DULL);
  TrainingHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values = ag::snapshot(params);

  std::vector<std::size_t> order = train_ids;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.tau = annealed(c.tau_start, c.tau_end, c.decay_rate, epoch);
    record.epsilon = annealed(c.epsilon_start, c.epsilon_end, c.decay_rate, epoch);
    const ForwardOptions options{record.tau, record.epsilon, Relaxation::straight_through, true};

    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t id : order) {
      optimizer.zero_grad();
      ForwardResult result = attack_forward(model, ctx, bundle.target_sets[id], options, rng);
      ag::backward(result.loss);
      optimizer.step();
      total += result.loss.scalar();
    }
    record.train_loss = total / static_cast<double>(order.size());

    const std::vector<std::size_t>& monitor = val_ids.empty() ? train_ids : val_ids;
    double val = 0.0;
    for (std::size_t id : monitor) val += inference_loss(model, ctx, bundle.target_sets[id]);
    record.val_loss = val / static_cast<double>(monitor.size());
    history.epochs.push_back(record);

    if (record.val_loss < best) {
      best = record.val_loss;
      history.best_epoch = epoch;
      best_values = ag::snapshot(params);
    } else if (epoch - history.best_epoch > c.patience) {
      break;
    }
  }
  ag::restore(params, best_values);
  return history;
}

// Checkpoints -------------------------------------------------------------------------------

void save_attack(const AttackModel& model, const std::filesystem::path& path, const TrainingHistory* history) {
  json body = {{"config", to_json(model.config())},
               {"ablation", to_json(model.ablation())},
               {"attr_dim", model.attr_dim()},
               {"surrogate", {{"path", model.surrogate_path}, {"sha256", model.surrogate_sha256}}},
               {"parameters", parameters_to_json(model.parameters())}};
  if (history) {
    json epochs = json::array();
    for (const auto& r : history->epochs) {
      epochs.push_back({{"epoch", r.epoch}, {"tau", r.tau}, {"epsilon", r.epsilon}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}});
    }
    body["history"] = {{"epochs", epochs}, {"best_epoch", history->best_epoch}};
  }
  write_checkpoint(path, "GFATK1", body);
}

AttackModel load_attack(const std::filesystem::path& path, const std::filesystem::path& surrogate_path) {
  const std::string name = path.filename().string();
  const json body = read_checkpoint(path, "GFATK1");
  try {
    const std::string recorded = body.at("surrogate").at("sha256").get<std::string>();
    const std::string actual = sha256_file(surrogate_path);
    if (recorded != actual) {
      throw LoadError(name, 0, "surrogate hash mismatch: checkpoint was trained against a different " + surrogate_path.filename().string());
    }
    const DetectorModel surrogate = load_detector(surrogate_path);
    if (body.at("attr_dim").get<std::size_t>() != surrogate.input_dim()) throw LoadError(name, 0, "attribute dimension mismatch");
    AttackModel model(attack_config_from_json(body.at("config")), ablation_config_from_json(body.at("ablation")), surrogate);
    parameters_from_json(body.at("parameters"), model.parameters(), name);
    model.surrogate_path = body.at("surrogate").at("path").get<std::string>();
    model.surrogate_sha256 = recorded;
    return model;
  } catch (const json::exception& e) {
    throw LoadError(name, 0, std::string("malformed attack checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(name, 0, e.what());
  }
}

}  // namespace gangforge
