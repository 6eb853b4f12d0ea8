#include "gangforge/detector.hpp"

#include "gangforge/checkpoint.hpp"
#include "gangforge/errors.hpp"

#include <array>
#include <random>
#include <set>

namespace gangforge {

using nlohmann::json;

std::string_view to_string(Architecture arch) { return arch == Architecture::gcn ? "gcn" : "sage"; }

Architecture parse_architecture(std::string_view text) {
  if (text == "gcn") return Architecture::gcn;
  if (text == "sage") return Architecture::sage;
  throw ConfigError("unknown architecture '" + std::string(text) + "' (expected gcn or sage)");
}

void validate(const DetectorConfig& c) {
  if (c.num_layers < 1) throw ConfigError("detector.num_layers must be >= 1");
  if (c.hidden_dim < 1) throw ConfigError("detector.hidden_dim must be >= 1");
  if (c.head_layers < 1) throw ConfigError("detector.head_layers must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("detector.learning_rate must be positive");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("detector.weight_decay must be non-negative");
  if (c.max_epochs < 0) throw ConfigError("detector.max_epochs must be >= 0");
  if (c.validate_every < 1) throw ConfigError("detector.validate_every must be >= 1");
  if (c.patience < 0) throw ConfigError("detector.patience must be >= 0");
  if (c.patience > c.max_epochs && c.max_epochs > 0) throw ConfigError("detector.patience must not exceed max_epochs");
}

json to_json(const DetectorConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"num_layers", c.num_layers},
          {"hidden_dim", c.hidden_dim},
          {"head_layers", c.head_layers},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},
          {"validate_every", c.validate_every},
          {"patience", c.patience},
          {"class_weighting", c.class_weighting},
          {"seed", c.seed}};
}

DetectorConfig detector_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("detector config must be an object");
  DetectorConfig c;
  static const std::set<std::string> known{"architecture", "num_layers",     "hidden_dim", "head_layers",
                                           "learning_rate", "weight_decay",  "max_epochs", "validate_every",
                                           "patience",     "class_weighting", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("detector: unknown field '" + key + "'");
    try {
      if (key == "architecture") c.architecture = parse_architecture(value.get<std::string>());
      else if (key == "num_layers") c.num_layers = value.get<int>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<int>();
      else if (key == "head_layers") c.head_layers = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "validate_every") c.validate_every = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "class_weighting") c.class_weighting = value.get<bool>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
    } catch (const json::exception&) {
      throw ConfigError("detector." + key + ": wrong type");
    }
  }
  validate(c);
  return c;
}

DetectorModel::DetectorModel(DetectorConfig config, std::size_t input_dim) : config_(config), input_dim_(input_dim) {
  validate(config_);
  if (input_dim == 0) throw ConfigError("detector input dimension must be positive");
  std::mt19937_64 rng(config_.seed);
  const auto hidden = static_cast<Eigen::Index>(config_.hidden_dim);
  auto in = static_cast<Eigen::Index>(input_dim);
  for (int l = 0; l < config_.num_layers; ++l) {
    Layer layer;
    layer.weight = ag::parameter(ag::glorot(in, hidden, rng));
    if (config_.architecture == Architecture::sage) layer.neighbor_weight = ag::parameter(ag::glorot(in, hidden, rng));
    layer.bias = ag::parameter(Matrix::Zero(1, hidden));
    encoder_.push_back(std::move(layer));
    in = hidden;
  }
  for (int l = 0; l < config_.head_layers; ++l) {
    const Eigen::Index out = l + 1 == config_.head_layers ? 2 : hidden;
    head_.push_back({ag::parameter(ag::glorot(hidden, out, rng)), ag::parameter(Matrix::Zero(1, out)), {}});
  }
}

namespace {

ag::Var deep_copy(const ag::Var& v) {
  if (!v.defined()) return {};
  return ag::Var(v.value(), v.requires_grad());
}

}  // namespace

DetectorModel::DetectorModel(const DetectorModel& other)
    : training_log(other.training_log), config_(other.config_), input_dim_(other.input_dim_) {
  for (const Layer& l : other.encoder_) encoder_.push_back({deep_copy(l.weight), deep_copy(l.bias), deep_copy(l.neighbor_weight)});
  for (const Layer& l : other.head_) head_.push_back({deep_copy(l.weight), deep_copy(l.bias), {}});
}

DetectorModel& DetectorModel::operator=(const DetectorModel& other) {
  if (this != &other) *this = DetectorModel(other);
  return *this;
}

ag::Var DetectorModel::encode(const PropagationGraph& graph, const ag::Var& features) const {
  if (static_cast<std::size_t>(features.cols()) != input_dim_) {
    throw InputError("detector expects " + std::to_string(input_dim_) + " attributes, got " + std::to_string(features.cols()));
  }
  ag::Var h = features;
  for (const Layer& layer : encoder_) {
    ag::Var z;
    if (config_.architecture == Architecture::gcn) {
      z = graph.gcn(ag::matmul(h, layer.weight));
    } else {
      z = ag::add(ag::matmul(h, layer.weight), ag::matmul(graph.mean(h), layer.neighbor_weight));
    }
    h = ag::relu(ag::add_row(z, layer.bias));
  }
  return h;
}

ag::Var DetectorModel::head(const ag::Var& representations) const {
  ag::Var h = representations;
  for (std::size_t l = 0; l < head_.size(); ++l) {
    h = ag::add_row(ag::matmul(h, head_[l].weight), head_[l].bias);
    if (l + 1 < head_.size()) h = ag::relu(h);
  }
  return h;
}

ag::ParameterList DetectorModel::encoder_parameters() const {
  ag::ParameterList out;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l) + ".";
    out.push_back({prefix + "weight", encoder_[l].weight});
    if (encoder_[l].neighbor_weight.defined()) out.push_back({prefix + "neighbor_weight", encoder_[l].neighbor_weight});
    out.push_back({prefix + "bias", encoder_[l].bias});
  }
  return out;
}

ag::ParameterList DetectorModel::head_parameters() const {
  ag::ParameterList out;
  for (std::size_t l = 0; l < head_.size(); ++l) {
    const std::string prefix = "head." + std::to_string(l) + ".";
    out.push_back({prefix + "weight", head_[l].weight});
    out.push_back({prefix + "bias", head_[l].bias});
  }
  return out;
}

ag::ParameterList DetectorModel::parameters() const {
  ag::ParameterList out = encoder_parameters();
  for (auto& p : head_parameters()) out.push_back(std::move(p));
  return out;
}

void DetectorModel::set_trainable(bool trainable) {
  for (const auto& p : parameters()) p.var.node()->requires_grad = trainable;
}

int predicted_label(const Matrix& scores, Eigen::Index row) { return scores(row, 1) > scores(row, 0) ? 1 : 0; }

std::vector<int> predicted_labels(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) out[static_cast<std::size_t>(i)] = predicted_label(scores, i);
  return out;
}

double macro_f1(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw InputError("macro_f1: length mismatch");
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == c;
      const bool t = truth[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const double denom = 2 * tp + fp + fn;
    total += denom > 0 ? 2 * tp / denom : 0.0;
  }
  return total / 2.0;
}

namespace {

Matrix full_forward(const DetectorModel& model, const AttributedGraph& graph, bool scores) {
  if (graph.attr_dim() != model.input_dim()) {
    throw InputError("detector expects " + std::to_string(model.input_dim()) + " attributes, graph has " +
                     std::to_string(graph.attr_dim()));
  }
  ag::NoGradGuard guard;
  const PropagationGraph pg = PropagationGraph::from_graph(graph);
  ag::Var h = model.encode(pg, ag::constant(graph.attributes()));
  return scores ? model.head(h).value() : h.value();
}

Matrix gather(const Matrix& all, const AttributedGraph& graph, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), all.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    graph.check_node(nodes[i]);
    out.row(static_cast<Eigen::Index>(i)) = all.row(nodes[i]);
  }
  return out;
}

std::vector<int> labels_of(const AttributedGraph& graph, std::span<const NodeId> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) out.push_back(graph.label(v));
  return out;
}

}  // namespace

Matrix predict_scores(const DetectorModel& model, const AttributedGraph& graph, std::span<const NodeId> nodes) {
  return gather(full_forward(model, graph, true), graph, nodes);
}

Matrix encode_nodes(const DetectorModel& model, const AttributedGraph& graph, std::span<const NodeId> nodes) {
  return gather(full_forward(model, graph, false), graph, nodes);
}

DetectorModel train_detector(const DatasetBundle& bundle, const DetectorConfig& config) {
  validate(config);
  const AttributedGraph& g = bundle.graph;
  DetectorModel model(config, g.attr_dim());

  const std::vector<int> train_labels = labels_of(g, bundle.train_nodes);
  const std::vector<int> val_labels = labels_of(g, bundle.val_nodes);
  std::array<double, 2> counts{0, 0};
  for (int y : train_labels) counts[static_cast<std::size_t>(y)] += 1;
  if (counts[0] == 0 || counts[1] == 0) throw TrainingError("training split contains a single class");
  if (std::count(val_labels.begin(), val_labels.end(), 1) == 0 || std::count(val_labels.begin(), val_labels.end(), 0) == 0) {
    throw TrainingError("validation split contains a single class");
  }
  std::array<double, 2> weights{1.0, 1.0};
  if (config.class_weighting) {
    const double n = counts[0] + counts[1];
    weights = {n / (2.0 * counts[0]), n / (2.0 * counts[1])};
  }

  const PropagationGraph pg = PropagationGraph::from_graph(g);
  const ag::Var x = ag::constant(g.attributes());
  std::vector<Eigen::Index> train_rows(bundle.train_nodes.begin(), bundle.train_nodes.end());
  ag::ParameterList params = model.parameters();
  ag::Adam optimizer(params, config.learning_rate, config.weight_decay);

  double best_f1 = -1.0;
  int best_epoch = 0;
  std::vector<Matrix> best = ag::snapshot(params);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    optimizer.zero_grad();
    ag::Var logits = ag::gather_rows(model.head(model.encode(pg, x)), train_rows);
    ag::Var loss = ag::weighted_cross_entropy(logits, train_labels, weights);
    ag::backward(loss);
    optimizer.step();

    if (epoch % config.validate_every == 0 || epoch == config.max_epochs) {
      const Matrix scores = predict_scores(model, g, bundle.val_nodes);
      const double f1 = macro_f1(predicted_labels(scores), val_labels);
      model.training_log.push_back({epoch, loss.scalar(), f1});
      if (f1 > best_f1) {
        best_f1 = f1;
        best_epoch = epoch;
        best = ag::snapshot(params);
      } else if (epoch - best_epoch >= config.patience) {
        break;
      }
    }
  }
  ag::restore(params, best);
  return model;
}

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  json log = json::array();
  for (const auto& r : model.training_log) log.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_macro_f1", r.val_macro_f1}});
  json body = {{"config", to_json(model.config())},
               {"input_dim", model.input_dim()},
               {"parameters", parameters_to_json(model.parameters())},
               {"training_log", std::move(log)}};
  write_checkpoint(path, "GFDET1", body);
}

DetectorModel load_detector(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  const json body = read_checkpoint(path, "GFDET1");
  try {
    DetectorModel model(detector_config_from_json(body.at("config")), body.at("input_dim").get<std::size_t>());
    parameters_from_json(body.at("parameters"), model.parameters(), name);
    for (const json& r : body.at("training_log")) {
      model.training_log.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(), r.at("val_macro_f1").get<double>()});
    }
    return model;
  } catch (const json::exception& e) {
    throw LoadError(name, 0, std::string("malformed detector checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(name, 0, e.what());
  }
}

}  // namespace gangforge
