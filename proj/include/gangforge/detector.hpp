#pragma once

#include "gangforge/autograd.hpp"
#include "gangforge/dataset.hpp"
#include "gangforge/propagation.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <vector>

namespace gangforge {

enum class Architecture { gcn, sage };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view text);

struct DetectorConfig {
  Architecture architecture = Architecture::gcn;
  int num_layers = 2;
  int hidden_dim = 64;
  int head_layers = 2;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 1000;
  int validate_every = 10;
  int patience = 100;
  bool class_weighting = true;
  std::uint64_t seed = 0;
};

void validate(const DetectorConfig& config);
nlohmann::json to_json(const DetectorConfig& config);
/// Unknown keys are rejected; absent keys keep their defaults.
DetectorConfig detector_config_from_json(const nlohmann::json& j);

struct ValidationRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
};

/// GNN encoder (num_layers message-passing layers, ReLU after each) followed
/// by an MLP head with head_layers linear layers ending in two logits.
class DetectorModel {
 public:
  DetectorModel() = default;
  /// Glorot weights and zero biases drawn from config.seed.
  DetectorModel(DetectorConfig config, std::size_t input_dim);

  // Copies are deep: parameters are never shared between two models.
  DetectorModel(const DetectorModel& other);
  DetectorModel& operator=(const DetectorModel& other);
  DetectorModel(DetectorModel&&) noexcept = default;
  DetectorModel& operator=(DetectorModel&&) noexcept = default;

  const DetectorConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }

  /// Differentiable forward passes on an arbitrary propagation structure.
  ag::Var encode(const PropagationGraph& graph, const ag::Var& features) const;
  ag::Var head(const ag::Var& representations) const;

  ag::ParameterList parameters() const;
  ag::ParameterList encoder_parameters() const;
  ag::ParameterList head_parameters() const;

  /// Freezing turns off requires_grad on every parameter.
  void set_trainable(bool trainable);

  std::vector<ValidationRecord> training_log;

 private:
  struct Layer {
    ag::Var weight;
    ag::Var bias;
    ag::Var neighbor_weight;  // sage only
  };

  DetectorConfig config_;
  std::size_t input_dim_ = 0;
  std::vector<Layer> encoder_;
  std::vector<Layer> head_;
};

/// Trains with class-weighted cross entropy on the train split; validates
/// every validate_every epochs and keeps the parameters with the best
/// validation macro-F1. Throws TrainingError for single-class train or
/// validation data.
DetectorModel train_detector(const DatasetBundle& bundle, const DetectorConfig& config);

/// Raw two-class scores (rows follow `nodes`). Throws InputError on an
/// attribute-dimension mismatch or an invalid node.
Matrix predict_scores(const DetectorModel& model, const AttributedGraph& graph, std::span<const NodeId> nodes);
/// Encoder output before the head, |nodes| x hidden_dim.
Matrix encode_nodes(const DetectorModel& model, const AttributedGraph& graph, std::span<const NodeId> nodes);

/// argmax with ties toward class 0.
int predicted_label(const Matrix& scores, Eigen::Index row);
std::vector<int> predicted_labels(const Matrix& scores);

/// Mean of the per-class F1 over classes {0, 1}; a class with no support and
/// no predictions contributes 0.
double macro_f1(std::span<const int> predicted, std::span<const int> truth);

void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace gangforge
