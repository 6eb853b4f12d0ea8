#include "gangforge/transformer.hpp"

#include "gangforge/errors.hpp"

#include <cmath>

namespace gangforge {

TransformerEncoder::TransformerEncoder(const TransformerConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.layers < 0) throw ConfigError("transformer layers must be >= 0");
  if (config.heads < 1 || config.model_dim < 1 || config.model_dim % config.heads != 0) {
    throw ConfigError("model dimension must be a positive multiple of the head count");
  }
  if (config.ffn_dim < 1) throw ConfigError("ffn_dim must be >= 1");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  const auto d = static_cast<Eigen::Index>(config.model_dim);
  const auto f = static_cast<Eigen::Index>(config.ffn_dim);
  auto zeros = [](Eigen::Index n) { return ag::parameter(Matrix::Zero(1, n)); };
  auto ones = [](Eigen::Index n) { return ag::parameter(Matrix::Ones(1, n)); };
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.wq = ag::parameter(ag::glorot(d, d, rng));
    layer.wk = ag::parameter(ag::glorot(d, d, rng));
    layer.wv = ag::parameter(ag::glorot(d, d, rng));
    layer.wo = ag::parameter(ag::glorot(d, d, rng));
    layer.bq = zeros(d);
    layer.bk = zeros(d);
    layer.bv = zeros(d);
    layer.bo = zeros(d);
    layer.ln1_gain = ones(d);
    layer.ln1_bias = zeros(d);
    layer.w1 = ag::parameter(ag::glorot(d, f, rng));
    layer.b1 = zeros(f);
    layer.w2 = ag::parameter(ag::glorot(f, d, rng));
    layer.b2 = zeros(d);
    layer.ln2_gain = ones(d);
    layer.ln2_bias = zeros(d);
    layers_.push_back(std::move(layer));
  }
}

ag::Var TransformerEncoder::forward(const ag::Var& x, const Mask* allowed, std::mt19937_64* dropout_rng,
                                    AttentionMaps* maps) const {
  const auto d = static_cast<Eigen::Index>(config_.model_dim);
  if (x.cols() != d) throw InputError("transformer input width differs from model_dim");
  if (allowed && (allowed->rows() != x.rows() || allowed->cols() != x.rows())) {
    throw InputError("attention mask must be M x M");
  }
  if (maps) maps->clear();
  const Eigen::Index dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double p = dropout_rng ? config_.dropout : 0.0;
  auto drop = [&](const ag::Var& v) { return p > 0.0 ? ag::dropout(v, p, *dropout_rng) : v; };

  ag::Var h = x;
  for (const Layer& layer : layers_) {
    ag::Var q = ag::add_row(ag::matmul(h, layer.wq), layer.bq);
    ag::Var k = ag::add_row(ag::matmul(h, layer.wk), layer.bk);
    ag::Var v = ag::add_row(ag::matmul(h, layer.wv), layer.bv);
    std::vector<ag::Var> heads;
    if (maps) maps->emplace_back();
    for (int head = 0; head < config_.heads; ++head) {
      const Eigen::Index start = head * dh;
      ag::Var scores = ag::scale(ag::matmul_nt(ag::slice_cols(q, start, dh), ag::slice_cols(k, start, dh)), scale);
      ag::Var attn = ag::softmax_rows(scores, allowed);
      if (maps) maps->back().push_back(attn.value());
      heads.push_back(ag::matmul(drop(attn), ag::slice_cols(v, start, dh)));
    }
    ag::Var attended = ag::add_row(ag::matmul(ag::concat_cols(heads), layer.wo), layer.bo);
    h = ag::layer_norm(ag::add(h, drop(attended)), layer.ln1_gain, layer.ln1_bias);
    ag::Var inner = drop(ag::relu(ag::add_row(ag::matmul(h, layer.w1), layer.b1)));
    ag::Var ffn = ag::add_row(ag::matmul(inner, layer.w2), layer.b2);
    h = ag::layer_norm(ag::add(h, drop(ffn)), layer.ln2_gain, layer.ln2_bias);
  }
  return h;
}

ag::ParameterList TransformerEncoder::parameters(const std::string& prefix) const {
  ag::ParameterList out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const std::string p = prefix + std::to_string(l) + ".";
    for (const auto& [name, var] : std::initializer_list<std::pair<const char*, const ag::Var&>>{
             {"wq", L.wq}, {"bq", L.bq}, {"wk", L.wk}, {"bk", L.bk}, {"wv", L.wv}, {"bv", L.bv},
             {"wo", L.wo}, {"bo", L.bo}, {"ln1_gain", L.ln1_gain}, {"ln1_bias", L.ln1_bias},
             {"w1", L.w1}, {"b1", L.b1}, {"w2", L.w2}, {"b2", L.b2}, {"ln2_gain", L.ln2_gain},
             {"ln2_bias", L.ln2_bias}}) {
      out.push_back({p + name, var});
    }
  }
  return out;
}

}  // namespace gangforge
