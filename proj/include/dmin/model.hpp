#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmin/classifier.hpp"
#include "dmin/config.hpp"
#include "dmin/dataset.hpp"
#include "dmin/encoder.hpp"
#include "dmin/episodes.hpp"
#include "dmin/routing.hpp"

namespace dmin {

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t base_classes = 0;
  RoutingConfig dmm;
  RoutingConfig qim;
  bool share_routing = false;
  Ablation ablation = Ablation::Full;

  static ModelConfig from_train(const TrainConfig& cfg, std::size_t base_classes);
  std::size_t dim() const { return encoder.embed_dim; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct NamedTensor {
  std::string name;
  Tensor* value;
};

// Everything needed to score an episode: encoder, cosine classifier (whose
// rows are the routing memory) and the two routing parameter sets.
struct Model {
  ModelConfig config;
  Encoder encoder{EncoderConfig{}};
  CosineClassifier classifier;
  RoutingParams dmm;
  RoutingParams qim;  // empty when config.share_routing
  int trained_stages = 0;

  static Model init(const ModelConfig& config, std::uint64_t seed);

  // Trainable tensors in a fixed order with stable names.
  std::vector<NamedTensor> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  // FNV-1a over every parameter's bytes.
  std::uint64_t parameter_hash() const;
  // Throws ShapeError if a tensor does not match the config.
  void validate() const;
};

struct TrainableSet {
  bool encoder = true;
  bool classifier_rows = true;
  bool tau = true;
  bool routing = true;

  static TrainableSet none() { return {false, false, false, false}; }
};

// A model recorded on a tape. `targets`/`target_vars` pair each trainable
// tensor with its leaf so gradients can be written back.
struct ModelVars {
  Var projection;
  Var w_base;
  Var log_tau;
  RoutingVars dmm;
  RoutingVars qim;
  std::vector<Tensor*> targets;
  std::vector<Var> target_vars;

  const RoutingVars& qim_vars(const ModelConfig& cfg) const { return cfg.share_routing ? dmm : qim; }
};

ModelVars record_model(Tape& tape, Model& model, const TrainableSet& trainable);
ModelVars record_model(Tape& tape, const Model& model);

struct EpisodeScores {
  std::vector<Var> scores;          // one score vector over the C classes per query
  std::vector<std::size_t> labels;  // episode-local query labels
};

// Full forward pass for one episode: encode, adapt supports with the DMM,
// induce a class vector per (query, class) with the QIM, cosine-score.
// Ablations replace the DMM with the identity and/or the QIM with the mean
// of the adapted supports.
EpisodeScores score_episode(Tape& tape, const Model& model, const ModelVars& vars, const Dataset& data,
                            const Episode& episode);

// Rescales the routing transforms to the current memory: the DMM against the
// rows of W_base, the QIM against DMM outputs for those rows.
void calibrate_routing(Model& model);

// DMM-adapted vectors e' for already encoded samples, whatever the ablation.
std::vector<Tensor> apply_dmm(const Model& model, std::span<const Tensor> samples);

}  // namespace dmin
