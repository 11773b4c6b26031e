#pragma once

#include <cstdint>
#include <vector>

#include "dmin/config.hpp"
#include "dmin/dataset.hpp"
#include "dmin/model.hpp"
#include "dmin/optimizer.hpp"

namespace dmin {

// Independent RNG streams derived from TrainConfig::seed.
enum class Stream : std::uint64_t { ModelInit = 1, Batches = 2, MetaEpisodes = 3, EvalEpisodes = 4, Split = 5 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

// Fresh model for a base dataset; checks that the data matches the encoder.
Model initial_model(const TrainConfig& cfg, const Dataset& base);
void check_compatible(const ModelConfig& cfg, const Dataset& data);

struct PretrainResult {
  Model model;
  std::vector<double> losses;  // one per step, before the update
  double train_accuracy = 0.0;
};

// Supervised stage: minimises the base-class cross-entropy with Adam over the
// encoder, W_base and log tau.
PretrainResult pretrain(const Dataset& base, const TrainConfig& cfg);
PretrainResult pretrain(Model model, const Dataset& base, const TrainConfig& cfg);

// Fraction of items whose argmax base score is their label.
double base_accuracy(const Model& model, const Dataset& base);

struct MetaTrainResult {
  Model model;
  std::vector<double> losses;  // one per episode, before the update
};

// Meta stage: one Adam step on the episode loss per sampled episode.
MetaTrainResult meta_train(const Model& start, const Dataset& data, const TrainConfig& cfg);

// One optimiser step on `episode`; returns the loss before the step.
double meta_step(Model& model, Adam& adam, const Dataset& data, const Episode& episode, const TrainableSet& trainable);

// Forward-only episode loss.
double episode_loss(const Model& model, const Dataset& data, const Episode& episode);

TrainableSet meta_trainable(const TrainConfig& cfg);

struct Splits {
  Dataset base;
  Dataset meta;  // meta-training episodes
  Dataset test;  // evaluation episodes; classes disjoint from base and meta
};

// base/novel split with cfg.num_base, then routes the novel classes per
// cfg.stage2.source.
Splits make_splits(const Dataset& full, const TrainConfig& cfg);

}  // namespace dmin
