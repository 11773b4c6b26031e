#include "dmin/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dmin/errors.hpp"
#include "dmin/rng.hpp"

namespace dmin {

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

void check_compatible(const ModelConfig& cfg, const Dataset& data) {
  if (cfg.encoder.kind == EncoderKind::FeatureHash && !data.is_text()) {
    throw DataError("feature_hash encoder needs a text (TSV) dataset");
  }
  if (cfg.encoder.kind == EncoderKind::Precomputed && data.is_vectors() && data.vector_dim() != cfg.dim()) {
    throw ShapeError("dataset vectors have d=" + std::to_string(data.vector_dim()) + " but the model expects d=" +
                     std::to_string(cfg.dim()));
  }
}

Model initial_model(const TrainConfig& cfg, const Dataset& base) {
  cfg.validate();
  base.validate();
  ModelConfig mc = ModelConfig::from_train(cfg, base.num_classes());
  check_compatible(mc, base);
  return Model::init(mc, stream_seed(cfg.seed, Stream::ModelInit));
}

namespace {

void apply_gradients(Adam& adam, const ModelVars& vars, const Gradients& grads) {
  std::vector<Tensor> g;
  g.reserve(vars.target_vars.size());
  for (Var v : vars.target_vars) g.push_back(grads.of(v));
  adam.step(vars.targets, g);
}

double checked_loss(Var loss, const char* stage, std::size_t step) {
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    throw NumericError(std::string(stage) + ": loss diverged at step " + std::to_string(step));
  }
  return value;
}

}  // namespace

PretrainResult pretrain(const Dataset& base, const TrainConfig& cfg) {
  return pretrain(initial_model(cfg, base), base, cfg);
}

PretrainResult pretrain(Model model, const Dataset& base, const TrainConfig& cfg) {
  base.validate();
  check_compatible(model.config, base);
  if (base.num_classes() != model.config.base_classes) {
    throw DataError("pretrain: dataset has " + std::to_string(base.num_classes()) + " classes, model has C_base=" +
                    std::to_string(model.config.base_classes));
  }
  PretrainResult result;
  Adam adam({cfg.stage1.learning_rate});
  const TrainableSet trainable{true, true, true, false};
  Rng rng(stream_seed(cfg.seed, Stream::Batches));
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  for (std::size_t step = 0; step < cfg.stage1.steps; ++step) {
    Tape tape;
    const ModelVars vars = record_model(tape, model, trainable);
    std::vector<Var> losses;
    losses.reserve(cfg.stage1.batch_size);
    for (std::size_t b = 0; b < cfg.stage1.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const Item& item = base.item(order[cursor++]);
      Var e = model.encoder.encode(tape, vars.projection, item.payload);
      losses.push_back(loss_supervised(base_scores(vars.w_base, vars.log_tau, e), item.label));
    }
    Var loss = mean(losses);
    result.losses.push_back(checked_loss(loss, "pretrain", step));
    apply_gradients(adam, vars, tape.backward(loss));
  }
  result.train_accuracy = base_accuracy(model, base);
  if (cfg.stage1.steps > 0) model.trained_stages = std::max(model.trained_stages, 1);
  result.model = std::move(model);
  return result;
}

double base_accuracy(const Model& model, const Dataset& base) {
  if (base.size() == 0) return 0.0;
  Tape tape;
  const ModelVars vars = record_model(tape, model);
  std::size_t correct = 0;
  for (const Item& item : base.items()) {
    Var s = base_scores(vars.w_base, vars.log_tau, model.encoder.encode(tape, vars.projection, item.payload));
    const auto& v = s.value();
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (v[k] > v[best]) best = k;
    }
    if (best == item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(base.size());
}

TrainableSet meta_trainable(const TrainConfig& cfg) { return {true, true, cfg.stage2.train_tau, true}; }

double meta_step(Model& model, Adam& adam, const Dataset& data, const Episode& episode, const TrainableSet& trainable) {
  Tape tape;
  const ModelVars vars = record_model(tape, model, trainable);
  const EpisodeScores scores = score_episode(tape, model, vars, data, episode);
  Var loss = loss_episode(scores.scores, scores.labels);
  const double value = checked_loss(loss, "meta_train", adam.steps());
  apply_gradients(adam, vars, tape.backward(loss));
  return value;
}

double episode_loss(const Model& model, const Dataset& data, const Episode& episode) {
  Tape tape;
  const ModelVars vars = record_model(tape, model);
  const EpisodeScores scores = score_episode(tape, model, vars, data, episode);
  return loss_episode(scores.scores, scores.labels).value().item();
}

MetaTrainResult meta_train(const Model& start, const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  check_compatible(start.config, data);
  MetaTrainResult result{start, {}};
  Model& model = result.model;
  model.config.ablation = cfg.ablation;
  model.config.dmm.iterations = cfg.routing.dmm.iterations;
  model.config.qim.iterations = cfg.routing.qim.iterations;
  // Stage 1 moves W_base, so a model that has not been meta-trained yet gets
  // its routing transforms rescaled to the trained memory.
  if (model.trained_stages < 2) calibrate_routing(model);

  const EpisodeConfig ep_cfg{cfg.stage2.C, cfg.stage2.K, cfg.stage2.L, stream_seed(cfg.seed, Stream::MetaEpisodes)};
  ep_cfg.validate();
  Adam adam({cfg.stage2.learning_rate});
  const TrainableSet trainable = meta_trainable(cfg);
  for (std::size_t i = 0; i < cfg.stage2.episodes; ++i) {
    const Episode ep = sample_episode(data, ep_cfg, i);
    result.losses.push_back(meta_step(model, adam, data, ep, trainable));
  }
  if (cfg.stage2.episodes > 0) model.trained_stages = 2;
  return result;
}

Splits make_splits(const Dataset& full, const TrainConfig& cfg) {
  BaseNovelSplit split = split_base_novel(full, cfg.num_base, stream_seed(cfg.seed, Stream::Split));
  if (cfg.stage2.source == MetaSource::Base) {
    Dataset meta = split.base;
    return {std::move(split.base), std::move(meta), std::move(split.novel)};
  }
  const std::size_t n = split.novel.num_classes();
  if (n < 2) throw ConfigError("novel_train source needs at least 2 novel classes");
  std::vector<std::size_t> first(n / 2), second(n - n / 2);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), n / 2);
  return {std::move(split.base), select_classes(split.novel, first), select_classes(split.novel, second)};
}

}  // namespace dmin
