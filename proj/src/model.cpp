#include "dmin/model.hpp"

#include <cstring>

#include "dmin/errors.hpp"
#include "dmin/hash.hpp"
#include "dmin/rng.hpp"

namespace dmin {

using nlohmann::json;

ModelConfig ModelConfig::from_train(const TrainConfig& cfg, std::size_t base_classes) {
  ModelConfig m;
  m.encoder = cfg.encoder;
  m.base_classes = base_classes;
  m.dmm = cfg.routing.dmm;
  m.qim = cfg.routing.qim;
  m.share_routing = cfg.routing.share_params;
  m.ablation = cfg.ablation;
  m.validate();
  return m;
}

void ModelConfig::validate() const {
  encoder.validate();
  dmm.validate();
  qim.validate();
  if (base_classes < 1) throw ConfigError("model: need at least one base class");
  for (const auto* r : {&dmm, &qim}) {
    if (r->input_dim != dim() || r->output_dim() != dim()) {
      throw ConfigError("model: routing maps " + std::to_string(r->input_dim) + " -> " +
                        std::to_string(r->output_dim()) + ", both must equal d=" + std::to_string(dim()));
    }
  }
  if (share_routing && !(dmm.capsule_count == qim.capsule_count && dmm.capsule_dim == qim.capsule_dim)) {
    throw ConfigError("model: shared routing needs identical capsule shapes");
  }
}

json to_json(const ModelConfig& cfg) {
  return {{"encoder", to_json(cfg.encoder)},  {"base_classes", cfg.base_classes},
          {"dmm", to_json(cfg.dmm)},          {"qim", to_json(cfg.qim)},
          {"share_routing", cfg.share_routing}, {"ablation", to_string(cfg.ablation)}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig m;
    m.encoder = encoder_from_json(j.at("encoder"));
    m.base_classes = j.at("base_classes").get<std::size_t>();
    m.dmm = routing_from_json(j.at("dmm"));
    m.qim = routing_from_json(j.at("qim"));
    m.share_routing = j.at("share_routing").get<bool>();
    m.ablation = parse_ablation(j.at("ablation").get<std::string>());
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m;
  m.config = config;
  m.encoder = Encoder::random(config.encoder, rng);
  m.classifier = CosineClassifier::init(config.base_classes, config.dim(), rng);
  m.dmm = RoutingParams::init(config.dmm, rng);
  if (!config.share_routing) m.qim = RoutingParams::init(config.qim, rng);
  calibrate_routing(m);
  return m;
}

std::vector<NamedTensor> Model::parameters() {
  std::vector<NamedTensor> out;
  if (encoder.trainable()) out.push_back({"encoder.projection", &encoder.projection()});
  out.push_back({"classifier.w_base", &classifier.w_base});
  out.push_back({"classifier.log_tau", &classifier.log_tau});
  for (std::size_t j = 0; j < dmm.weights.size(); ++j) {
    out.push_back({"dmm.W" + std::to_string(j), &dmm.weights[j]});
    out.push_back({"dmm.b" + std::to_string(j), &dmm.biases[j]});
  }
  for (std::size_t j = 0; j < qim.weights.size(); ++j) {
    out.push_back({"qim.W" + std::to_string(j), &qim.weights[j]});
    out.push_back({"qim.b" + std::to_string(j), &qim.biases[j]});
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& p : const_cast<Model*>(this)->parameters()) out.emplace_back(p.name, p.value);
  return out;
}

std::uint64_t Model::parameter_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : parameters()) {
    h = fnv1a64(name, h);
    const auto bytes = std::as_bytes(t->data());
    h = fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), h);
  }
  return h;
}

void Model::validate() const {
  config.validate();
  if (encoder.config() != config.encoder) throw ShapeError("model: encoder config differs from model config");
  if (encoder.trainable()) {
    const Tensor& p = encoder.projection();
    if (p.rank() != 2 || p.rows() != config.dim() || p.cols() != config.encoder.vocab_buckets) {
      throw ShapeError("model: encoder projection has shape " + p.shape_string());
    }
  }
  const Tensor& w = classifier.w_base;
  if (w.rank() != 2 || w.rows() != config.base_classes || w.cols() != config.dim()) {
    throw ShapeError("model: W_base has shape " + w.shape_string() + ", expected [" +
                     std::to_string(config.base_classes) + "x" + std::to_string(config.dim()) + "]");
  }
  if (!classifier.log_tau.is_scalar()) throw ShapeError("model: log_tau must be a scalar");
  dmm.validate(config.dmm);
  if (!config.share_routing) qim.validate(config.qim);
}

namespace {

ModelVars record_impl(Tape& tape, Model* mutable_model, const Model& model, const TrainableSet& t) {
  ModelVars v;
  auto track = [&](Var var, Tensor* target, bool trainable) {
    if (trainable && mutable_model) {
      v.targets.push_back(target);
      v.target_vars.push_back(var);
    }
    return var;
  };
  Model* m = mutable_model;
  if (model.encoder.trainable()) {
    const bool on = t.encoder && m;
    v.projection = track(tape.leaf(model.encoder.projection(), on), on ? &m->encoder.projection() : nullptr, on);
  }
  const bool rows = t.classifier_rows && m;
  v.w_base = track(tape.leaf(model.classifier.w_base, rows), rows ? &m->classifier.w_base : nullptr, rows);
  const bool tau = t.tau && m;
  v.log_tau = track(tape.leaf(model.classifier.log_tau, tau), tau ? &m->classifier.log_tau : nullptr, tau);
  const bool routing = t.routing && m;
  auto record_routing = [&](const RoutingParams& params, RoutingParams* target) {
    RoutingVars rv;
    for (std::size_t j = 0; j < params.weights.size(); ++j) {
      rv.weights.push_back(
          track(tape.leaf(params.weights[j], routing), routing ? &target->weights[j] : nullptr, routing));
      rv.biases.push_back(
          track(tape.leaf(params.biases[j], routing), routing ? &target->biases[j] : nullptr, routing));
    }
    return rv;
  };
  v.dmm = record_routing(model.dmm, m ? &m->dmm : nullptr);
  v.qim = record_routing(model.qim, m ? &m->qim : nullptr);
  return v;
}

}  // namespace

ModelVars record_model(Tape& tape, Model& model, const TrainableSet& trainable) {
  return record_impl(tape, &model, model, trainable);
}

ModelVars record_model(Tape& tape, const Model& model) {
  return record_impl(tape, nullptr, model, TrainableSet::none());
}

EpisodeScores score_episode(Tape& tape, const Model& model, const ModelVars& vars, const Dataset& data,
                            const Episode& episode) {
  const ModelConfig& cfg = model.config;
  const std::size_t C = episode.way;
  const std::size_t K = episode.shot;

  auto encode = [&](const EpisodeItem& it) { return model.encoder.encode(tape, vars.projection, data.item(it.source).payload); };

  std::vector<Var> adapted;
  adapted.reserve(episode.support.size());
  if (uses_dmm(cfg.ablation)) {
    const MemoryCapsules base_memory = transform_memory_rows(vars.dmm, cfg.dmm, vars.w_base);
    for (const auto& it : episode.support) adapted.push_back(dmm_adapt(vars.dmm, cfg.dmm, base_memory, encode(it)));
  } else {
    for (const auto& it : episode.support) adapted.push_back(encode(it));
  }

  std::vector<Var> queries;
  queries.reserve(episode.query.size());
  for (const auto& it : episode.query) queries.push_back(encode(it));

  EpisodeScores out;
  out.scores.reserve(queries.size());
  if (uses_qim(cfg.ablation)) {
    const RoutingVars& qv = vars.qim_vars(cfg);
    std::vector<MemoryCapsules> class_memory;
    class_memory.reserve(C);
    for (std::size_t c = 0; c < C; ++c) {
      std::span<const Var> supports(adapted.data() + c * K, K);
      class_memory.push_back(transform_memory(qv, cfg.qim, supports));
    }
    for (Var q : queries) {
      std::vector<Var> class_vectors(C);
      for (std::size_t c = 0; c < C; ++c) class_vectors[c] = qim_induce(qv, cfg.qim, class_memory[c], q);
      out.scores.push_back(few_scores(vars.log_tau, q, class_vectors));
    }
  } else {
    std::vector<Var> class_vectors(C);
    for (std::size_t c = 0; c < C; ++c) class_vectors[c] = mean(std::span<const Var>(adapted.data() + c * K, K));
    for (Var q : queries) out.scores.push_back(few_scores(vars.log_tau, q, class_vectors));
  }
  for (const auto& it : episode.query) out.labels.push_back(it.label);
  return out;
}

std::vector<Tensor> apply_dmm(const Model& model, std::span<const Tensor> samples) {
  Tape tape;
  const ModelVars vars = record_model(tape, model);
  const MemoryCapsules base_memory = transform_memory_rows(vars.dmm, model.config.dmm, vars.w_base);
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const auto& e : samples) out.push_back(dmm_adapt(vars.dmm, model.config.dmm, base_memory, tape.constant(e)).value());
  return out;
}

void calibrate_routing(Model& model) {
  const Tensor& w = model.classifier.w_base;
  std::vector<Tensor> rows;
  rows.reserve(w.rows());
  for (std::size_t k = 0; k < w.rows(); ++k) rows.push_back(Tensor::vector({w.row(k).begin(), w.row(k).end()}));
  model.dmm.scale_to_memory(rows);
  if (model.config.share_routing) return;
  model.qim.scale_to_memory(apply_dmm(model, rows));
}

}  // namespace dmin
