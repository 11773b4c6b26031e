#include "dmin/config.hpp"

#include <fstream>
#include <set>

#include "dmin/errors.hpp"

namespace dmin {

using nlohmann::json;

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoDmm: return "no_dmm";
    case Ablation::NoQim: return "no_qim";
    case Ablation::NoDmmNoQim: return "no_dmm_no_qim";
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  if (name == "full") return Ablation::Full;
  if (name == "no_dmm") return Ablation::NoDmm;
  if (name == "no_qim") return Ablation::NoQim;
  if (name == "no_dmm_no_qim") return Ablation::NoDmmNoQim;
  throw ConfigError("unknown ablation '" + std::string(name) + "' (full, no_dmm, no_qim, no_dmm_no_qim)");
}

const char* to_string(MetaSource s) { return s == MetaSource::Base ? "base" : "novel_train"; }

MetaSource parse_meta_source(std::string_view name) {
  if (name == "base") return MetaSource::Base;
  if (name == "novel_train") return MetaSource::NovelTrain;
  throw ConfigError("unknown stage2 source '" + std::string(name) + "' (base, novel_train)");
}

std::size_t protocol_episodes(EvalProtocol p) { return p == EvalProtocol::MiniRcv1 ? 100 : 300; }

EvalProtocol parse_protocol(std::string_view name) {
  if (name == "minircv1") return EvalProtocol::MiniRcv1;
  if (name == "odic") return EvalProtocol::Odic;
  throw ConfigError("unknown protocol '" + std::string(name) + "' (minircv1, odic)");
}

TrainConfig::TrainConfig() {
  encoder.kind = EncoderKind::Precomputed;
  encoder.embed_dim = 32;
  routing.dmm = RoutingConfig{3, 4, 8, 32};
  routing.qim = RoutingConfig{3, 4, 8, 32};
}

void TrainConfig::sync_dims() {
  routing.dmm.input_dim = encoder.embed_dim;
  routing.qim.input_dim = encoder.embed_dim;
}

void TrainConfig::validate() const {
  encoder.validate();
  routing.dmm.validate();
  routing.qim.validate();
  const std::size_t d = encoder.embed_dim;
  for (const auto* r : {&routing.dmm, &routing.qim}) {
    if (r->output_dim() != d) {
      throw ConfigError("routing: capsule_count * capsule_dim = " + std::to_string(r->output_dim()) +
                        " must equal embed_dim d = " + std::to_string(d));
    }
    if (r->input_dim != d) throw ConfigError("routing: input_dim must equal embed_dim");
  }
  if (routing.share_params && (routing.dmm.capsule_count != routing.qim.capsule_count ||
                                routing.dmm.capsule_dim != routing.qim.capsule_dim)) {
    throw ConfigError("routing: share_params needs identical dmm and qim capsule shapes");
  }
  if (stage1.batch_size < 1) throw ConfigError("stage1.batch_size must be positive");
  if (!(stage1.learning_rate > 0.0)) throw ConfigError("stage1.learning_rate must be positive");
  if (!(stage2.learning_rate > 0.0)) throw ConfigError("stage2.learning_rate must be positive");
  if (stage2.C < 2 || stage2.K < 1 || stage2.L < 1) throw ConfigError("stage2: need C >= 2, K >= 1, L >= 1");
  if (eval.episodes < 1 || eval.queries_per_class < 1 || eval.way < 2 || eval.shot < 1) {
    throw ConfigError("eval: episodes, queries_per_class and shot must be positive, way >= 2");
  }
  if (num_base < 1) throw ConfigError("num_base must be positive");
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::size_t read_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

json to_json(const RoutingConfig& cfg) {
  return {{"iterations", cfg.iterations},
          {"capsule_count", cfg.capsule_count},
          {"capsule_dim", cfg.capsule_dim},
          {"input_dim", cfg.input_dim}};
}

RoutingConfig routing_from_json(const json& j, RoutingConfig d) {
  reject_unknown(j, {"iterations", "capsule_count", "capsule_dim", "input_dim"}, "routing");
  d.iterations = read_count(j, "iterations", d.iterations, "routing");
  d.capsule_count = read_count(j, "capsule_count", d.capsule_count, "routing");
  d.capsule_dim = read_count(j, "capsule_dim", d.capsule_dim, "routing");
  d.input_dim = read_count(j, "input_dim", d.input_dim, "routing");
  return d;
}

json to_json(const EncoderConfig& cfg) {
  return {{"kind", to_string(cfg.kind)}, {"vocab_buckets", cfg.vocab_buckets}, {"embed_dim", cfg.embed_dim}};
}

EncoderConfig encoder_from_json(const json& j, EncoderConfig d) {
  reject_unknown(j, {"kind", "vocab_buckets", "embed_dim"}, "encoder");
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind, "encoder");
    d.kind = parse_encoder_kind(kind);
  }
  d.vocab_buckets = read_count(j, "vocab_buckets", d.vocab_buckets, "encoder");
  d.embed_dim = read_count(j, "embed_dim", d.embed_dim, "encoder");
  return d;
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["ablation"] = to_string(cfg.ablation);
  j["num_base"] = cfg.num_base;
  j["encoder"] = to_json(cfg.encoder);
  j["routing"] = {{"dmm", to_json(cfg.routing.dmm)},
                  {"qim", to_json(cfg.routing.qim)},
                  {"share_params", cfg.routing.share_params}};
  j["stage1"] = {{"steps", cfg.stage1.steps},
                 {"batch_size", cfg.stage1.batch_size},
                 {"learning_rate", cfg.stage1.learning_rate}};
  j["stage2"] = {{"episodes", cfg.stage2.episodes}, {"learning_rate", cfg.stage2.learning_rate},
                 {"C", cfg.stage2.C},               {"K", cfg.stage2.K},
                 {"L", cfg.stage2.L},               {"train_tau", cfg.stage2.train_tau},
                 {"source", to_string(cfg.stage2.source)}};
  j["eval"] = {{"episodes", cfg.eval.episodes},
               {"queries_per_class", cfg.eval.queries_per_class},
               {"way", cfg.eval.way},
               {"shot", cfg.eval.shot}};
  return j;
}

TrainConfig config_from_json(const json& j) {
  reject_unknown(j, {"seed", "ablation", "num_base", "encoder", "routing", "stage1", "stage2", "eval"}, "config");
  TrainConfig cfg;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ConfigError("config.seed: expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("ablation")) {
    std::string a;
    read(j, "ablation", a, "config");
    cfg.ablation = parse_ablation(a);
  }
  cfg.num_base = read_count(j, "num_base", cfg.num_base, "config");
  if (j.contains("encoder")) cfg.encoder = encoder_from_json(j["encoder"], cfg.encoder);
  cfg.sync_dims();
  if (j.contains("routing")) {
    const json& r = j["routing"];
    reject_unknown(r, {"dmm", "qim", "share_params"}, "routing");
    if (r.contains("dmm")) cfg.routing.dmm = routing_from_json(r["dmm"], cfg.routing.dmm);
    if (r.contains("qim")) cfg.routing.qim = routing_from_json(r["qim"], cfg.routing.qim);
    read(r, "share_params", cfg.routing.share_params, "routing");
  }
  if (j.contains("stage1")) {
    const json& s = j["stage1"];
    reject_unknown(s, {"steps", "batch_size", "learning_rate"}, "stage1");
    cfg.stage1.steps = read_count(s, "steps", cfg.stage1.steps, "stage1");
    cfg.stage1.batch_size = read_count(s, "batch_size", cfg.stage1.batch_size, "stage1");
    read(s, "learning_rate", cfg.stage1.learning_rate, "stage1");
  }
  if (j.contains("stage2")) {
    const json& s = j["stage2"];
    reject_unknown(s, {"episodes", "learning_rate", "C", "K", "L", "train_tau", "source"}, "stage2");
    cfg.stage2.episodes = read_count(s, "episodes", cfg.stage2.episodes, "stage2");
    read(s, "learning_rate", cfg.stage2.learning_rate, "stage2");
    cfg.stage2.C = read_count(s, "C", cfg.stage2.C, "stage2");
    cfg.stage2.K = read_count(s, "K", cfg.stage2.K, "stage2");
    cfg.stage2.L = read_count(s, "L", cfg.stage2.L, "stage2");
    read(s, "train_tau", cfg.stage2.train_tau, "stage2");
    if (s.contains("source")) {
      std::string src;
      read(s, "source", src, "stage2");
      cfg.stage2.source = parse_meta_source(src);
    }
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown(e, {"episodes", "queries_per_class", "way", "shot"}, "eval");
    cfg.eval.episodes = read_count(e, "episodes", cfg.eval.episodes, "eval");
    cfg.eval.queries_per_class = read_count(e, "queries_per_class", cfg.eval.queries_per_class, "eval");
    cfg.eval.way = read_count(e, "way", cfg.eval.way, "eval");
    cfg.eval.shot = read_count(e, "shot", cfg.eval.shot, "eval");
  }
  cfg.sync_dims();
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dmin
