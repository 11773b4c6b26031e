#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dmin/encoder.hpp"
#include "dmin/routing.hpp"

namespace dmin {

enum class Ablation { Full, NoDmm, NoQim, NoDmmNoQim };

const char* to_string(Ablation a);
Ablation parse_ablation(std::string_view name);
inline bool uses_dmm(Ablation a) { return a == Ablation::Full || a == Ablation::NoQim; }
inline bool uses_qim(Ablation a) { return a == Ablation::Full || a == Ablation::NoDmm; }

// Which classes feed the meta-training episodes when a full dataset is split.
// base: the stage-1 base classes. novel_train: the first half of the novel
// classes (the second half is held out for evaluation).
enum class MetaSource { Base, NovelTrain };

const char* to_string(MetaSource s);
MetaSource parse_meta_source(std::string_view name);

struct Stage1Config {
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
};

struct Stage2Config {
  std::size_t episodes = 1000;
  double learning_rate = 1e-4;
  std::size_t C = 5;
  std::size_t K = 1;
  std::size_t L = 10;
  bool train_tau = true;
  MetaSource source = MetaSource::Base;
};

struct RoutingSetup {
  RoutingConfig dmm;
  RoutingConfig qim;
  bool share_params = false;
};

// Evaluation episode counts used by the two reference protocols.
enum class EvalProtocol { MiniRcv1, Odic };
std::size_t protocol_episodes(EvalProtocol p);  // 100 / 300
EvalProtocol parse_protocol(std::string_view name);

struct EvalSettings {
  std::size_t episodes = 100;
  std::size_t queries_per_class = 10;
  std::size_t way = 5;
  std::size_t shot = 1;
};

struct TrainConfig {
  Stage1Config stage1;
  Stage2Config stage2;
  RoutingSetup routing;
  EncoderConfig encoder;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::Full;
  EvalSettings eval;
  std::size_t num_base = 20;

  TrainConfig();
  // Copies encoder.embed_dim into the routing input dimensions.
  void sync_dims();
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const RoutingConfig& cfg);
RoutingConfig routing_from_json(const nlohmann::json& j, RoutingConfig defaults = {});
nlohmann::json to_json(const EncoderConfig& cfg);
EncoderConfig encoder_from_json(const nlohmann::json& j, EncoderConfig defaults = {});

}  // namespace dmin
