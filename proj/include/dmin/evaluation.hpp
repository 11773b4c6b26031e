#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmin/dataset.hpp"
#include "dmin/episodes.hpp"
#include "dmin/model.hpp"

namespace dmin {

struct EvalConfig {
  std::size_t episodes = 100;  // E
  std::size_t way = 5;         // C
  std::size_t shot = 1;        // K
  std::size_t queries = 10;    // L
  std::uint64_t seed = 1;      // episode i uses derive_seed(seed, i)
  unsigned threads = 0;        // 0: DMIN_THREADS or hardware concurrency

  nlohmann::json to_json() const;
};

EvalConfig eval_config_from(const TrainConfig& cfg);

struct EvalReport {
  std::vector<double> per_episode;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation
  bool std_defined = false;   // false when episodes < 2; std is then 0
  std::size_t episodes = 0;
  std::string config_hash;
  double wall_time_ms = 0.0;

  nlohmann::json to_json() const;
};

// Predicted local label (argmax score) for each query of the episode.
std::vector<std::size_t> predict_episode(const Model& model, const Dataset& data, const Episode& episode);
double episode_accuracy(const Model& model, const Dataset& data, const Episode& episode);

// Forward-only; runs episodes on worker threads, merges by episode index.
EvalReport evaluate(const Model& model, const Dataset& test, const EvalConfig& cfg);

// Mean and sample std of `values`; std_defined=false for fewer than 2.
void summarize(EvalReport& report);

std::string config_hash(const ModelConfig& model, const EvalConfig& eval);

// Worker count: `requested` if non-zero, else DMIN_THREADS, else hardware
// concurrency; never more than `jobs`.
unsigned evaluation_threads(unsigned requested, std::size_t jobs);

}  // namespace dmin
