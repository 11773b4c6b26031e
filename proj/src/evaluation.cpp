#include "dmin/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "dmin/errors.hpp"
#include "dmin/hash.hpp"
#include "dmin/training.hpp"

namespace dmin {

nlohmann::json EvalConfig::to_json() const {
  return {{"episodes", episodes}, {"way", way}, {"shot", shot}, {"queries", queries}, {"seed", seed}};
}

EvalConfig eval_config_from(const TrainConfig& cfg) {
  EvalConfig e;
  e.episodes = cfg.eval.episodes;
  e.way = cfg.eval.way;
  e.shot = cfg.eval.shot;
  e.queries = cfg.eval.queries_per_class;
  e.seed = stream_seed(cfg.seed, Stream::EvalEpisodes);
  return e;
}

nlohmann::json EvalReport::to_json() const {
  return {{"mean_accuracy", mean_accuracy}, {"std_accuracy", std_accuracy}, {"std_defined", std_defined},
          {"episodes", episodes},           {"per_episode", per_episode},   {"config_hash", config_hash},
          {"wall_time_ms", wall_time_ms}};
}

std::vector<std::size_t> predict_episode(const Model& model, const Dataset& data, const Episode& episode) {
  Tape tape;
  const ModelVars vars = record_model(tape, model);
  const EpisodeScores scores = score_episode(tape, model, vars, data, episode);
  std::vector<std::size_t> out;
  out.reserve(scores.scores.size());
  for (Var s : scores.scores) {
    const Tensor& v = s.value();
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c) {
      if (v[c] > v[best]) best = c;
    }
    out.push_back(best);
  }
  return out;
}

double episode_accuracy(const Model& model, const Dataset& data, const Episode& episode) {
  const auto predicted = predict_episode(model, data, episode);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < predicted.size(); ++q) {
    if (predicted[q] == episode.query[q].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void summarize(EvalReport& r) {
  r.episodes = r.per_episode.size();
  if (r.per_episode.empty()) return;
  double total = 0.0;
  for (double a : r.per_episode) total += a;
  r.mean_accuracy = total / static_cast<double>(r.episodes);
  r.std_defined = r.episodes >= 2;
  r.std_accuracy = 0.0;
  if (r.std_defined) {
    double ss = 0.0;
    for (double a : r.per_episode) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
    r.std_accuracy = std::sqrt(ss / static_cast<double>(r.episodes - 1));
  }
}

std::string config_hash(const ModelConfig& model, const EvalConfig& eval) {
  const nlohmann::json j = {{"model", to_json(model)}, {"eval", eval.to_json()}};
  return hex64(fnv1a64(j.dump()));
}

unsigned evaluation_threads(unsigned requested, std::size_t jobs) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("DMIN_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) n = static_cast<unsigned>(v);
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (jobs < n) n = static_cast<unsigned>(std::max<std::size_t>(jobs, 1));
  return n;
}

EvalReport evaluate(const Model& model, const Dataset& test, const EvalConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  test.validate();
  check_compatible(model.config, test);
  if (cfg.episodes < 1) throw ConfigError("evaluate: need at least one episode");
  const EpisodeConfig ep_cfg{cfg.way, cfg.shot, cfg.queries, cfg.seed};
  ep_cfg.validate();
  // Fail fast on insufficient data before spawning workers.
  (void)sample_episode(test, ep_cfg, 0);

  EvalReport report;
  report.per_episode.assign(cfg.episodes, 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.episodes; i = next++) {
      try {
        report.per_episode[i] = episode_accuracy(model, test, sample_episode(test, ep_cfg, i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.episodes;
      }
    }
  };
  const unsigned threads = evaluation_threads(cfg.threads, cfg.episodes);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  summarize(report);
  report.config_hash = config_hash(model.config, cfg);
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace dmin
