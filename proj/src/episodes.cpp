#include "dmin/episodes.hpp"

#include <numeric>
#include <string>

#include "dmin/errors.hpp"
#include "dmin/rng.hpp"

namespace dmin {

void EpisodeConfig::validate() const {
  if (way < 2) throw ConfigError("episode: way (C) must be >= 2, got " + std::to_string(way));
  if (shot < 1) throw ConfigError("episode: shot (K) must be >= 1");
  if (queries < 1) throw ConfigError("episode: queries per class (L) must be >= 1");
}

Episode sample_episode(const Dataset& dataset, const EpisodeConfig& cfg, std::uint64_t index) {
  cfg.validate();
  const std::size_t need = cfg.shot + cfg.queries;
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < dataset.num_classes(); ++c) {
    if (dataset.class_items(c).size() >= need) eligible.push_back(c);
  }
  if (eligible.size() < cfg.way) {
    throw DataError("episode: need " + std::to_string(cfg.way) + " classes with at least " +
                    std::to_string(need) + " items, dataset has " + std::to_string(eligible.size()));
  }

  Rng rng(derive_seed(cfg.seed, index));
  rng.partial_shuffle(eligible, cfg.way);

  Episode ep;
  ep.way = cfg.way;
  ep.shot = cfg.shot;
  ep.queries = cfg.queries;
  ep.classes.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(cfg.way));
  ep.support.reserve(cfg.way * cfg.shot);
  ep.query.reserve(cfg.way * cfg.queries);
  for (std::size_t local = 0; local < cfg.way; ++local) {
    std::vector<std::size_t> pool = dataset.class_items(ep.classes[local]);
    rng.partial_shuffle(pool, need);
    for (std::size_t k = 0; k < cfg.shot; ++k) ep.support.push_back({local, pool[k]});
    for (std::size_t q = 0; q < cfg.queries; ++q) ep.query.push_back({local, pool[cfg.shot + q]});
  }
  return ep;
}

}  // namespace dmin
