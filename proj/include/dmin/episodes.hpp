#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dmin/dataset.hpp"

namespace dmin {

struct EpisodeConfig {
  std::size_t way = 5;       // C
  std::size_t shot = 1;      // K
  std::size_t queries = 10;  // L, per class
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpisodeItem {
  std::size_t label = 0;   // episode-local, in [0, way)
  std::size_t source = 0;  // index into the dataset

  friend bool operator==(const EpisodeItem&, const EpisodeItem&) = default;
};

// One C-way K-shot task. Support items are grouped by class (class c owns
// support[c*K .. c*K+K)); queries likewise with L per class.
struct Episode {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t queries = 0;
  std::vector<std::size_t> classes;  // dataset class id for each local label
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;

  std::size_t total_items() const { return support.size() + query.size(); }
  friend bool operator==(const Episode&, const Episode&) = default;
};

// Classes are drawn without replacement among those with at least K+L items;
// per class, K+L items without replacement (first K support, next L query).
// Episode `index` depends only on (cfg.seed, index).
Episode sample_episode(const Dataset& dataset, const EpisodeConfig& cfg, std::uint64_t index);

}  // namespace dmin
