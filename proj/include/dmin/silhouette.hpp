#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmin/dataset.hpp"
#include "dmin/model.hpp"

namespace dmin {

// Mean silhouette coefficient with Euclidean distance. A point alone in its
// cluster has a(i) = 0; a point with max(a, b) = 0 scores 0. Needs at least
// two distinct labels.
double silhouette_score(std::span<const Tensor> points, std::span<const std::size_t> labels);

struct SeparationConfig {
  std::size_t way = 10;
  std::size_t shot = 5;
  std::uint64_t seed = 1;
};

struct SeparationReport {
  double silhouette_before = 0.0;  // encoder outputs e
  double silhouette_after = 0.0;   // DMM outputs e'
  std::vector<Tensor> before;
  std::vector<Tensor> after;
  std::vector<std::string> labels;        // class names
  std::vector<std::size_t> local_labels;  // episode-local ids
  std::string warning;                    // non-empty for an untrained model

  // Header `stage,label,x0,...,x{d-1}`; "before" rows first, then "after".
  std::string to_csv() const;
};

// Samples one way x shot support set and compares cluster separation before
// and after the dynamic memory module.
SeparationReport separation_report(const Model& model, const Dataset& data, const SeparationConfig& cfg);

}  // namespace dmin
