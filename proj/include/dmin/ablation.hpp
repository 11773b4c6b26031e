#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dmin/config.hpp"
#include "dmin/dataset.hpp"

namespace dmin {

struct AblationRow {
  std::string model;  // "w/o DMM", "w/o QIM" or "DMIN"
  std::size_t iterations = 3;
  double acc_1shot = 0.0;
  double acc_5shot = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  // Header `model,iterations,acc_1shot,acc_5shot`, accuracies as %.6f.
  std::string to_csv() const;
  // Describes how DMIN accuracy moves from r=1 to r=3 (no judgement).
  std::string iteration_trend() const;
};

// Pretrains once on the base split, then for each row and each shot
// setting (1 and 5) meta-trains a copy and evaluates it on the test split.
// Every row reuses the same seeds.
AblationTable run_ablation_suite(const Dataset& full, const TrainConfig& cfg);

}  // namespace dmin
