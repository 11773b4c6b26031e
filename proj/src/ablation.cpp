#include "dmin/ablation.hpp"

#include <array>
#include <cstdio>

#include "dmin/evaluation.hpp"
#include "dmin/training.hpp"

namespace dmin {

namespace {

struct Variant {
  const char* name;
  Ablation ablation;
  std::size_t iterations;
};

constexpr std::array<Variant, 5> kVariants{{
    {"w/o DMM", Ablation::NoDmm, 3},
    {"w/o QIM", Ablation::NoQim, 3},
    {"DMIN", Ablation::Full, 1},
    {"DMIN", Ablation::Full, 2},
    {"DMIN", Ablation::Full, 3},
}};

std::string format_accuracy(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string AblationTable::to_csv() const {
  std::string out = "model,iterations,acc_1shot,acc_5shot\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::to_string(r.iterations) + "," + format_accuracy(r.acc_1shot) + "," +
           format_accuracy(r.acc_5shot) + "\n";
  }
  return out;
}

std::string AblationTable::iteration_trend() const {
  const AblationRow* first = nullptr;
  const AblationRow* last = nullptr;
  for (const auto& r : rows) {
    if (r.model != "DMIN") continue;
    if (!first || r.iterations < first->iterations) first = &r;
    if (!last || r.iterations > last->iterations) last = &r;
  }
  if (!first || first == last) return "iteration effect: not measured";
  auto describe = [](double from, double to) {
    const double delta = to - from;
    const char* word = delta > 0 ? "up" : (delta < 0 ? "down" : "flat");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.4f (%s)", delta, word);
    return std::string(buf);
  };
  return "iteration effect r=" + std::to_string(first->iterations) + "->" + std::to_string(last->iterations) +
         ": 1-shot " + describe(first->acc_1shot, last->acc_1shot) + ", 5-shot " +
         describe(first->acc_5shot, last->acc_5shot);
}

AblationTable run_ablation_suite(const Dataset& full, const TrainConfig& cfg) {
  cfg.validate();
  const Splits splits = make_splits(full, cfg);
  const PretrainResult pre = pretrain(splits.base, cfg);

  AblationTable table;
  for (const auto& v : kVariants) {
    AblationRow row{v.name, v.iterations, 0.0, 0.0};
    for (const std::size_t shot : {std::size_t{1}, std::size_t{5}}) {
      TrainConfig run = cfg;
      run.ablation = v.ablation;
      run.routing.dmm.iterations = v.iterations;
      run.routing.qim.iterations = v.iterations;
      run.stage2.K = shot;
      run.eval.shot = shot;
      const MetaTrainResult meta = meta_train(pre.model, splits.meta, run);
      const EvalReport report = evaluate(meta.model, splits.test, eval_config_from(run));
      (shot == 1 ? row.acc_1shot : row.acc_5shot) = report.mean_accuracy;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace dmin
