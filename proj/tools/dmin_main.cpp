// dmin: command-line driver for training, evaluation and analysis.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmin/ablation.hpp"
#include "dmin/checkpoint.hpp"
#include "dmin/config.hpp"
#include "dmin/dataset.hpp"
#include "dmin/errors.hpp"
#include "dmin/evaluation.hpp"
#include "dmin/silhouette.hpp"
#include "dmin/training.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dmin::DataError("cannot write " + path);
  out << text;
  if (!out) throw dmin::DataError("failed writing " + path);
}

dmin::TrainConfig read_config(const std::string& path) {
  return path.empty() ? dmin::TrainConfig{} : dmin::load_config(path);
}

// Applies --seed/--ablation overrides shared by the training commands.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string ablation;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--ablation", ablation, "full | no_dmm | no_qim | no_dmm_no_qim");
  }
  void apply(dmin::TrainConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (!ablation.empty()) cfg.ablation = dmin::parse_ablation(ablation);
    cfg.validate();
  }
};

void log_losses(const char* stage, const std::vector<double>& losses) {
  if (losses.empty()) {
    std::fprintf(stderr, "%s: 0 steps\n", stage);
    return;
  }
  std::fprintf(stderr, "%s: %zu steps, loss %.6f -> %.6f\n", stage, losses.size(), losses.front(), losses.back());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic memory induction networks for few-shot text classification"};
  app.require_subcommand(1);

  // synth
  dmin::SyntheticSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a Gaussian-cluster vector dataset");
  synth_cmd->add_option("--classes", synth.num_classes)->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class)->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim)->capture_default_str();
  synth_cmd->add_option("--separation", synth.separation)->capture_default_str();
  synth_cmd->add_option("--sigma", synth.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output .jsonl")->required();

  // split
  std::string split_config, split_data, split_prefix;
  Overrides split_over;
  auto* split_cmd = app.add_subcommand("split", "Write the base / meta / test splits a config would use");
  split_cmd->add_option("--config", split_config, "TrainConfig JSON");
  split_cmd->add_option("--data", split_data, "Full dataset (.tsv or .jsonl)")->required();
  split_cmd->add_option("--out-prefix", split_prefix, "Writes <prefix>.{base,meta,test}.<ext>")->required();
  split_over.add(split_cmd);

  // pretrain
  std::string pre_config, pre_data, pre_out;
  bool pre_presplit = false;
  Overrides pre_over;
  auto* pre_cmd = app.add_subcommand("pretrain", "Supervised stage on the base classes");
  pre_cmd->add_option("--config", pre_config, "TrainConfig JSON");
  pre_cmd->add_option("--data", pre_data, "Dataset (.tsv or .jsonl)")->required();
  pre_cmd->add_option("--out", pre_out, "Checkpoint path")->required();
  pre_cmd->add_flag("--presplit", pre_presplit, "Treat --data as the base split itself");
  pre_over.add(pre_cmd);

  // metatrain
  std::string meta_config, meta_model, meta_data, meta_out;
  bool meta_presplit = false;
  Overrides meta_over;
  auto* meta_cmd = app.add_subcommand("metatrain", "Episodic stage on top of a pretrained checkpoint");
  meta_cmd->add_option("--config", meta_config, "TrainConfig JSON");
  meta_cmd->add_option("--model", meta_model, "Pretrained checkpoint")->required();
  meta_cmd->add_option("--data", meta_data, "Dataset (.tsv or .jsonl)")->required();
  meta_cmd->add_option("--out", meta_out, "Checkpoint path")->required();
  meta_cmd->add_flag("--presplit", meta_presplit, "Treat --data as the meta-training split itself");
  meta_over.add(meta_cmd);

  // eval
  std::string eval_model, eval_data, eval_out, eval_config, eval_protocol, eval_ablation;
  dmin::EvalConfig eval_cfg;
  std::optional<std::size_t> eval_episodes;
  std::optional<std::uint64_t> eval_seed;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on sampled episodes");
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "Test dataset (.tsv or .jsonl)")->required();
  eval_cmd->add_option("--config", eval_config, "Take the test split of --data under this config");
  eval_cmd->add_option("--episodes", eval_episodes, "E (default 100)");
  eval_cmd->add_option("--protocol", eval_protocol, "minircv1 (E=100) | odic (E=300)");
  eval_cmd->add_option("--way", eval_cfg.way)->capture_default_str();
  eval_cmd->add_option("--shot", eval_cfg.shot)->capture_default_str();
  eval_cmd->add_option("--queries", eval_cfg.queries)->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed, "Episode seed");
  eval_cmd->add_option("--threads", eval_cfg.threads, "Worker threads (0: DMIN_THREADS or all cores)");
  eval_cmd->add_option("--ablation", eval_ablation, "Evaluate under a different ablation");
  eval_cmd->add_option("--out", eval_out, "Report JSON (stdout when omitted)");

  // ablate
  std::string abl_config, abl_data, abl_out;
  Overrides abl_over;
  auto* abl_cmd = app.add_subcommand("ablate", "Ablation table over DMM, QIM and routing iterations");
  abl_cmd->add_option("--config", abl_config, "TrainConfig JSON");
  abl_cmd->add_option("--data", abl_data, "Full dataset (.tsv or .jsonl)")->required();
  abl_cmd->add_option("--out", abl_out, "CSV path")->required();
  abl_over.add(abl_cmd);

  // separation
  std::string sep_model, sep_data, sep_csv;
  dmin::SeparationConfig sep_cfg;
  auto* sep_cmd = app.add_subcommand("separation", "Silhouette of support vectors before and after the DMM");
  sep_cmd->add_option("--model", sep_model, "Checkpoint")->required();
  sep_cmd->add_option("--data", sep_data, "Dataset (.tsv or .jsonl)")->required();
  sep_cmd->add_option("--way", sep_cfg.way)->capture_default_str();
  sep_cmd->add_option("--shot", sep_cfg.shot)->capture_default_str();
  sep_cmd->add_option("--seed", sep_cfg.seed)->capture_default_str();
  sep_cmd->add_option("--out-csv", sep_csv, "Vectors CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) {
      const auto data = dmin::generate_synthetic(synth);
      dmin::save_dataset(data.dataset, synth_out);
      std::fprintf(stderr, "wrote %zu items, %zu classes to %s\n", data.dataset.size(), data.dataset.num_classes(),
                   synth_out.c_str());
    } else if (*split_cmd) {
      auto cfg = read_config(split_config);
      split_over.apply(cfg);
      const auto data = dmin::load_dataset(split_data);
      const auto splits = dmin::make_splits(data, cfg);
      const std::string ext = data.is_text() ? ".tsv" : ".jsonl";
      dmin::save_dataset(splits.base, split_prefix + ".base" + ext);
      dmin::save_dataset(splits.meta, split_prefix + ".meta" + ext);
      dmin::save_dataset(splits.test, split_prefix + ".test" + ext);
      std::fprintf(stderr, "base %zu / meta %zu / test %zu classes\n", splits.base.num_classes(),
                   splits.meta.num_classes(), splits.test.num_classes());
    } else if (*pre_cmd) {
      auto cfg = read_config(pre_config);
      pre_over.apply(cfg);
      const auto data = dmin::load_dataset(pre_data);
      const auto base = pre_presplit ? data : dmin::make_splits(data, cfg).base;
      const auto result = dmin::pretrain(base, cfg);
      log_losses("pretrain", result.losses);
      std::fprintf(stderr, "pretrain: training accuracy %.4f\n", result.train_accuracy);
      dmin::save_checkpoint(result.model, pre_out);
    } else if (*meta_cmd) {
      auto cfg = read_config(meta_config);
      meta_over.apply(cfg);
      const auto start = dmin::load_checkpoint(meta_model, cfg.encoder.embed_dim);
      const auto data = dmin::load_dataset(meta_data);
      const auto meta = meta_presplit ? data : dmin::make_splits(data, cfg).meta;
      const auto result = dmin::meta_train(start, meta, cfg);
      log_losses("metatrain", result.losses);
      dmin::save_checkpoint(result.model, meta_out);
    } else if (*eval_cmd) {
      auto model = dmin::load_checkpoint(eval_model);
      if (!eval_ablation.empty()) model.config.ablation = dmin::parse_ablation(eval_ablation);
      auto data = dmin::load_dataset(eval_data);
      if (!eval_config.empty()) {
        const auto cfg = dmin::load_config(eval_config);
        data = dmin::make_splits(data, cfg).test;
        eval_cfg.seed = dmin::eval_config_from(cfg).seed;
      }
      if (!eval_protocol.empty()) eval_cfg.episodes = dmin::protocol_episodes(dmin::parse_protocol(eval_protocol));
      if (eval_episodes) eval_cfg.episodes = *eval_episodes;
      if (eval_seed) eval_cfg.seed = *eval_seed;
      const auto report = dmin::evaluate(model, data, eval_cfg);
      const std::string text = report.to_json().dump(2) + "\n";
      if (eval_out.empty()) {
        std::cout << text;
      } else {
        write_text(eval_out, text);
      }
      std::fprintf(stderr, "accuracy %.4f +- %.4f over %zu episodes\n", report.mean_accuracy, report.std_accuracy,
                   report.episodes);
    } else if (*abl_cmd) {
      auto cfg = read_config(abl_config);
      abl_over.apply(cfg);
      const auto data = dmin::load_dataset(abl_data);
      const auto table = dmin::run_ablation_suite(data, cfg);
      write_text(abl_out, table.to_csv());
      std::fprintf(stderr, "%s\n", table.iteration_trend().c_str());
    } else if (*sep_cmd) {
      const auto model = dmin::load_checkpoint(sep_model);
      const auto data = dmin::load_dataset(sep_data);
      const auto report = dmin::separation_report(model, data, sep_cfg);
      if (!report.warning.empty()) std::fprintf(stderr, "warning: %s\n", report.warning.c_str());
      write_text(sep_csv, report.to_csv());
      std::printf("{\"silhouette_before\": %.17g, \"silhouette_after\": %.17g}\n", report.silhouette_before,
                  report.silhouette_after);
    }
  } catch (const dmin::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const dmin::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const dmin::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kOk;
}
