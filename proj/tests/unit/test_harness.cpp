#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dmin/ablation.hpp"
#include "dmin/checkpoint.hpp"
#include "dmin/config.hpp"
#include "dmin/errors.hpp"
#include "dmin/evaluation.hpp"
#include "dmin/optimizer.hpp"
#include "dmin/silhouette.hpp"
#include "dmin/training.hpp"
#include "support/oracles.hpp"

using namespace dmin;
namespace fs = std::filesystem;

namespace {

Dataset synthetic(std::size_t classes, std::size_t per_class, std::size_t dim, std::uint64_t seed = 1,
                  double separation = 6.0) {
  SyntheticSpec spec;
  spec.num_classes = classes;
  spec.per_class = per_class;
  spec.dim = dim;
  spec.seed = seed;
  spec.separation = separation;
  return generate_synthetic(spec).dataset;
}

TrainConfig small_config(std::size_t dim) {
  TrainConfig cfg;
  cfg.encoder.embed_dim = dim;
  for (RoutingConfig* r : {&cfg.routing.dmm, &cfg.routing.qim}) {
    r->capsule_count = 2;
    r->capsule_dim = dim / 2;
  }
  cfg.sync_dims();
  return cfg;
}

oracle::Vec as_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

const Tensor& vector_of(const Dataset& ds, std::size_t source) { return std::get<Tensor>(ds.item(source).payload); }

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("dmin_harness_" + std::to_string(std::random_device{}()) + "_" + name);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pretrain separates three well-separated classes") {
  const Dataset base = synthetic(3, 30, 16);
  TrainConfig cfg = small_config(16);
  cfg.num_base = 3;
  cfg.stage1.steps = 200;
  const PretrainResult r = pretrain(base, cfg);
  CHECK(r.losses.size() == 200);
  CHECK(r.train_accuracy >= 0.95);
  CHECK(r.losses.back() < r.losses.front());
  CHECK(r.model.trained_stages == 1);
}

TEST_CASE("pretrain with zero steps returns the initial model") {
  const Dataset base = synthetic(4, 10, 8);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 4;
  cfg.stage1.steps = 0;
  const PretrainResult r = pretrain(base, cfg);
  CHECK(r.losses.empty());
  CHECK(r.model.parameter_hash() == initial_model(cfg, base).parameter_hash());
}

TEST_CASE("step-0 loss is close to ln C_base when cosines are near zero") {
  // With tau = 10 the initial cosines have spread about 1/sqrt(d), which adds
  // roughly tau^2 / (2d) to ln C. At d = 2000 that excess is 0.025.
  const Dataset base = synthetic(20, 5, 2000, 3);
  TrainConfig cfg = small_config(2000);
  cfg.stage1.steps = 1;
  cfg.stage1.batch_size = 100;
  const PretrainResult r = pretrain(base, cfg);
  REQUIRE(r.losses.size() == 1);
  CHECK(std::abs(r.losses[0] - std::log(20.0)) < 0.1);
}

TEST_CASE("one meta step moves the routing parameters") {
  const Dataset data = synthetic(8, 12, 8, 2);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 8;
  Model model = initial_model(cfg, data);
  const Model before = model;
  Adam adam({1e-3});
  const Episode ep = sample_episode(data, {5, 1, 3, 9}, 0);
  const double loss = meta_step(model, adam, data, ep, TrainableSet{});
  CHECK(std::isfinite(loss));
  CHECK_FALSE(model.dmm.weights[0] == before.dmm.weights[0]);
  CHECK_FALSE(model.qim.weights[0] == before.qim.weights[0]);
  CHECK_FALSE(model.classifier.w_base == before.classifier.w_base);
}

TEST_CASE("stage-2 loss decreases on a frozen episode") {
  const Dataset data = synthetic(8, 12, 8, 4);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 8;
  Model model = initial_model(cfg, data);
  Adam adam({1e-3});
  const Episode ep = sample_episode(data, {5, 1, 5, 17}, 0);
  const double first = episode_loss(model, data, ep);
  for (int s = 0; s < 50; ++s) meta_step(model, adam, data, ep, TrainableSet{});
  CHECK(episode_loss(model, data, ep) < first);
}

TEST_CASE("evaluation at chance level on indistinguishable classes") {
  const Dataset noise = synthetic(10, 20, 8, 5, 1e-9);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 10;
  const Model model = initial_model(cfg, noise);
  EvalConfig ec;
  ec.episodes = 100;
  const EvalReport r = evaluate(model, noise, ec);
  CHECK(r.episodes == 100);
  CHECK(std::abs(r.mean_accuracy - 0.2) <= 0.05);
  CHECK(r.std_defined);
}

TEST_CASE("evaluation report arithmetic and protocols") {
  EvalReport r;
  r.per_episode = {0.5};
  summarize(r);
  CHECK(r.mean_accuracy == 0.5);
  CHECK_FALSE(r.std_defined);
  CHECK(r.std_accuracy == 0.0);
  r.per_episode = {0.2, 0.4, 0.6};
  summarize(r);
  CHECK(r.mean_accuracy == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(r.std_accuracy == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.std_defined);
  CHECK(protocol_episodes(parse_protocol("minircv1")) == 100);
  CHECK(protocol_episodes(parse_protocol("odic")) == 300);
  CHECK_THROWS_AS(parse_protocol("imagenet"), ConfigError);

  const Dataset data = synthetic(6, 15, 8, 6);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 6;
  const Model model = initial_model(cfg, data);
  EvalConfig one;
  one.episodes = 1;
  const EvalReport single = evaluate(model, data, one);
  CHECK_FALSE(single.std_defined);
  CHECK(single.std_accuracy == 0.0);
  const auto j = single.to_json();
  for (const char* key : {"mean_accuracy", "std_accuracy", "episodes", "per_episode", "config_hash", "wall_time_ms"})
    CHECK(j.contains(key));
}

TEST_CASE("evaluation is deterministic, thread-count independent and read-only") {
  const Dataset data = synthetic(8, 15, 8, 7);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 8;
  const Model model = initial_model(cfg, data);
  const std::uint64_t hash = model.parameter_hash();
  EvalConfig ec;
  ec.episodes = 12;
  ec.threads = 1;
  const EvalReport a = evaluate(model, data, ec);
  ec.threads = 4;
  const EvalReport b = evaluate(model, data, ec);
  CHECK(a.per_episode == b.per_episode);
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.mean_accuracy == b.mean_accuracy);
  CHECK(model.parameter_hash() == hash);
  ec.seed = 2;
  CHECK_FALSE(evaluate(model, data, ec).config_hash == a.config_hash);
  EvalConfig too_many;
  too_many.way = 9;
  CHECK_THROWS_AS(evaluate(model, data, too_many), DataError);
}

TEST_CASE("no_dmm + no_qim evaluation equals the prototypical oracle") {
  const Dataset data = synthetic(10, 20, 8, 8, 1.0);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 10;
  cfg.ablation = Ablation::NoDmmNoQim;
  const Model model = initial_model(cfg, data);
  EvalConfig ec;
  ec.episodes = 20;
  ec.shot = 3;
  const EvalReport report = evaluate(model, data, ec);
  for (std::size_t i = 0; i < 20; ++i) {
    const Episode ep = sample_episode(data, {ec.way, ec.shot, ec.queries, ec.seed}, i);
    std::vector<oracle::Mat> by_class(ec.way);
    for (const auto& s : ep.support) by_class[s.label].push_back(as_vec(vector_of(data, s.source)));
    std::size_t correct = 0;
    for (const auto& q : ep.query) correct += oracle::prototype_predict(by_class, as_vec(vector_of(data, q.source))) == q.label;
    const double acc = static_cast<double>(correct) / static_cast<double>(ep.query.size());
    CHECK(report.per_episode[i] == acc);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  const Dataset data = synthetic(6, 10, 8, 9);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 6;
  cfg.encoder.kind = EncoderKind::Precomputed;
  const Model model = initial_model(cfg, data);
  const fs::path a = temp_path("a.json");
  const fs::path b = temp_path("b.json");
  save_checkpoint(model, a);
  const Model loaded = load_checkpoint(a);
  save_checkpoint(loaded, b);
  CHECK(slurp(a) == slurp(b));
  CHECK(loaded.parameter_hash() == model.parameter_hash());
  CHECK(loaded.config == model.config);

  const std::string text = slurp(a);
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), DataError);
  try {
    (void)parse_checkpoint(text, 16);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("d=8") != std::string::npos);
    CHECK(msg.find("d=16") != std::string::npos);
  }
  std::string versioned = text;
  const auto pos = versioned.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  versioned.replace(pos, 12, "\"version\": 2");
  CHECK_THROWS_WITH_AS(parse_checkpoint(versioned), doctest::Contains("version"), DataError);
  std::string flipped = text;
  const auto data_pos = flipped.find("\"data\": \"") + 9;
  flipped[data_pos] = flipped[data_pos] == 'A' ? 'B' : 'A';
  CHECK_THROWS_WITH_AS(parse_checkpoint(flipped), doctest::Contains("checksum"), DataError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.json")), DataError);

  // a feature_hash model round-trips its projection too
  TrainConfig text_cfg = small_config(8);
  text_cfg.encoder.kind = EncoderKind::FeatureHash;
  text_cfg.encoder.vocab_buckets = 32;
  text_cfg.num_base = 2;
  Dataset words;
  words.add(words.intern_class("x"), std::string("one two"));
  words.add(words.intern_class("y"), std::string("three four"));
  const Model hashed = initial_model(text_cfg, words);
  CHECK(parse_checkpoint(serialize_checkpoint(hashed)).parameter_hash() == hashed.parameter_hash());
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("silhouette conventions and oracle agreement") {
  const std::vector<Tensor> two{Tensor::vector({0, 0}), Tensor::vector({3, 4})};
  const std::vector<std::size_t> two_labels{0, 1};
  CHECK(silhouette_score(two, two_labels) == 1.0);

  const std::vector<Tensor> same(6, Tensor::vector({1, 1, 1}));
  const std::vector<std::size_t> same_labels{0, 0, 1, 1, 2, 2};
  CHECK(silhouette_score(same, same_labels) == 0.0);

  const std::vector<Tensor> pts{Tensor::vector({0, 0}),   Tensor::vector({0.5, 0.2}), Tensor::vector({-0.3, 0.4}),
                                Tensor::vector({5, 5}),   Tensor::vector({5.5, 4.1}), Tensor::vector({4.4, 5.2}),
                                Tensor::vector({-4, 6}),  Tensor::vector({-5, 5.5}),  Tensor::vector({1, 1})};
  const std::vector<std::size_t> labels{0, 0, 0, 1, 1, 1, 2, 2, 0};
  oracle::Mat m;
  for (const auto& p : pts) m.push_back(as_vec(p));
  CHECK(std::abs(silhouette_score(pts, labels) - oracle::silhouette(m, labels)) <= 1e-12);

  Rng rng(10);
  for (int c = 0; c < 50; ++c) {
    std::vector<Tensor> rp;
    std::vector<std::size_t> rl;
    oracle::Mat om;
    const std::size_t n = 4 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      rl.push_back(i < 2 ? i : rng.below(4));
      std::vector<double> v(3);
      for (double& x : v) x = rng.normal() + 3.0 * static_cast<double>(rl.back());
      rp.push_back(Tensor::vector(v));
      om.push_back(v);
    }
    CHECK(std::abs(silhouette_score(rp, rl) - oracle::silhouette(om, rl)) <= 1e-12);
  }
  const std::vector<std::size_t> one_label{0, 0};
  CHECK_THROWS_AS(silhouette_score(two, one_label), DataError);
}

TEST_CASE("separation report") {
  const Dataset data = synthetic(10, 8, 8, 11);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 10;
  const Model model = initial_model(cfg, data);
  const SeparationReport r = separation_report(model, data, {});
  CHECK(r.before.size() == 50);
  CHECK(r.after.size() == 50);
  CHECK_FALSE(r.warning.empty());
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("stage,label,x0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);
  CHECK(separation_report(model, data, {}).silhouette_after == r.silhouette_after);
  CHECK_THROWS_AS(separation_report(model, data, {11, 5, 1}), DataError);
}

TEST_CASE("ablation suite shape and determinism") {
  const Dataset full = synthetic(14, 12, 8, 12);
  TrainConfig cfg = small_config(8);
  cfg.num_base = 8;
  cfg.stage1.steps = 10;
  cfg.stage2.episodes = 3;
  cfg.eval.episodes = 3;
  cfg.eval.queries_per_class = 2;
  cfg.stage2.L = 2;
  const AblationTable t = run_ablation_suite(full, cfg);
  REQUIRE(t.rows.size() == 5);
  CHECK(t.rows[0].model == "w/o DMM");
  CHECK(t.rows[1].model == "w/o QIM");
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(t.rows[2 + r].model == "DMIN");
    CHECK(t.rows[2 + r].iterations == r + 1);
  }
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("model,iterations,acc_1shot,acc_5shot\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(run_ablation_suite(full, cfg).to_csv() == csv);
  CHECK_FALSE(t.iteration_trend().empty());
}

TEST_CASE("config JSON round trip and validation") {
  TrainConfig cfg = small_config(16);
  cfg.stage2.K = 5;
  cfg.ablation = Ablation::NoQim;
  cfg.stage2.source = MetaSource::NovelTrain;
  const TrainConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.stage2.K == 5);
  CHECK(back.ablation == Ablation::NoQim);

  auto j = to_json(cfg);
  j["stage1"]["momentum"] = 0.9;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  auto k = to_json(cfg);
  k["ablation"] = "no_everything";
  CHECK_THROWS_AS(config_from_json(k), ConfigError);
  auto partial = nlohmann::json::object();
  partial["seed"] = 9;
  CHECK(config_from_json(partial).seed == 9);
  CHECK(config_from_json(partial).stage2.episodes == TrainConfig{}.stage2.episodes);

  TrainConfig bad = cfg;
  bad.stage1.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_ablation("no_dmm") == Ablation::NoDmm);
  CHECK(parse_ablation("no_dmm_no_qim") == Ablation::NoDmmNoQim);
}
