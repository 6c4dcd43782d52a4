// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "playitback/errors.hpp"
#include "playitback/trainer.hpp"
#include "tiny_config.hpp"

using namespace pib;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_train() {
  TrainConfig c;
  c.model = test::tiny_config(1);
  c.model.n_classes = 4;
  c.epochs = 2;
  c.batch_size = 4;
  return c;
}

Dataset tiny_data(std::size_t n, const std::string& split) {
  SynthSpec s;
  s.clip_s = 1.0;
  return synth_split(s, split, n);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

AudioClip ramp(std::size_t n, double scale) {
  AudioClip c;
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(scale * static_cast<double>(i));
  return c;
}

}  // namespace

TEST_CASE("mixup") {
  const std::vector<AudioClip> clips{ramp(4, 1.0), ramp(4, -2.0), ramp(2, 3.0)};
  const std::vector<std::vector<double>> targets{{1, 0}, {0, 1}, {1, 0}};
  SUBCASE("lambda 1 leaves the batch unchanged") {
    const auto m = mixup_with(clips, targets, 1.0, {1, 2, 0});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(m.clips[i].samples == clips[i].samples);
      CHECK(m.targets[i] == targets[i]);
    }
  }
  SUBCASE("mixing identical samples is idempotent") {
    const std::vector<AudioClip> same{clips[0], clips[0]};
    const auto m = mixup_with(same, {{1, 0}, {1, 0}}, 0.5, {1, 0});
    CHECK(m.clips[0].samples == clips[0].samples);
  }
  SUBCASE("convex combination with zero-padded partners") {
    const auto m = mixup_with(clips, targets, 0.25, {2, 0, 1});
    CHECK(m.clips[0].samples == std::vector<double>{0.0, 0.25 + 0.75 * 3.0, 0.5, 0.75});
    CHECK(m.clips[2].samples.size() == 2);
    for (const auto& t : m.targets) CHECK(t[0] + t[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.targets[1][0] == doctest::Approx(0.75));
  }
  SUBCASE("alpha 0 disables mixing") {
    std::mt19937_64 rng(1);
    const auto m = mixup(clips, targets, 0.0, rng);
    CHECK(m.lambda == 1.0);
    CHECK(m.clips[1].samples == clips[1].samples);
  }
  SUBCASE("random mixing keeps targets on the simplex") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = mixup(clips, targets, 0.3, rng);
      CHECK(m.lambda >= 0.0);
      CHECK(m.lambda <= 1.0);
      for (const auto& t : m.targets) CHECK(t[0] + t[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("Beta(alpha, alpha) draws are symmetric around one half") {
  std::mt19937_64 rng(5);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  std::vector<double> xs(n);
  for (double& x : xs) {
    x = sample_beta(0.3, rng);
    mean += x;
  }
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var == doctest::Approx(0.25 / 1.6).epsilon(0.05));  // a^2 / ((2a)^2 (2a + 1))
}

TEST_CASE("a zero learning rate leaves parameters bitwise unchanged") {
  auto cfg = tiny_train();
  cfg.base_lr = 0.0;
  cfg.epochs = 1;
  const auto data = tiny_data(8, "train");
  PlayItBackModel fresh(cfg.model);
  const auto before = encode_checkpoint(fresh.params());
  const auto ckpt = fs::temp_directory_path() / "pib_lr0.pibk";
  train(cfg, data, {}, ckpt);
  CHECK(slurp(ckpt) == std::vector<char>(before.begin(), before.end()));
  fs::remove(ckpt);
  fs::remove(config_sidecar(ckpt));
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto cfg = tiny_train();
  const auto tr = tiny_data(8, "train"), va = tiny_data(4, "val");
  const auto dir = fs::temp_directory_path();
  train(cfg, tr, va, dir / "pib_det_a.pibk", dir / "pib_det_a.csv");
  train(cfg, tr, va, dir / "pib_det_b.pibk", dir / "pib_det_b.csv");
  CHECK(slurp(dir / "pib_det_a.csv") == slurp(dir / "pib_det_b.csv"));
  CHECK(slurp(dir / "pib_det_a.pibk") == slurp(dir / "pib_det_b.pibk"));
  std::ifstream log(dir / "pib_det_a.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == epoch_log_header(2));
  for (const char* f : {"pib_det_a.pibk", "pib_det_b.pibk", "pib_det_a.csv", "pib_det_b.csv", "pib_det_a.pibk.json",
                        "pib_det_b.pibk.json"})
    fs::remove(dir / f);
}

TEST_CASE("evaluate reports per-pass accuracy and rejects label mismatches") {
  const auto cfg = tiny_train();
  PlayItBackModel model(cfg.model);
  const auto data = tiny_data(8, "val");
  const auto r = evaluate(model, data);
  CHECK(r.per_pass_top1.size() == 2);
  CHECK(r.metrics.n_samples == 8);
  CHECK(r.scores.size() == 8);
  const auto j = to_json(r);
  CHECK(j.contains("per_pass_top1"));
  CHECK(j.contains("d_prime"));

  auto wide = cfg.model;
  wide.n_classes = 3;
  PlayItBackModel three(wide);
  CHECK_THROWS_AS(evaluate(three, data), ConfigError);
}

TEST_CASE("train_step rejects non-finite losses") {
  auto cfg = tiny_train();
  PlayItBackModel model(cfg.model);
  for (auto& t : model.params().tensors())
    if (model.params().names()[static_cast<std::size_t>(&t - model.params().tensors().data())] == "decoder.head.weight")
      std::fill(t.value().begin(), t.value().end(), std::numeric_limits<double>::quiet_NaN());
  OptimState opt;
  std::mt19937_64 rng(0);
  const auto data = tiny_data(2, "train");
  CHECK_THROWS_AS(train_step(model, opt, data.clips, {one_hot(0, 4), one_hot(1, 4)}, cfg.loss, 0.1, rng), NumericError);
}

TEST_CASE("train config validation and JSON") {
  auto cfg = tiny_train();
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.loss.beta = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.model.frontend.hop_decrement_ms = 6.0;  // pass 3 would get a negative hop
  bad.model.n_playbacks = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const nlohmann::json j = cfg;
  const auto back = j.get<TrainConfig>();
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.loss.beta == cfg.loss.beta);
  CHECK(back.model.width == cfg.model.width);
  CHECK(nlohmann::json(back) == j);
}
