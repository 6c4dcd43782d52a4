// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "playitback/errors.hpp"
#include "playitback/model.hpp"
#include "tiny_config.hpp"

using namespace pib;
using ad::Tensor;

namespace {

AudioClip chirp(double seconds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  AudioClip c;
  c.samples.resize(static_cast<std::size_t>(seconds * 16000));
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    c.samples[i] = 0.4 * std::sin(2 * M_PI * (300.0 + 900.0 * t) * t) * std::exp(-3.0 * std::abs(t - 0.4)) + n(rng);
  }
  return c;
}

struct DecoderFixture {
  ModelConfig cfg = test::tiny_config();
  ParameterStore ps;
  std::mt19937_64 rng{21};
  PlaybackDecoder dec{ps, cfg, rng};
  EncodedFeatures z{Tensor::constant({10, 8}, test::randn(80, rng))};
};

}  // namespace

TEST_CASE("decoder with a closed value path only self-attends") {
  DecoderFixture f;
  std::fill(f.dec.cross.value.weight.value().begin(), f.dec.cross.value.weight.value().end(), 0.0);
  const auto v = f.dec.decode(f.z, f.dec.initial(), 1);
  const auto expect = f.dec.self_block(f.dec.latent_init);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(v.v.value()[i] == doctest::Approx(expect.value()[i]).epsilon(1e-12));
}

TEST_CASE("pass identity is observable through the playback embedding") {
  DecoderFixture f;
  const auto a = f.dec.decode(f.z, f.dec.initial(), 1);
  const auto b = f.dec.decode(f.z, f.dec.initial(), 2);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) diff += std::abs(a.v.value()[i] - b.v.value()[i]);
  CHECK(diff > 1e-6);
  CHECK(b.pass_index == 2);
  CHECK_THROWS_AS(f.dec.decode(f.z, f.dec.initial(), static_cast<int>(f.cfg.max_passes) + 1), ConfigError);
  CHECK_THROWS_AS(f.dec.decode(f.z, f.dec.initial(), 0), ConfigError);
}

TEST_CASE("decode passes grad_check and attention rows are stochastic") {
  DecoderFixture f;
  // Unit-scale latent: the 0.02 init sits where layer norm curvature swamps
  // central differences at eps 1e-5.
  const auto unit = test::randn(f.dec.latent_init.size(), f.rng);
  std::copy(unit.begin(), unit.end(), f.dec.latent_init.value().begin());
  std::vector<Tensor> params = f.ps.tensors();
  params.push_back(Tensor::parameter({10, 8}, test::randn(80, f.rng)));
  const auto r = ad::grad_check(
      [&] {
        const EncodedFeatures z{params.back()};
        const auto v1 = f.dec.decode(z, f.dec.initial(), 1);
        return test::probe(f.dec.classify(f.dec.decode(z, v1, 2)));
      },
      params);
  CHECK(r.max_rel_error < 1e-4);

  DecoderProbe probe;
  f.dec.decode(f.z, f.dec.initial(), 1, &probe);
  REQUIRE(probe.cross_attention.size() == f.cfg.decoder_heads);
  REQUIRE(probe.self_attention.size() == f.cfg.decoder_heads);
  for (const auto* group : {&probe.cross_attention, &probe.self_attention})
    for (const auto& a : *group)
      for (std::size_t row = 0; row < a.rows(); ++row) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(row, c);
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
}

TEST_CASE("latent depends on every earlier pass") {
  DecoderFixture f;
  const EncodedFeatures z2{Tensor::constant({10, 8}, test::randn(80, f.rng))};
  const EncodedFeatures z3{Tensor::constant({10, 8}, test::randn(80, f.rng))};
  auto run = [&](const EncodedFeatures& z1) {
    auto v = f.dec.decode(z1, f.dec.initial(), 1);
    v = f.dec.decode(z2, v, 2);
    return f.dec.decode(z3, v, 3);
  };
  const auto a = run(f.z);
  const auto b = run(EncodedFeatures{Tensor::zeros({10, 8})});
  double diff = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) diff += std::abs(a.v.value()[i] - b.v.value()[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("classify") {
  DecoderFixture f;
  const DecoderLatent v{Tensor::constant({3, 8}, test::randn(24, f.rng)), 1};
  SUBCASE("zero head gives uniform probabilities") {
    std::fill(f.dec.head.weight.value().begin(), f.dec.head.weight.value().end(), 0.0);
    const auto logits = f.dec.classify(v);
    for (double l : logits.value()) CHECK(l == 0.0);
    for (double p : pass_probabilities(logits, LabelMode::kSingle)) CHECK(p == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("token order does not matter") {
    const std::vector<std::size_t> perm{2, 0, 1};
    const DecoderLatent w{ad::gather_rows(v.v, perm), 1};
    const auto a = f.dec.classify(v), b = f.dec.classify(w);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.value()[k] == doctest::Approx(b.value()[k]).epsilon(1e-14));
  }
  SUBCASE("linear with zero bias") {
    const DecoderLatent w{ad::scale(v.v, 2.0), 1};
    const auto a = f.dec.classify(v), b = f.dec.classify(w);
    for (std::size_t k = 0; k < 3; ++k) CHECK(b.value()[k] == doctest::Approx(2.0 * a.value()[k]).epsilon(1e-14));
  }
}

TEST_CASE("forward_all_passes structure") {
  SUBCASE("N = 0 runs one pass without the selector") {
    PlayItBackModel m(test::tiny_config(0));
    const auto trace = m.forward_all_passes(chirp(1.0, 1));
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].hop_ms == 10.0);
    CHECK_FALSE(trace[0].slots.slots.defined());
    CHECK(trace[0].selected.intervals.empty());
  }
  SUBCASE("N = 3 uses hops 10, 9, 8, 7 and a constant frame count") {
    PlayItBackModel m(test::tiny_config(3));
    const auto clip = chirp(1.0, 2);
    const auto trace = m.forward_all_passes(clip);
    REQUIRE(trace.size() == 4);
    for (std::size_t p = 0; p < 4; ++p) {
      CHECK(trace[p].pass_index == static_cast<int>(p + 1));
      CHECK(trace[p].hop_ms == 10.0 - static_cast<double>(p));
      CHECK(trace[p].input.n_frames == 100);
      CHECK(trace[p].z.z.rows() == 10);
      CHECK(trace[p].logits.cols() == 3);
    }
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(trace[p].frame_saliency.size() == 100);
      const auto& sel = trace[p].selected;
      REQUIRE_FALSE(sel.intervals.empty());
      for (std::size_t i = 0; i < sel.intervals.size(); ++i) {
        CHECK(sel.intervals[i].first >= 0.0);
        CHECK(sel.intervals[i].second <= 1.0 + 1e-12);
        if (i > 0) CHECK(sel.intervals[i - 1].second <= sel.intervals[i].first);
      }
      CHECK(trace[p + 1].input_segments.intervals == sel.intervals);
    }
  }
  SUBCASE("too many passes for the embedding table") {
    auto cfg = test::tiny_config(3);
    cfg.max_passes = 3;
    CHECK_THROWS_AS(PlayItBackModel{cfg}, ConfigError);
  }
  SUBCASE("other sample rates are resampled") {
    PlayItBackModel m(test::tiny_config(1));
    AudioClip c = resample(chirp(1.0, 3), 8000);
    CHECK(m.forward_all_passes(c)[0].input.n_frames == 100);
  }
}

TEST_CASE("evaluation forward is deterministic, training forward is seeded") {
  PlayItBackModel m(test::tiny_config(2));
  const auto clip = chirp(1.0, 4);
  const auto a = m.forward_all_passes(clip), b = m.forward_all_passes(clip);
  for (std::size_t p = 0; p < a.size(); ++p)
    CHECK(std::equal(a[p].logits.value().begin(), a[p].logits.value().end(), b[p].logits.value().begin()));
  std::mt19937_64 r1(9), r2(9);
  const auto c = m.forward_all_passes(clip, &r1), d = m.forward_all_passes(clip, &r2);
  for (std::size_t p = 0; p < c.size(); ++p)
    CHECK(std::equal(c[p].logits.value().begin(), c[p].logits.value().end(), d[p].logits.value().begin()));
}

TEST_CASE("inference averages per-pass probabilities") {
  PlayItBackModel m(test::tiny_config(2));
  const auto clip = chirp(1.0, 5);
  const auto trace = m.forward_all_passes(clip);
  const auto probs = m.infer(clip);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double mean = 0.0;
    for (const auto& rec : trace) mean += pass_probabilities(rec.logits, LabelMode::kSingle)[k];
    CHECK(std::abs(probs[k] - mean / 3.0) <= 1e-12);
  }
  double total = 0.0;
  for (double p : probs) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-10);

  CHECK(average_probabilities({{0.2, 0.8}, {0.6, 0.4}})[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(average_probabilities({{0.2, 0.8}, {0.6, 0.4}})[1] == doctest::Approx(0.6).epsilon(1e-15));
  for (double p : average_probabilities({{0.1, 0.9}, {0.1, 0.9}, {0.1, 0.9}}))
    CHECK((std::abs(p - 0.1) <= 1e-12 || std::abs(p - 0.9) <= 1e-12));

  PlayItBackModel single(test::tiny_config(0));
  const auto t0 = single.forward_all_passes(clip);
  CHECK(single.infer(clip) == pass_probabilities(t0[0].logits, LabelMode::kSingle));
}

TEST_CASE("multi-label probabilities are per-class sigmoids") {
  const auto p = pass_probabilities(Tensor::constant({1, 3}, {0.0, 800.0, -800.0}), LabelMode::kMulti);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 1.0);
  CHECK(p[2] >= 0.0);
  CHECK(p[2] < 1e-300);
}

TEST_CASE("end-to-end grad_check on the tiny model") {
  PlayItBackModel m(test::tiny_config(1));
  const auto clip = chirp(1.0, 6);
  const auto target = std::vector<double>{0.0, 1.0, 0.0};
  const auto r = ad::grad_check(
      [&] {
        const auto trace = m.forward_all_passes(clip);
        Tensor total = Tensor::scalar(0.0);
        for (const auto& rec : trace)
          total = ad::add(total, ad::sum(ad::mul(ad::log_softmax(rec.logits, 1),
                                                 Tensor::constant({1, 3}, target))));
        return ad::scale(total, -1.0);
      },
      m.params().tensors());
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("model save and load round trip") {
  auto cfg = test::tiny_config(2);
  cfg.init_seed = 77;
  PlayItBackModel m(cfg);
  const auto path = std::filesystem::temp_directory_path() / "pib_model_test.pibk";
  save_model(path, m);
  CHECK(std::filesystem::exists(config_sidecar(path)));
  const auto back = load_model(path);
  CHECK(back->config().n_playbacks == 2);
  CHECK(encode_checkpoint(back->params()) == encode_checkpoint(m.params()));
  const auto clip = chirp(1.0, 7);
  CHECK(back->infer(clip) == m.infer(clip));
  std::filesystem::remove(path);
  std::filesystem::remove(config_sidecar(path));
}

TEST_CASE("trace JSON lists every pass") {
  PlayItBackModel m(test::tiny_config(2));
  const auto report = trace_to_json(m.forward_all_passes(chirp(1.0, 8)), LabelMode::kSingle);
  CHECK(report["average_probabilities"].size() == 3);
  const auto& j = report["passes"];
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 3);
  CHECK(j[2]["hop_ms"] == 8.0);
  CHECK(j[0].contains("selected_segments"));
  CHECK_FALSE(j[2].contains("selected_segments"));
  CHECK(j[1]["logits"].size() == 3);
}
