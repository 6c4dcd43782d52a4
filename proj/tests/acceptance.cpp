// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "playitback/dsp.hpp"
#include "playitback/gradcheck.hpp"
#include "playitback/losses.hpp"
#include "playitback/metrics.hpp"
#include "playitback/model.hpp"
#include "playitback/slot_selector.hpp"
#include "playitback/synth.hpp"
#include "playitback/trainer.hpp"

namespace fs = std::filesystem;
using namespace pib;
using ad::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = run_gradient_suite(true);
  const double secs = seconds_since(t0);
  double worst_prim = 0.0, worst_comp = 0.0;
  std::string failed;
  for (const auto& c : cases) {
    double& w = c.tolerance <= kPrimitiveGradTol ? worst_prim : worst_comp;
    w = std::max(w, c.max_rel_error);
    if (!c.passed()) failed += " " + c.name;
  }
  Outcome o;
  o.pass = failed.empty() && secs < 300.0;
  o.detail = std::to_string(cases.size()) + " checks, primitives max " + fmt("%.2e", worst_prim) +
             ", components max " + fmt("%.2e", worst_comp) + ", " + fmt("%.1f", secs) + " s";
  if (!failed.empty()) o.detail += ", failed:" + failed;
  return o;
}

// ---------------------------------------------------------------- 2, 3

double brute_rank(const std::vector<double>& p, std::size_t i, double gamma) {
  double total = 0.0;
  for (std::size_t m = 1; m < i; ++m) {
    const double slack = gamma - p[i - 1] + p[m - 1];
    if (slack > 0.0) total += slack / static_cast<double>(i - m);
  }
  return total;
}

std::vector<Tensor> as_tensors(const std::vector<double>& p) {
  std::vector<Tensor> out;
  for (double v : p) out.push_back(Tensor::constant({1, 1}, {v}));
  return out;
}

Outcome rank_oracle() {
  std::mt19937_64 rng(20260);
  std::uniform_int_distribution<std::size_t> pass(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0), g(0.0, 0.2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t i = pass(rng);
    std::vector<double> p(i);
    for (double& v : p) v = u(rng);
    const double gamma = g(rng);
    worst = std::max(worst, std::abs(rank_loss(as_tensors(p), i, gamma).item() - brute_rank(p, i, gamma)));
  }
  return {worst <= 1e-12, "1000 cases, max |diff| " + fmt("%.2e", worst)};
}

double cross_entropy(const std::vector<double>& logits, std::size_t label) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  return -(logits[label] - mx - std::log(z));
}

Outcome loss_composition() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 2.0);
  const LossConfig cfg;
  const std::size_t k = 6;
  double worst = 0.0, worst_p1 = 0.0;
  for (std::size_t passes : {1, 2, 4}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t label = static_cast<std::size_t>(trial) % k;
      std::vector<std::vector<double>> logits(passes, std::vector<double>(k));
      std::vector<Tensor> ts;
      std::vector<double> p;
      for (auto& l : logits) {
        for (double& v : l) v = n(rng);
        ts.push_back(Tensor::constant({1, k}, l));
        p.push_back(std::exp(-cross_entropy(l, label)));
      }
      double expect = cross_entropy(logits[0], label);
      for (std::size_t i = 2; i <= passes; ++i)
        expect += cfg.beta * cross_entropy(logits[i - 1], label) + (1.0 - cfg.beta) * brute_rank(p, i, cfg.gamma);
      const auto target = one_hot(static_cast<int>(label), k);
      const double got = total_loss(ts, target, cfg).item();
      worst = std::max(worst, std::abs(got - expect));
      if (passes == 1)
        worst_p1 = std::max(worst_p1, std::abs(got - classification_loss(ts[0], target, LabelMode::kSingle).item()));
    }
  }
  return {worst <= 1e-12 && worst_p1 <= 1e-12,
          "P in {1,2,4}, max |diff| " + fmt("%.2e", worst) + ", P=1 vs CE " + fmt("%.2e", worst_p1)};
}

// ---------------------------------------------------------------- 4

AudioClip noise_clip(double seconds, int rate, std::uint64_t seed) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& s : c.samples) s = n(rng);
  return c;
}

Outcome shape_law() {
  const AudioClip clip = noise_clip(10.0, 16000, 4);
  const auto spec = log_mel_spectrogram(clip, 10.0, 128, 25.0, 512);
  bool ok = spec.n_mels == 128 && spec.n_frames == 1000;
  std::string detail = "spectrogram " + std::to_string(spec.n_mels) + "x" + std::to_string(spec.n_frames);

  ModelConfig cfg = ModelConfig::full_geometry();
  cfg.width = 16;
  cfg.slot_dim = 16;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.decoder_heads = 2;
  cfg.latent_tokens = 4;
  cfg.n_playbacks = 3;
  PlayItBackModel model(cfg);
  const auto trace = model.forward_all_passes(clip);
  const double expect_hops[] = {10.0, 9.0, 8.0, 7.0};
  detail += ", hops";
  ok = ok && trace.size() == 4;
  for (std::size_t p = 0; p < trace.size(); ++p) {
    detail += " " + fmt("%g", trace[p].hop_ms);
    ok = ok && p < 4 && trace[p].hop_ms == expect_hops[p] && trace[p].input.n_frames == spec.n_frames &&
         trace[p].input.n_mels == 128;
  }
  detail += ", pass frames";
  for (const auto& r : trace) detail += " " + std::to_string(r.input.n_frames);
  return {ok, detail};
}

// ---------------------------------------------------------------- 5

Outcome dprime_anchor() {
  const double a = d_prime(0.978);
  const double b = d_prime(0.5);
  return {std::abs(a - 2.846) <= 0.01 && b == 0.0,
          "d'(0.978) = " + fmt("%.4f", a) + ", d'(0.5) = " + fmt("%g", b)};
}

// ---------------------------------------------------------------- 6

Outcome selector_properties() {
  bool ok = true;
  double worst_w = 0.0, worst_row = 0.0;
  double curve_lo = 1.0, curve_hi = 0.0;

  // Slot iterations on encoder features of real synthetic clips.
  ModelConfig cfg;
  PlayItBackModel model(cfg);
  SynthSpec sp;
  const Dataset d = synth_split(sp, "accept", 6);
  std::mt19937_64 rng(6);
  for (const auto& clip : d.clips) {
    ad::NoGradGuard no_grad;
    const auto z = model.encoder(standardize(model.pass_input(clip, SegmentSet::whole(clip), 1)));
    const auto in = model.selector.project_inputs(z);
    auto s = model.selector.init_slots(&rng);
    for (std::size_t j = 1; j <= cfg.slot_iters; ++j) {
      SlotIterationProbe probe;
      s = model.selector.iterate(in, s, j, &probe);
      for (std::size_t t = 0; t < probe.weights.rows(); ++t)
        worst_w = std::max(worst_w, std::abs(probe.weights.at(t, 0) + probe.weights.at(t, 1) - 1.0));
    }
    const auto s1 = s.informative(), s2 = s.uninformative();
    const auto m = saliency_matrix(s1, s2);
    const std::size_t dim = s1.size();
    for (std::size_t r = 0; r < dim; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        ok = ok && m[r * dim + c] >= 0.0;
        row += m[r * dim + c];
      }
      worst_row = std::max(worst_row, std::abs(row - 1.0));
    }
    const auto curve = saliency_diagonal(s);
    for (double v : curve.values) {
      curve_lo = std::min(curve_lo, v);
      curve_hi = std::max(curve_hi, v);
    }
  }
  ok = ok && worst_w <= 1e-12 && worst_row <= 1e-12 && curve_lo >= 0.0 && curve_hi <= 1.0 &&
       (curve_lo == 0.0 || curve_hi == curve_lo) && curve_hi == 1.0;

  // Random curves through select_segments.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> frames(1, 400), len(1, 80);
  int bad = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(len(rng));
    const double density = u(rng);
    for (double& x : v) x = u(rng) < density ? u(rng) : 0.0;
    const std::size_t t = frames(rng);
    const double hop = 7.0 + 3.0 * u(rng);
    const double duration = t * hop / 1000.0 * (trial % 3 == 0 ? u(rng) : 1.0) + 1e-3;
    SelectionConfig sc;
    sc.merge_gap_frames = static_cast<std::size_t>(trial % 7);
    sc.min_select_s = trial % 4 == 0 ? 0.0 : 0.25;
    const auto s = select_segments({v}, t, hop, sc, duration);
    bool valid = !s.intervals.empty();
    for (std::size_t i = 0; i < s.intervals.size(); ++i) {
      const auto [a, b] = s.intervals[i];
      valid = valid && a >= 0.0 && b <= duration + 1e-12 && a < b;
      if (i > 0) valid = valid && s.intervals[i - 1].second < a;
    }
    bad += valid ? 0 : 1;
  }
  ok = ok && bad == 0;

  // Planted step.
  std::vector<double> step(1000, 0.0);
  for (std::size_t i = 300; i < 450; ++i) step[i] = 1.0;
  const auto s = select_segments({step}, 1000, 10.0);
  const bool step_ok = s.intervals.size() == 1 && std::abs(s.intervals[0].first - 3.0) <= 0.010 &&
                       std::abs(s.intervals[0].second - 4.5) <= 0.010;
  ok = ok && step_ok;

  std::string detail = "weights " + fmt("%.1e", worst_w) + ", M rows " + fmt("%.1e", worst_row) + ", curve [" +
                       fmt("%g", curve_lo) + ", " + fmt("%g", curve_hi) + "], " + std::to_string(bad) +
                       "/2000 invalid segment sets, step ";
  detail += step_ok ? "recovered" : "missed";
  return {ok, detail};
}

// ---------------------------------------------------------------- 7

TrainConfig small_train_config() {
  TrainConfig tc;
  tc.model.width = 16;
  tc.model.slot_dim = 16;
  tc.model.depth = 1;
  tc.model.heads = 2;
  tc.model.decoder_heads = 2;
  tc.model.latent_tokens = 4;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 11;
  return tc;
}

int run(const std::string& cmd) {
  return std::system((cmd + " > /dev/null 2>&1").c_str());
}

Outcome determinism(const fs::path& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  SynthSpec sp;
  sp.n_train = 32;
  sp.n_val = 16;
  nlohmann::json sj = sp;
  std::ofstream(work / "spec.json") << sj.dump(2);
  nlohmann::json cj = small_train_config();
  std::ofstream(work / "cfg.json") << cj.dump(2);

  const std::string exe = "\"" + cli.string() + "\"";
  if (run(exe + " gen-data --spec " + (work / "spec.json").string() + " --out " + (work / "data").string()) != 0)
    return {false, "gen-data failed"};
  for (const char* name : {"a", "b"}) {
    const fs::path out = work / (std::string(name) + ".pibk");
    if (run(exe + " train --quiet --config " + (work / "cfg.json").string() + " --data " +
            (work / "data").string() + " --out " + out.string()) != 0)
      return {false, std::string("train run ") + name + " failed"};
  }
  const auto log_a = read_bytes(work / "a.pibk.log.csv"), log_b = read_bytes(work / "b.pibk.log.csv");
  const auto ck_a = read_bytes(work / "a.pibk"), ck_b = read_bytes(work / "b.pibk");
  const bool ok = !log_a.empty() && !ck_a.empty() && log_a == log_b && ck_a == ck_b;
  return {ok, "logs " + std::to_string(log_a.size()) + " B " + (log_a == log_b ? "identical" : "differ") +
                  ", checkpoints " + std::to_string(ck_a.size()) + " B " + (ck_a == ck_b ? "identical" : "differ")};
}

// ---------------------------------------------------------------- 8

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig tc;
  const Dataset batch = synth_split(SynthSpec{}, "overfit", 8);
  PlayItBackModel model(tc.model);
  OptimState opt;
  opt.momentum_coef = tc.momentum;
  opt.weight_decay = tc.weight_decay;
  opt.max_grad_norm = tc.max_grad_norm;
  std::vector<std::vector<double>> targets;
  for (int l : batch.labels) targets.push_back(one_hot(l, tc.model.n_classes));
  std::mt19937_64 rng(tc.seed);
  double top1 = 0.0, loss = 0.0;
  std::size_t step = 0;
  while (step < 200 && top1 < 100.0) {
    loss = train_step(model, opt, batch.clips, targets, tc.loss, tc.base_lr, rng);
    ++step;
    if (step % 10 == 0) top1 = evaluate(model, batch).metrics.top1;
  }
  const double secs = seconds_since(t0);
  return {top1 == 100.0 && secs < 300.0, "top-1 " + fmt("%.1f", top1) + "% after " + std::to_string(step) +
                                             " steps, loss " + fmt("%.4f", loss) + ", " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 9

// Shared by both arms; only n_playbacks differs.
TrainConfig trend_config(std::size_t n_playbacks, std::uint64_t seed) {
  TrainConfig tc;
  tc.model.width = 32;
  tc.model.slot_dim = 32;
  tc.model.depth = 2;
  tc.model.heads = 2;
  tc.model.decoder_heads = 2;
  tc.model.n_playbacks = n_playbacks;
  tc.model.init_seed = seed + 1;
  tc.epochs = 30;
  tc.base_lr = 0.01;
  tc.seed = seed;
  return tc;
}

SynthSpec trend_data() {
  SynthSpec sp;
  sp.burst_ms = 2.0;
  sp.snr_db.reset();
  return sp;
}

Outcome playback_trend(bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthSpec sp = trend_data();
  const Dataset tr = synth_split(sp, "train", 2000), va = synth_split(sp, "val", 500);
  double mean[2] = {0.0, 0.0};
  std::string detail;
  const std::size_t arms[2] = {0, 2};
  for (int a = 0; a < 2; ++a) {
    detail += a ? "; N=2" : "N=0";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto r = train(trend_config(arms[a], seed), tr, va, {});
      const double top1 = r.epochs.back().val.metrics.top1;
      mean[a] += top1 / 3.0;
      detail += " " + fmt("%.1f", top1);
      if (verbose) std::cerr << "  N=" << arms[a] << " seed " << seed << ": " << top1 << "% (" << seconds_since(t0) << " s)\n";
    }
  }
  const double secs = seconds_since(t0);
  detail += "; mean " + fmt("%.1f", mean[0]) + " -> " + fmt("%.1f", mean[1]) + " (" + fmt("%+.1f", mean[1] - mean[0]) +
            " pts), " + fmt("%.0f", secs) + " s";
  return {mean[1] - mean[0] >= 5.0 && secs < 3600.0, detail};
}

// ---------------------------------------------------------------- 10

Outcome inference_averaging() {
  ModelConfig cfg;
  PlayItBackModel model(cfg);
  const Dataset d = synth_split(SynthSpec{}, "accept", 8);
  double worst_mean = 0.0, worst_sum = 0.0;
  for (const auto& clip : d.clips) {
    const auto trace = model.forward_all_passes(clip);
    const auto got = model.infer(clip);
    std::vector<double> expect(cfg.n_classes, 0.0);
    for (const auto& rec : trace) {
      const auto p = pass_probabilities(rec.logits, cfg.label_mode);
      for (std::size_t k = 0; k < p.size(); ++k) expect[k] += p[k] / static_cast<double>(trace.size());
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      worst_mean = std::max(worst_mean, std::abs(got[k] - expect[k]));
      sum += got[k];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  return {worst_mean <= 1e-12 && worst_sum <= 1e-10,
          "max |infer - mean| " + fmt("%.1e", worst_mean) + ", max |sum - 1| " + fmt("%.1e", worst_sum)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PlayItBack acceptance criteria"};
  std::vector<int> only;
  std::string cli;
  std::string work = (fs::temp_directory_path() / "playitback_acceptance").string();
  std::string report;
  bool verbose = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--cli", cli, "Path of the playitback executable (criterion 7)");
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_option("--report", report, "JSON report path");
  app.add_flag("-v,--verbose", verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "gradient suite", gradient_suite},
      {2, "rank loss oracle", rank_oracle},
      {3, "loss composition", loss_composition},
      {4, "shape law", shape_law},
      {5, "d-prime anchor", dprime_anchor},
      {6, "selector properties", selector_properties},
      {7, "determinism", [&] {
         if (cli.empty()) return Outcome{false, "--cli not given"};
         return determinism(cli, fs::path(work) / "determinism");
       }},
      {8, "overfit sanity", overfit},
      {9, "playback trend", [&] { return playback_trend(verbose); }},
      {10, "inference averaging", inference_averaging},
  };

  nlohmann::json out = nlohmann::json::array();
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
              << std::endl;
    out.push_back({{"criterion", c.id}, {"name", c.name}, {"pass", o.pass}, {"detail", o.detail}});
  }
  if (!report.empty()) std::ofstream(report) << out.dump(2) << "\n";
  return failures == 0 ? 0 : 1;
}
