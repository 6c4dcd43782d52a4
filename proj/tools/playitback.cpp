// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "playitback/errors.hpp"
#include "playitback/gradcheck.hpp"
#include "playitback/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw pib::ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw pib::ParseError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw pib::Error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

fs::path manifest_in(const fs::path& data, const std::string& split) {
  if (fs::is_regular_file(data)) return data;
  return data / (split + ".csv");
}

// Replay-timeline seconds back onto the clip timeline.
double to_clip_time(const pib::SegmentSet& segs, double t) {
  double offset = 0.0;
  for (const auto& [a, b] : segs.intervals) {
    if (t <= offset + (b - a)) return a + (t - offset);
    offset += b - a;
  }
  return segs.intervals.empty() ? t : segs.intervals.back().second;
}

bool inside(const pib::SegmentSet& segs, double t) {
  for (const auto& [a, b] : segs.intervals)
    if (t >= a && t <= b) return true;
  return false;
}

int cmd_gen_data(const fs::path& spec_path, const fs::path& out) {
  const auto spec = read_json(spec_path).get<pib::SynthSpec>();
  pib::gen_synthetic_dataset(spec, out);
  std::printf("wrote %zu train / %zu val clips to %s\n", spec.n_train, spec.n_val, out.c_str());
  return 0;
}

int cmd_train(const fs::path& cfg_path, const fs::path& data, const fs::path& out, fs::path log, bool quiet) {
  auto cfg = read_json(cfg_path).get<pib::TrainConfig>();
  cfg.verbose = !quiet;
  cfg.validate();
  const auto train_set = pib::load_manifest(manifest_in(data, "train"));
  pib::Dataset val_set;
  if (fs::exists(data / "val.csv")) val_set = pib::load_manifest(data / "val.csv");
  if (log.empty()) log = fs::path(out.string() + ".log.csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto result = pib::train(cfg, train_set, val_set, out, log);
  if (!val_set.clips.empty())
    std::printf("best val top-1 %.2f%% at epoch %zu; checkpoint %s\n", result.best_val_top1, result.best_epoch,
                out.c_str());
  else
    std::printf("trained %zu epochs; checkpoint %s\n", cfg.epochs, out.c_str());
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& data, const std::string& split, const fs::path& report) {
  const auto model = pib::load_model(ckpt);
  const auto set = pib::load_manifest(manifest_in(data, split));
  const auto r = pib::evaluate(*model, set);
  json j = pib::to_json(r);
  j["checkpoint"] = ckpt.string();
  j["manifest"] = manifest_in(data, split).string();
  write_json(report, j);
  const auto& m = r.metrics;
  std::printf("top-1 %.2f  top-5 %.2f  mAP %.4f  AUC %.4f  d' %.4f  (n=%zu)\n", m.top1, m.top5, m.mean_ap, m.auc,
              m.d_prime, m.n_samples);
  for (std::size_t p = 0; p < r.per_pass_top1.size(); ++p)
    std::printf("  pass %zu top-1 %.2f\n", p + 1, r.per_pass_top1[p]);
  return 0;
}

int cmd_inspect(const fs::path& ckpt, const fs::path& wav, const fs::path& dump) {
  const auto model = pib::load_model(ckpt);
  const auto clip = pib::load_wav(wav);
  pib::PlaybackTrace trace;
  {
    pib::ad::NoGradGuard no_grad;
    trace = model->forward_all_passes(clip);
  }
  fs::create_directories(dump);

  std::ofstream segs(dump / "segments.csv");
  segs << "pass,kind,start_s,end_s\n";
  for (const auto& rec : trace) {
    const std::string p = std::to_string(rec.pass_index);
    pib::write_spectrogram_pgm(dump / ("pass" + p + "_spectrogram.pgm"), rec.input);
    pib::write_spectrogram_csv(dump / ("pass" + p + "_spectrogram.csv"), rec.input);
    for (const auto& [a, b] : rec.input_segments.intervals) segs << p << ",input," << a << "," << b << "\n";
    for (const auto& [a, b] : rec.selected.intervals) segs << p << ",selected," << a << "," << b << "\n";
    if (rec.frame_saliency.empty()) continue;
    std::ofstream sal(dump / ("pass" + p + "_saliency.csv"));
    sal << "frame_index,time_s,saliency,selected\n";
    for (std::size_t j = 0; j < rec.frame_saliency.size(); ++j) {
      const double t = to_clip_time(rec.input_segments, static_cast<double>(j) * rec.frame_hop_ms / 1000.0);
      char line[128];
      std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%d\n", j, t, rec.frame_saliency[j],
                    inside(rec.selected, t) ? 1 : 0);
      sal << line;
    }
  }
  write_json(dump / "logits.json", pib::trace_to_json(trace, model->config().label_mode));
  std::printf("%zu passes written to %s\n", trace.size(), dump.c_str());
  return 0;
}

int cmd_gradcheck(bool full, const fs::path& report) {
  const auto cases = pib::run_gradient_suite(full);
  bool ok = true;
  double total = 0.0;
  for (const auto& c : cases) {
    std::printf("%-18s max rel err %.3e  tol %.0e  %6.2fs  %s\n", c.name.c_str(), c.max_rel_error, c.tolerance,
                c.seconds, c.passed() ? "ok" : "FAIL");
    ok = ok && c.passed();
    total += c.seconds;
  }
  std::printf("%zu checks, %.1f s, %s\n", cases.size(), total, ok ? "all passed" : "FAILURES");
  if (!report.empty()) write_json(report, cases);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PlayItBack: iterative audio replay classifier"};
  app.require_subcommand(1);

  fs::path spec, out, cfg, data, ckpt, report, wav, dump, log;
  std::string split = "val";
  bool quiet = false, full = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic micro-gap dataset");
  gen->add_option("--spec", spec, "SynthSpec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", cfg, "Training config JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory (train.csv, optional val.csv)")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Checkpoint path (.pibk)")->required();
  tr->add_option("--log", log, "Per-epoch CSV (default: <out>.log.csv)");
  tr->add_flag("--quiet", quiet, "No per-epoch output");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory or manifest CSV")->required()->check(CLI::ExistingPath);
  ev->add_option("--split", split, "Manifest to use when --data is a directory")->capture_default_str();
  ev->add_option("--report", report, "JSON report path")->required();

  auto* in = app.add_subcommand("inspect", "Dump saliency, segments, logits and spectrograms for one clip");
  in->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  in->add_option("--wav", wav, "Input WAV")->required()->check(CLI::ExistingFile);
  in->add_option("--dump", dump, "Output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_flag("--full", full, "Include the end-to-end model check");
  gc->add_option("--report", report, "Optional JSON report");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_data(spec, out);
    if (*tr) return cmd_train(cfg, data, out, log, quiet);
    if (*ev) return cmd_eval(ckpt, data, split, report);
    if (*in) return cmd_inspect(ckpt, wav, dump);
    if (*gc) return cmd_gradcheck(full, report);
  } catch (const pib::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
