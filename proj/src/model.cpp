// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/model.hpp"

#include <cmath>
#include <fstream>
#include <memory>

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

namespace {

ModelConfig validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

PlayItBackModel::PlayItBackModel(const ModelConfig& cfg) : cfg_(validated(cfg)) {
  std::mt19937_64 rng(cfg_.init_seed);
  encoder = Encoder(params_, cfg_, rng);
  selector = SlotAttention(params_, cfg_, rng);
  decoder = PlaybackDecoder(params_, cfg_, rng);
}

MelSpectrogram PlayItBackModel::pass_input(const AudioClip& clip, const SegmentSet& segs, int pass_index) const {
  return fit_to_frames(make_playback_input(clip, segs, pass_index, cfg_.frontend), cfg_.n_frames());
}

PlaybackTrace PlayItBackModel::forward_all_passes(const AudioClip& input_clip, std::mt19937_64* rng) const {
  const AudioClip clip = input_clip.sample_rate == cfg_.frontend.sample_rate
                             ? input_clip
                             : resample(input_clip, cfg_.frontend.sample_rate);
  const int n_passes = static_cast<int>(cfg_.n_passes());
  const std::size_t t_model = cfg_.n_frames();
  PlaybackTrace trace;
  trace.reserve(static_cast<std::size_t>(n_passes));

  SegmentSet segs = SegmentSet::whole(clip);
  DecoderLatent latent = decoder.initial();
  for (int p = 1; p <= n_passes; ++p) {
    PassRecord rec;
    rec.pass_index = p;
    rec.hop_ms = cfg_.frontend.hop_for_pass(p);
    rec.input_segments = segs;
    rec.input = pass_input(clip, segs, p);
    rec.z = encoder(standardize(rec.input));
    latent = decoder.decode(rec.z, latent, p);
    rec.v = latent;
    rec.logits = decoder.classify(latent);

    if (p < n_passes) {
      // Selection is a hard decision: nothing here is differentiated.
      ad::NoGradGuard no_grad;
      rec.slots = selector.run(rec.z, cfg_.slot_iters, rng);
      rec.saliency = saliency_diagonal(rec.slots);
      rec.frame_saliency = interpolate_curve(rec.saliency.values, t_model);
      // Fitted column j sits at original frame j * (T_p - 1) / (t_model - 1).
      const std::size_t replay_len = extract_segments(clip, segs).samples.size();
      const std::size_t hop = hop_samples(rec.hop_ms, clip.sample_rate);
      const std::size_t t_pass = (replay_len + hop - 1) / hop;
      const double replay_s = static_cast<double>(replay_len) / clip.sample_rate;
      rec.frame_hop_ms = t_model > 1 ? static_cast<double>(t_pass - 1) * rec.hop_ms /
                                           static_cast<double>(t_model - 1)
                                     : rec.hop_ms;
      if (rec.frame_hop_ms <= 0.0) rec.frame_hop_ms = 1000.0 * replay_s / static_cast<double>(t_model);
      const SegmentSet local =
          select_segments(rec.saliency, t_model, rec.frame_hop_ms, cfg_.selection, replay_s);
      rec.selected = compose_segments(segs, local, clip.sample_rate);
      if (rec.selected.intervals.empty()) rec.selected = segs;
      segs = rec.selected;
    }
    trace.push_back(std::move(rec));
  }
  return trace;
}

std::vector<double> pass_probabilities(const Tensor& logits, LabelMode mode) {
  std::vector<double> p(logits.value().begin(), logits.value().end());
  if (mode == LabelMode::kMulti) {
    for (double& x : p) x = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return p;
  }
  double mx = p.empty() ? 0.0 : p[0];
  for (double x : p) mx = std::max(mx, x);
  double z = 0.0;
  for (double& x : p) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> average_probabilities(const std::vector<std::vector<double>>& per_pass) {
  if (per_pass.empty()) throw ContractError("average_probabilities: no passes");
  std::vector<double> avg(per_pass[0].size(), 0.0);
  for (const auto& p : per_pass) {
    if (p.size() != avg.size()) throw ShapeError("average_probabilities: class counts differ");
    for (std::size_t k = 0; k < p.size(); ++k) avg[k] += p[k];
  }
  for (double& a : avg) a /= static_cast<double>(per_pass.size());
  return avg;
}

std::vector<double> infer_from_trace(const PlaybackTrace& trace, LabelMode mode) {
  std::vector<std::vector<double>> per_pass;
  per_pass.reserve(trace.size());
  for (const auto& rec : trace) per_pass.push_back(pass_probabilities(rec.logits, mode));
  return average_probabilities(per_pass);
}

std::vector<double> PlayItBackModel::infer(const AudioClip& clip) const {
  ad::NoGradGuard no_grad;
  return infer_from_trace(forward_all_passes(clip, nullptr), cfg_.label_mode);
}

nlohmann::json trace_to_json(const PlaybackTrace& trace, LabelMode mode) {
  nlohmann::json passes = nlohmann::json::array();
  for (const auto& rec : trace) {
    nlohmann::json j;
    j["pass"] = rec.pass_index;
    j["hop_ms"] = rec.hop_ms;
    auto segs = nlohmann::json::array();
    for (const auto& [a, b] : rec.input_segments.intervals) segs.push_back({a, b});
    j["input_segments"] = segs;
    j["logits"] = std::vector<double>(rec.logits.value().begin(), rec.logits.value().end());
    j["probabilities"] = pass_probabilities(rec.logits, mode);
    if (!rec.selected.intervals.empty()) {
      auto sel = nlohmann::json::array();
      for (const auto& [a, b] : rec.selected.intervals) sel.push_back({a, b});
      j["selected_segments"] = sel;
    }
    passes.push_back(j);
  }
  return {{"passes", passes}, {"average_probabilities", infer_from_trace(trace, mode)}};
}

std::filesystem::path config_sidecar(const std::filesystem::path& ckpt) {
  return std::filesystem::path(ckpt.string() + ".json");
}

void save_model(const std::filesystem::path& path, const PlayItBackModel& model) {
  save_checkpoint(path, model.params());
  std::ofstream out(config_sidecar(path));
  if (!out) throw Error("cannot write " + config_sidecar(path).string());
  out << nlohmann::json(model.config()).dump(2) << "\n";
}

std::unique_ptr<PlayItBackModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(config_sidecar(path));
  if (!in) throw ParseError("missing model config " + config_sidecar(path).string());
  const ModelConfig cfg = nlohmann::json::parse(in).get<ModelConfig>();
  auto model = std::make_unique<PlayItBackModel>(cfg);
  load_checkpoint(path, model->params());
  return model;
}

}  // namespace pib
