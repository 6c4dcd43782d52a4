// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "json.hpp"
#include "playitback/config.hpp"
#include "playitback/decoder.hpp"
#include "playitback/dsp.hpp"
#include "playitback/encoder.hpp"
#include "playitback/params.hpp"
#include "playitback/slot_selector.hpp"

namespace pib {

/// Everything recorded for one forward pass over a (possibly replayed) clip.
struct PassRecord {
  int pass_index = 0;
  double hop_ms = 0.0;
  SegmentSet input_segments;  // what was replayed, on the original clip timeline
  MelSpectrogram input;       // model input before standardization
  EncodedFeatures z;
  DecoderLatent v;
  ad::Tensor logits;
  // Selection for the following pass; empty on the last pass.
  SlotState slots;
  SaliencyCurve saliency;
  std::vector<double> frame_saliency;
  double frame_hop_ms = 0.0;
  SegmentSet selected;
};

using PlaybackTrace = std::vector<PassRecord>;

class PlayItBackModel {
 public:
  explicit PlayItBackModel(const ModelConfig& cfg);
  PlayItBackModel(const PlayItBackModel&) = delete;
  PlayItBackModel& operator=(const PlayItBackModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  /// Runs all N + 1 passes. A non-null `rng` selects training behaviour
  /// (stochastic slot initialization); null is deterministic evaluation.
  PlaybackTrace forward_all_passes(const AudioClip& clip, std::mt19937_64* rng = nullptr) const;

  /// Spectrogram input of one pass, fitted to the model frame count.
  MelSpectrogram pass_input(const AudioClip& clip, const SegmentSet& segs, int pass_index) const;

  /// Average of per-pass probabilities.
  std::vector<double> infer(const AudioClip& clip) const;

  Encoder encoder;
  SlotAttention selector;
  PlaybackDecoder decoder;

 private:
  ModelConfig cfg_;
  ParameterStore params_;
};

/// Softmax (single-label) or per-class sigmoid (multi-label) of a 1 x K logit row.
std::vector<double> pass_probabilities(const ad::Tensor& logits, LabelMode mode);
std::vector<double> average_probabilities(const std::vector<std::vector<double>>& per_pass);
std::vector<double> infer_from_trace(const PlaybackTrace& trace, LabelMode mode);

/// Per-pass hop, segments, logits and probabilities.
nlohmann::json trace_to_json(const PlaybackTrace& trace, LabelMode mode);

/// Writes `path` (PIBK1 parameters) and `path`.json (model config).
void save_model(const std::filesystem::path& path, const PlayItBackModel& model);
std::unique_ptr<PlayItBackModel> load_model(const std::filesystem::path& path);
std::filesystem::path config_sidecar(const std::filesystem::path& ckpt);

}  // namespace pib
