// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "playitback/dsp.hpp"

namespace pib {

enum class LabelMode { kSingle, kMulti };

/// Thresholding rules that turn a saliency curve into replay segments.
struct SelectionConfig {
  double threshold = 0.5;
  std::size_t merge_gap_frames = 5;
  double min_select_s = 0.25;
};

/// Geometry and sizes of the whole model. Defaults are the desk-scale setup
/// (2 s clips, 32 mel bins, 16x10 patches, two playbacks).
struct ModelConfig {
  FrontendConfig frontend{16000, 32, 25.0, 512, 10.0, 1.0};
  double clip_seconds = 2.0;
  std::size_t patch_f = 16;
  std::size_t patch_t = 10;
  std::size_t width = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t slot_dim = 64;
  std::size_t slot_iters = 3;
  std::size_t latent_tokens = 8;
  std::size_t decoder_heads = 4;
  std::size_t n_playbacks = 2;
  std::size_t max_passes = 8;
  std::size_t n_classes = 4;
  LabelMode label_mode = LabelMode::kSingle;
  SelectionConfig selection;
  std::uint64_t init_seed = 1;

  std::size_t n_passes() const { return n_playbacks + 1; }
  /// Frame count of every model input (the pass-1 frame count of a clip_seconds clip).
  std::size_t n_frames() const;
  std::size_t grid_f() const { return frontend.n_mels / patch_f; }
  std::size_t grid_t() const { return n_frames() / patch_t; }

  /// Throws ConfigError describing the first problem found.
  void validate() const;

  /// Full-scale front end and patch geometry: 10 s clips, 128 mel bins,
  /// 16x20 patches (an 8x50 grid).
  static ModelConfig full_geometry();
};

void to_json(nlohmann::json& j, const FrontendConfig& c);
void from_json(const nlohmann::json& j, FrontendConfig& c);
void to_json(nlohmann::json& j, const SelectionConfig& c);
void from_json(const nlohmann::json& j, SelectionConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

std::string to_string(LabelMode m);
LabelMode label_mode_from_string(const std::string& s);

}  // namespace pib
