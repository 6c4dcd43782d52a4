// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/config.hpp"

#include <cmath>

#include "playitback/errors.hpp"

namespace pib {

std::size_t ModelConfig::n_frames() const {
  const auto len = static_cast<std::size_t>(std::llround(clip_seconds * frontend.sample_rate));
  const std::size_t hop = hop_samples(frontend.base_hop_ms, frontend.sample_rate);
  return (len + hop - 1) / hop;
}

void ModelConfig::validate() const {
  if (clip_seconds <= 0.0) throw ConfigError("clip_seconds must be positive");
  if (n_passes() > max_passes)
    throw ConfigError("playback embedding table holds " + std::to_string(max_passes) +
                      " passes but " + std::to_string(n_passes()) + " are configured");
  frontend.validate(static_cast<int>(n_passes()));
  if (patch_f == 0 || patch_t == 0) throw ConfigError("patch sizes must be positive");
  const std::size_t t = n_frames();
  if (frontend.n_mels % patch_f != 0 || t % patch_t != 0) {
    std::string valid_f, valid_t;
    for (std::size_t d = 1; d <= frontend.n_mels; ++d)
      if (frontend.n_mels % d == 0) valid_f += (valid_f.empty() ? "" : ",") + std::to_string(d);
    for (std::size_t d = 1; d <= t; ++d)
      if (t % d == 0) valid_t += (valid_t.empty() ? "" : ",") + std::to_string(d);
    throw ConfigError("patch " + std::to_string(patch_f) + "x" + std::to_string(patch_t) +
                      " does not tile a " + std::to_string(frontend.n_mels) + "x" +
                      std::to_string(t) + " spectrogram; valid patch_f: {" + valid_f +
                      "}, valid patch_t: {" + valid_t + "}");
  }
  if (width == 0 || heads == 0 || width % heads != 0)
    throw ConfigError("width must be a positive multiple of heads");
  if (decoder_heads == 0 || width % decoder_heads != 0)
    throw ConfigError("width must be a multiple of decoder_heads");
  if (slot_dim == 0) throw ConfigError("slot_dim must be positive");
  if (slot_iters == 0) throw ConfigError("slot_iters (J) must be at least 1");
  if (latent_tokens == 0) throw ConfigError("latent_tokens must be positive");
  if (n_classes == 0) throw ConfigError("n_classes must be positive");
}

ModelConfig ModelConfig::full_geometry() {
  ModelConfig c;
  c.frontend.n_mels = 128;
  c.clip_seconds = 10.0;
  c.patch_f = 16;
  c.patch_t = 20;
  return c;
}

std::string to_string(LabelMode m) { return m == LabelMode::kSingle ? "single" : "multi"; }

LabelMode label_mode_from_string(const std::string& s) {
  if (s == "single") return LabelMode::kSingle;
  if (s == "multi") return LabelMode::kMulti;
  throw ConfigError("label_mode must be 'single' or 'multi', got '" + s + "'");
}

void to_json(nlohmann::json& j, const FrontendConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"n_mels", c.n_mels},         {"win_ms", c.win_ms},
       {"n_fft", c.n_fft},             {"base_hop_ms", c.base_hop_ms}, {"hop_decrement_ms", c.hop_decrement_ms}};
}

void from_json(const nlohmann::json& j, FrontendConfig& c) {
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.win_ms = j.value("win_ms", c.win_ms);
  c.n_fft = j.value("n_fft", c.n_fft);
  c.base_hop_ms = j.value("base_hop_ms", c.base_hop_ms);
  c.hop_decrement_ms = j.value("hop_decrement_ms", c.hop_decrement_ms);
}

void to_json(nlohmann::json& j, const SelectionConfig& c) {
  j = {{"threshold", c.threshold}, {"merge_gap_frames", c.merge_gap_frames}, {"min_select_s", c.min_select_s}};
}

void from_json(const nlohmann::json& j, SelectionConfig& c) {
  c.threshold = j.value("threshold", c.threshold);
  c.merge_gap_frames = j.value("merge_gap_frames", c.merge_gap_frames);
  c.min_select_s = j.value("min_select_s", c.min_select_s);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"frontend", c.frontend},
       {"clip_seconds", c.clip_seconds},
       {"patch_f", c.patch_f},
       {"patch_t", c.patch_t},
       {"width", c.width},
       {"depth", c.depth},
       {"heads", c.heads},
       {"mlp_ratio", c.mlp_ratio},
       {"slot_dim", c.slot_dim},
       {"slot_iters", c.slot_iters},
       {"latent_tokens", c.latent_tokens},
       {"decoder_heads", c.decoder_heads},
       {"n_playbacks", c.n_playbacks},
       {"max_passes", c.max_passes},
       {"n_classes", c.n_classes},
       {"label_mode", to_string(c.label_mode)},
       {"selection", c.selection},
       {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("frontend")) c.frontend = j.at("frontend").get<FrontendConfig>();
  c.clip_seconds = j.value("clip_seconds", c.clip_seconds);
  c.patch_f = j.value("patch_f", c.patch_f);
  c.patch_t = j.value("patch_t", c.patch_t);
  c.width = j.value("width", c.width);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.slot_dim = j.value("slot_dim", c.slot_dim);
  c.slot_iters = j.value("slot_iters", c.slot_iters);
  c.latent_tokens = j.value("latent_tokens", c.latent_tokens);
  c.decoder_heads = j.value("decoder_heads", c.decoder_heads);
  c.n_playbacks = j.value("n_playbacks", c.n_playbacks);
  c.max_passes = j.value("max_passes", c.max_passes);
  c.n_classes = j.value("n_classes", c.n_classes);
  if (j.contains("label_mode")) c.label_mode = label_mode_from_string(j.at("label_mode").get<std::string>());
  if (j.contains("selection")) c.selection = j.at("selection").get<SelectionConfig>();
  c.init_seed = j.value("init_seed", c.init_seed);
}

}  // namespace pib
