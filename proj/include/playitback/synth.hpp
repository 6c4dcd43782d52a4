// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "playitback/dsp.hpp"

namespace pib {

/// Micro-gap task: class c is a pair of identical tone bursts separated by
/// gaps_ms[c], hidden at a random offset in Gaussian noise among 1-3 single
/// distractor bursts.
struct SynthSpec {
  std::vector<double> gaps_ms{2.0, 4.0, 6.0, 8.0};
  double clip_s = 2.0;
  double tone_hz = 1000.0;
  double burst_ms = 10.0;
  std::optional<double> snr_db = 10.0;  // burst power over noise power; nullopt = no noise
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::uint64_t seed = 0;
  int sample_rate = 16000;
  double amplitude = 0.5;
  std::size_t min_distractors = 1;
  std::size_t max_distractors = 3;
  double finest_hop_ms = 8.0;

  std::size_t n_classes() const { return gaps_ms.size(); }
  void validate() const;
};

/// Where the class pattern landed inside a generated clip.
struct SynthPlacement {
  int label = 0;
  double pair_start_s = 0.0;
  double pair_end_s = 0.0;
  std::vector<double> distractor_starts_s;
};

struct Dataset {
  std::vector<AudioClip> clips;
  std::vector<int> labels;
  std::vector<std::string> paths;
  std::size_t size() const { return clips.size(); }
};

/// One burst of `burst_ms` starting at phase zero, with 1 ms raised-cosine edges.
std::vector<double> tone_burst(const SynthSpec& spec);
/// The noise-free class pattern (burst, gap, burst).
std::vector<double> burst_pair(const SynthSpec& spec, double gap_ms);

AudioClip synth_clip(const SynthSpec& spec, int label, std::mt19937_64& rng,
                     SynthPlacement* placement = nullptr);

/// Deterministic split: sample i has label i mod n_classes and its own
/// random stream seeded from (seed, split, i).
Dataset synth_split(const SynthSpec& spec, const std::string& split, std::size_t count);

/// Human-readable warnings about configurations the model may not resolve.
std::vector<std::string> synth_warnings(const SynthSpec& spec);

/// Writes DIR/train/*.wav, DIR/val/*.wav, DIR/train.csv, DIR/val.csv
/// (header "path,label", paths relative to DIR) and DIR/spec.json.
void gen_synthetic_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Reads a "path,label" manifest; relative paths resolve against its directory.
Dataset load_manifest(const std::filesystem::path& csv);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace pib
