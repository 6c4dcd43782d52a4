// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "playitback/errors.hpp"

namespace pib {
namespace {

std::size_t ms_to_samples(double ms, int sr) {
  return static_cast<std::size_t>(std::llround(ms * sr / 1000.0));
}

std::uint64_t split_id(const std::string& split) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : split) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  return h;
}

void add_at(std::vector<double>& dst, const std::vector<double>& src, std::size_t offset) {
  for (std::size_t i = 0; i < src.size() && offset + i < dst.size(); ++i) dst[offset + i] += src[i];
}

}  // namespace

void SynthSpec::validate() const {
  if (gaps_ms.empty()) throw ConfigError("synth: at least one class gap is required");
  std::set<double> distinct(gaps_ms.begin(), gaps_ms.end());
  if (distinct.size() != gaps_ms.size()) throw ConfigError("synth: class gaps must be distinct");
  for (double g : gaps_ms)
    if (g < 0.0) throw ConfigError("synth: gaps must be non-negative");
  if (sample_rate <= 0 || clip_s <= 0.0 || burst_ms <= 0.0)
    throw ConfigError("synth: sample_rate, clip_s and burst_ms must be positive");
  const double longest = 2.0 * burst_ms + *std::max_element(gaps_ms.begin(), gaps_ms.end());
  const double budget = 1000.0 * clip_s;
  if (longest * static_cast<double>(2 + max_distractors) > budget)
    throw ConfigError("synth: pair plus distractors do not fit in a " + std::to_string(clip_s) + " s clip");
  if (min_distractors > max_distractors) throw ConfigError("synth: min_distractors > max_distractors");
}

std::vector<double> tone_burst(const SynthSpec& spec) {
  const std::size_t n = ms_to_samples(spec.burst_ms, spec.sample_rate);
  const std::size_t ramp = std::min(n / 2, ms_to_samples(1.0, spec.sample_rate));
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    double env = 1.0;
    if (ramp > 0 && i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    if (ramp > 0 && n - 1 - i < ramp)
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / ramp);
    b[i] = spec.amplitude * env * std::sin(2.0 * std::numbers::pi * spec.tone_hz * t);
  }
  return b;
}

std::vector<double> burst_pair(const SynthSpec& spec, double gap_ms) {
  const auto burst = tone_burst(spec);
  const std::size_t gap = ms_to_samples(gap_ms, spec.sample_rate);
  std::vector<double> out(2 * burst.size() + gap, 0.0);
  add_at(out, burst, 0);
  add_at(out, burst, burst.size() + gap);
  return out;
}

AudioClip synth_clip(const SynthSpec& spec, int label, std::mt19937_64& rng, SynthPlacement* placement) {
  if (label < 0 || static_cast<std::size_t>(label) >= spec.n_classes())
    throw ContractError("synth_clip: label out of range");
  const std::size_t len = ms_to_samples(1000.0 * spec.clip_s, spec.sample_rate);
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.assign(len, 0.0);

  const auto pair = burst_pair(spec, spec.gaps_ms[static_cast<std::size_t>(label)]);
  const auto burst = tone_burst(spec);
  const std::size_t guard = ms_to_samples(50.0, spec.sample_rate);

  std::uniform_int_distribution<std::size_t> pair_pos(0, len - pair.size());
  const std::size_t pair_at = pair_pos(rng);
  add_at(clip.samples, pair, pair_at);

  std::uniform_int_distribution<std::size_t> n_dist(spec.min_distractors, spec.max_distractors);
  const std::size_t n_distractors = n_dist(rng);
  std::vector<std::pair<std::size_t, std::size_t>> occupied{{pair_at, pair_at + pair.size()}};
  std::vector<double> distractor_starts;
  std::uniform_int_distribution<std::size_t> burst_pos(0, len - burst.size());
  for (std::size_t d = 0; d < n_distractors; ++d) {
    // Rejection sampling keeps distractors clear of everything already placed.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t at = burst_pos(rng);
      const bool clear = std::all_of(occupied.begin(), occupied.end(), [&](const auto& o) {
        return at + burst.size() + guard <= o.first || at >= o.second + guard;
      });
      if (!clear) continue;
      add_at(clip.samples, burst, at);
      occupied.emplace_back(at, at + burst.size());
      distractor_starts.push_back(static_cast<double>(at) / spec.sample_rate);
      break;
    }
  }

  if (spec.snr_db) {
    const double signal_power = 0.5 * spec.amplitude * spec.amplitude;
    const double noise_sd = std::sqrt(signal_power / std::pow(10.0, *spec.snr_db / 10.0));
    std::normal_distribution<double> noise(0.0, noise_sd);
    for (double& s : clip.samples) s += noise(rng);
  }
  for (double& s : clip.samples) s = std::clamp(s, -1.0, 1.0);

  if (placement) {
    placement->label = label;
    placement->pair_start_s = static_cast<double>(pair_at) / spec.sample_rate;
    placement->pair_end_s = static_cast<double>(pair_at + pair.size()) / spec.sample_rate;
    placement->distractor_starts_s = std::move(distractor_starts);
  }
  return clip;
}

Dataset synth_split(const SynthSpec& spec, const std::string& split, std::size_t count) {
  spec.validate();
  Dataset ds;
  ds.clips.reserve(count);
  const std::uint64_t sid = split_id(split);
  for (std::size_t i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(sid), static_cast<std::uint32_t>(sid >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const int label = static_cast<int>(i % spec.n_classes());
    ds.clips.push_back(synth_clip(spec, label, rng));
    ds.labels.push_back(label);
    char name[64];
    std::snprintf(name, sizeof(name), "%s/%06zu.wav", split.c_str(), i);
    ds.paths.emplace_back(name);
  }
  return ds;
}

std::vector<std::string> synth_warnings(const SynthSpec& spec) {
  std::vector<std::string> out;
  std::vector<double> gaps = spec.gaps_ms;
  std::sort(gaps.begin(), gaps.end());
  const double sample_ms = 1000.0 / spec.sample_rate;
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    if (gaps[i] - gaps[i - 1] < sample_ms)
      out.push_back("gaps " + std::to_string(gaps[i - 1]) + " and " + std::to_string(gaps[i]) +
                    " ms differ by less than one sample");
  }
  if (!gaps.empty() && gaps.back() < spec.finest_hop_ms)
    out.push_back("every class gap is shorter than the finest hop (" + std::to_string(spec.finest_hop_ms) +
                  " ms); classes differ only below frame resolution and the task may be unlearnable");
  return out;
}

void gen_synthetic_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  for (const auto& w : synth_warnings(spec)) std::cerr << "warning: " << w << "\n";
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& [split, count] : {std::pair<std::string, std::size_t>{"train", spec.n_train},
                                     std::pair<std::string, std::size_t>{"val", spec.n_val}}) {
    fs::create_directories(out_dir / split);
    const Dataset ds = synth_split(spec, split, count);
    std::ofstream manifest(out_dir / (split + ".csv"));
    if (!manifest) throw Error("cannot write manifest in " + out_dir.string());
    manifest << "path,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
      write_wav(out_dir / ds.paths[i], ds.clips[i]);
      manifest << ds.paths[i] << "," << ds.labels[i] << "\n";
    }
  }
  std::ofstream js(out_dir / "spec.json");
  js << nlohmann::json(spec).dump(2) << "\n";
}

Dataset load_manifest(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw ParseError("cannot open manifest " + csv.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("path,", 0) == 0) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos)
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": expected 'path,label'");
    const std::string rel = line.substr(0, comma);
    int label = 0;
    try {
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": label is not an integer");
    }
    const std::filesystem::path p =
        std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : csv.parent_path() / rel;
    try {
      ds.clips.push_back(load_wav(p));
    } catch (const Error& e) {
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ds.labels.push_back(label);
    ds.paths.push_back(rel);
  }
  return ds;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"gaps_ms", s.gaps_ms},
       {"clip_s", s.clip_s},
       {"tone_hz", s.tone_hz},
       {"burst_ms", s.burst_ms},
       {"snr_db", s.snr_db ? nlohmann::json(*s.snr_db) : nlohmann::json(nullptr)},
       {"n_train", s.n_train},
       {"n_val", s.n_val},
       {"seed", s.seed},
       {"sample_rate", s.sample_rate},
       {"amplitude", s.amplitude},
       {"min_distractors", s.min_distractors},
       {"max_distractors", s.max_distractors},
       {"finest_hop_ms", s.finest_hop_ms}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s.gaps_ms = j.value("gaps_ms", s.gaps_ms);
  s.clip_s = j.value("clip_s", s.clip_s);
  s.tone_hz = j.value("tone_hz", s.tone_hz);
  s.burst_ms = j.value("burst_ms", s.burst_ms);
  if (j.contains("snr_db")) {
    if (j.at("snr_db").is_null()) {
      s.snr_db.reset();
    } else {
      s.snr_db = j.at("snr_db").get<double>();
    }
  }
  s.n_train = j.value("n_train", s.n_train);
  s.n_val = j.value("n_val", s.n_val);
  s.seed = j.value("seed", s.seed);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  s.amplitude = j.value("amplitude", s.amplitude);
  s.min_distractors = j.value("min_distractors", s.min_distractors);
  s.max_distractors = j.value("max_distractors", s.max_distractors);
  s.finest_hop_ms = j.value("finest_hop_ms", s.finest_hop_ms);
}

}  // namespace pib
