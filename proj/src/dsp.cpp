// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "playitback/errors.hpp"

namespace pib {
namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
class RealFftPlan {
 public:
  explicit RealFftPlan(std::size_t n) : n_(n) {
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFftPlan() { fftw_destroy_plan(plan_); }
  RealFftPlan(const RealFftPlan&) = delete;
  RealFftPlan& operator=(const RealFftPlan&) = delete;

  void execute(double* in, fftw_complex* out) const {
    fftw_execute_dft_r2c(plan_, in, out);
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

const RealFftPlan& plan_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<RealFftPlan>> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<RealFftPlan>(n);
  return *slot;
}

struct FftwRealBuffer {
  explicit FftwRealBuffer(std::size_t n) : data(fftw_alloc_real(n)) {}
  ~FftwRealBuffer() { fftw_free(data); }
  double* data;
};

struct FftwComplexBuffer {
  explicit FftwComplexBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~FftwComplexBuffer() { fftw_free(data); }
  fftw_complex* data;
};

// Reflect index into [0, len) without repeating the edge sample.
std::size_t reflect_index(long long idx, std::size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  long long m = idx % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(len)) m = period - m;
  return static_cast<std::size_t>(m);
}

struct FilterRange {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive
};

}  // namespace

double SegmentSet::total_duration() const {
  double total = 0.0;
  for (const auto& [a, b] : intervals) total += b - a;
  return total;
}

void FrontendConfig::validate(int n_passes) const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (n_mels == 0) throw ConfigError("n_mels must be positive");
  if (n_passes < 1) throw ConfigError("at least one pass is required");
  for (int p = 1; p <= n_passes; ++p) {
    const double hop = hop_for_pass(p);
    if (hop <= 0.0)
      throw ConfigError("hop schedule: pass " + std::to_string(p) + " would use hop " +
                        std::to_string(hop) + " ms (must be > 0)");
    hop_samples(hop, sample_rate);
  }
  const auto win = static_cast<std::size_t>(std::lround(win_ms * sample_rate / 1000.0));
  if (win == 0) throw ConfigError("window shorter than one sample");
  if (n_fft < win)
    throw ConfigError("n_fft " + std::to_string(n_fft) + " is smaller than the window (" +
                      std::to_string(win) + " samples)");
}

AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw ContractError("resample: target rate must be positive");
  if (target_hz == clip.sample_rate) return clip;
  AudioClip out;
  out.sample_rate = target_hz;
  const std::size_t len = clip.samples.size();
  const double ratio = static_cast<double>(clip.sample_rate) / target_hz;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(len) * target_hz / clip.sample_rate));
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 + 1 >= len) {
      out.samples[i] = clip.samples[len - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = (1.0 - frac) * clip.samples[i0] + frac * clip.samples[i0 + 1];
  }
  return out;
}

std::size_t hop_samples(double hop_ms, int sample_rate) {
  const double exact = hop_ms * sample_rate / 1000.0;
  if (!(exact >= 1.0))
    throw ConfigError("hop of " + std::to_string(hop_ms) + " ms is shorter than one sample at " +
                      std::to_string(sample_rate) + " Hz");
  return static_cast<std::size_t>(std::lround(exact));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate) {
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  std::vector<double> bank(n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f >= lo && f <= mid && mid > lo) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi && hi > mid) {
        w = (hi - f) / (hi - mid);
      }
      bank[m * n_bins + k] = w;
    }
  }
  return bank;
}

MelSpectrogram log_mel_spectrogram(const AudioClip& clip, double hop_ms, std::size_t n_mels,
                                   double win_ms, std::size_t n_fft) {
  if (hop_ms <= 0.0) throw ConfigError("hop_ms must be positive");
  const std::size_t hop = hop_samples(hop_ms, clip.sample_rate);
  const auto win = static_cast<std::size_t>(std::lround(win_ms * clip.sample_rate / 1000.0));
  if (win == 0) throw ConfigError("window shorter than one sample");
  if (n_fft < win)
    throw ConfigError("n_fft " + std::to_string(n_fft) + " is smaller than the window (" +
                      std::to_string(win) + " samples)");
  const std::size_t len = clip.samples.size();
  if (len < hop)
    throw ContractError("log_mel_spectrogram: clip of " + std::to_string(len) +
                        " samples is shorter than one hop (" + std::to_string(hop) + ")");

  const std::size_t n_frames = (len + hop - 1) / hop;
  const std::size_t n_bins = n_fft / 2 + 1;
  const long long pad = static_cast<long long>(win / 2);

  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                     static_cast<double>(win));

  const auto bank = mel_filterbank(n_mels, n_fft, clip.sample_rate);
  std::vector<FilterRange> ranges(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    FilterRange r{n_bins, 0};
    for (std::size_t k = 0; k < n_bins; ++k) {
      if (bank[m * n_bins + k] != 0.0) {
        r.first = std::min(r.first, k);
        r.last = k + 1;
      }
    }
    if (r.last == 0) r.first = 0;
    ranges[m] = r;
  }

  const RealFftPlan& plan = plan_for(n_fft);
  FftwRealBuffer frame(n_fft);
  FftwComplexBuffer spectrum(n_bins);
  std::vector<double> power(n_bins);

  MelSpectrogram out;
  out.n_mels = n_mels;
  out.n_frames = n_frames;
  out.hop_ms = hop_ms;
  out.values.assign(n_mels * n_frames, 0.0);

  for (std::size_t t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t * hop) - pad;
    for (std::size_t n = 0; n < win; ++n)
      frame.data[n] = clip.samples[reflect_index(start + static_cast<long long>(n), len)] * window[n];
    std::fill(frame.data + win, frame.data + n_fft, 0.0);
    plan.execute(frame.data, spectrum.data);
    for (std::size_t k = 0; k < n_bins; ++k)
      power[k] = spectrum.data[k][0] * spectrum.data[k][0] + spectrum.data[k][1] * spectrum.data[k][1];
    for (std::size_t m = 0; m < n_mels; ++m) {
      double e = 0.0;
      const double* w = bank.data() + m * n_bins;
      for (std::size_t k = ranges[m].first; k < ranges[m].last; ++k) e += w[k] * power[k];
      out.values[m * n_frames + t] = std::log(e + kLogMelFloor);
    }
  }
  return out;
}

std::size_t seconds_to_sample(double seconds, int sample_rate) {
  const double x = std::floor(seconds * sample_rate + 0.5);
  return x <= 0.0 ? 0 : static_cast<std::size_t>(x);
}

AudioClip extract_segments(const AudioClip& clip, const SegmentSet& segs) {
  if (segs.intervals.empty())
    throw ContractError("extract_segments: empty SegmentSet");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const std::size_t len = clip.samples.size();
  for (const auto& [a, b] : segs.intervals) {
    if (a < 0.0 || b <= a)
      throw ContractError("extract_segments: invalid interval [" + std::to_string(a) + ", " +
                          std::to_string(b) + ")");
    const std::size_t s = std::min(seconds_to_sample(a, clip.sample_rate), len);
    const std::size_t e = std::min(seconds_to_sample(b, clip.sample_rate), len);
    out.samples.insert(out.samples.end(), clip.samples.begin() + static_cast<std::ptrdiff_t>(s),
                       clip.samples.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

SegmentSet compose_segments(const SegmentSet& outer, const SegmentSet& inner, int sample_rate) {
  struct Piece {
    std::size_t concat_start;
    std::size_t orig_start;
    std::size_t length;
  };
  std::vector<Piece> pieces;
  std::size_t cursor = 0;
  for (const auto& [a, b] : outer.intervals) {
    const std::size_t s = seconds_to_sample(a, sample_rate);
    const std::size_t e = seconds_to_sample(b, sample_rate);
    if (e <= s) continue;
    pieces.push_back({cursor, s, e - s});
    cursor += e - s;
  }
  const double sr = sample_rate;
  SegmentSet out;
  for (const auto& [a, b] : inner.intervals) {
    const std::size_t s = seconds_to_sample(a, sample_rate);
    const std::size_t e = seconds_to_sample(b, sample_rate);
    for (const Piece& p : pieces) {
      const std::size_t lo = std::max(s, p.concat_start);
      const std::size_t hi = std::min(e, p.concat_start + p.length);
      if (hi <= lo) continue;
      const double start = static_cast<double>(p.orig_start + (lo - p.concat_start)) / sr;
      const double end = static_cast<double>(p.orig_start + (hi - p.concat_start)) / sr;
      if (!out.intervals.empty() && std::abs(out.intervals.back().second - start) < 0.5 / sr) {
        out.intervals.back().second = end;
      } else {
        out.intervals.emplace_back(start, end);
      }
    }
  }
  return out;
}

MelSpectrogram fit_to_frames(const MelSpectrogram& spec, std::size_t t_target) {
  if (t_target == 0) throw ContractError("fit_to_frames: t_target must be positive");
  if (spec.n_frames == t_target) return spec;
  MelSpectrogram out;
  out.n_mels = spec.n_mels;
  out.n_frames = t_target;
  out.hop_ms = spec.hop_ms;
  out.values.assign(spec.n_mels * t_target, 0.0);
  const std::size_t src = spec.n_frames;
  for (std::size_t j = 0; j < t_target; ++j) {
    double pos = 0.0;
    if (t_target > 1)
      pos = static_cast<double>(j) * static_cast<double>(src - 1) / static_cast<double>(t_target - 1);
    auto i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= src - 1) i0 = src - 1;
    const double frac = (i0 + 1 < src) ? pos - static_cast<double>(i0) : 0.0;
    const std::size_t i1 = std::min(i0 + 1, src - 1);
    for (std::size_t m = 0; m < spec.n_mels; ++m) {
      const double a = spec.at(m, i0);
      const double b = spec.at(m, i1);
      out.at(m, j) = frac == 0.0 ? a : a + frac * (b - a);
    }
  }
  return out;
}

std::size_t base_frame_count(const AudioClip& clip, const FrontendConfig& cfg) {
  const std::size_t hop = hop_samples(cfg.base_hop_ms, clip.sample_rate);
  return (clip.samples.size() + hop - 1) / hop;
}

MelSpectrogram make_playback_input(const AudioClip& clip, const SegmentSet& segs, int pass_index,
                                   const FrontendConfig& cfg) {
  if (pass_index < 1) throw ContractError("make_playback_input: pass_index is 1-based");
  const double hop = cfg.hop_for_pass(pass_index);
  if (hop <= 0.0)
    throw ConfigError("hop schedule: pass " + std::to_string(pass_index) + " would use hop " +
                      std::to_string(hop) + " ms");
  const AudioClip replay = extract_segments(clip, segs);
  const MelSpectrogram spec = log_mel_spectrogram(replay, hop, cfg.n_mels, cfg.win_ms, cfg.n_fft);
  return fit_to_frames(spec, base_frame_count(clip, cfg));
}

void write_spectrogram_csv(const std::filesystem::path& path, const MelSpectrogram& spec) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    for (std::size_t t = 0; t < spec.n_frames; ++t) {
      std::fprintf(f, t == 0 ? "%.6e" : ",%.6e", spec.at(m, t));
    }
    std::fputc('\n', f);
  }
  std::fclose(f);
}

void write_spectrogram_pgm(const std::filesystem::path& path, const MelSpectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << spec.n_frames << " " << spec.n_mels << "\n255\n";
  const auto [lo_it, hi_it] = std::minmax_element(spec.values.begin(), spec.values.end());
  const double lo = spec.values.empty() ? 0.0 : *lo_it;
  const double range = spec.values.empty() ? 0.0 : *hi_it - lo;
  for (std::size_t r = 0; r < spec.n_mels; ++r) {
    const std::size_t m = spec.n_mels - 1 - r;
    for (std::size_t t = 0; t < spec.n_frames; ++t) {
      const double v = range > 0.0 ? (spec.at(m, t) - lo) / range : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
}

}  // namespace pib
