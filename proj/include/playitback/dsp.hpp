// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pib {

/// Mono PCM waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// F x T log-mel matrix stored row-major (row = mel bin, column = frame).
struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  double hop_ms = 0.0;
  std::vector<double> values;

  double at(std::size_t mel, std::size_t frame) const {
    return values[mel * n_frames + frame];
  }
  double& at(std::size_t mel, std::size_t frame) {
    return values[mel * n_frames + frame];
  }
};

/// Sorted, disjoint time intervals in seconds.
struct SegmentSet {
  std::vector<std::pair<double, double>> intervals;

  double total_duration() const;
  static SegmentSet whole(const AudioClip& clip) {
    return SegmentSet{{{0.0, clip.duration_s()}}};
  }
};

/// Analysis parameters shared by every playback.
struct FrontendConfig {
  int sample_rate = 16000;
  std::size_t n_mels = 128;
  double win_ms = 25.0;
  std::size_t n_fft = 512;
  double base_hop_ms = 10.0;
  double hop_decrement_ms = 1.0;

  /// Hop used by the 1-based pass `pass_index`.
  double hop_for_pass(int pass_index) const {
    return base_hop_ms - (pass_index - 1) * hop_decrement_ms;
  }
  /// Throws ConfigError if any of `n_passes` passes would get a non-positive
  /// or sub-sample hop.
  void validate(int n_passes) const;
};

constexpr double kLogMelFloor = 1e-6;

// WAV I/O (RIFF/WAVE, 16-bit PCM).
AudioClip load_wav(const std::filesystem::path& path);
AudioClip parse_wav(const std::vector<unsigned char>& bytes);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);
std::vector<unsigned char> encode_wav(const AudioClip& clip);

AudioClip resample(const AudioClip& clip, int target_hz);

/// Hop length in samples; throws ConfigError when below one sample.
std::size_t hop_samples(double hop_ms, int sample_rate);

/// Centered framing: T = ceil(len / hop_samples).
MelSpectrogram log_mel_spectrogram(const AudioClip& clip, double hop_ms,
                                   std::size_t n_mels, double win_ms,
                                   std::size_t n_fft);

/// HTK-mel triangular filterbank, n_mels x (n_fft/2 + 1), row-major.
std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft,
                                   int sample_rate);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Seconds to sample index, rounding half up.
std::size_t seconds_to_sample(double seconds, int sample_rate);

AudioClip extract_segments(const AudioClip& clip, const SegmentSet& segs);

/// Maps intervals expressed on the timeline of `extract_segments(clip, outer)`
/// back onto the timeline of `clip`. Intervals that straddle a join are split.
SegmentSet compose_segments(const SegmentSet& outer, const SegmentSet& inner,
                            int sample_rate);

MelSpectrogram fit_to_frames(const MelSpectrogram& spec, std::size_t t_target);

/// Frame count of the pass-1 input for `clip`.
std::size_t base_frame_count(const AudioClip& clip, const FrontendConfig& cfg);

MelSpectrogram make_playback_input(const AudioClip& clip,
                                   const SegmentSet& segs, int pass_index,
                                   const FrontendConfig& cfg);

void write_spectrogram_csv(const std::filesystem::path& path,
                           const MelSpectrogram& spec);
/// 8-bit binary PGM, min/max scaled, lowest mel bin at the bottom.
void write_spectrogram_pgm(const std::filesystem::path& path,
                           const MelSpectrogram& spec);

}  // namespace pib
