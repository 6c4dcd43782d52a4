// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <random>
#include <vector>

#include "playitback/autodiff.hpp"
#include "playitback/config.hpp"
#include "playitback/dsp.hpp"
#include "playitback/layers.hpp"
#include "playitback/params.hpp"

namespace pib {

/// k patch tokens laid out frequency-major: token (f, t) is row f * grid_t + t.
struct TokenSequence {
  ad::Tensor tokens;
  std::size_t grid_f = 0;
  std::size_t grid_t = 0;
};

/// z: one row per temporal patch column, `width` channels.
struct EncodedFeatures {
  ad::Tensor z;
};

/// Flattens non-overlapping patch_f x patch_t patches into a k x (patch_f*patch_t)
/// constant tensor. Throws ConfigError when the patches do not tile `spec`.
TokenSequence patchify(const MelSpectrogram& spec, std::size_t patch_f, std::size_t patch_t);

/// Mean and unit-variance normalization over all entries; constant input maps to zeros.
MelSpectrogram standardize(const MelSpectrogram& spec);

/// Patch embedding, learned frequency/time position tables, pre-norm
/// transformer blocks, and mean pooling over the frequency patch axis.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng);

  /// Projects raw patches to the model width.
  TokenSequence embed(const TokenSequence& patches) const;
  /// token(f, t) += pos_freq[f] + pos_time[t].
  TokenSequence add_positional(const TokenSequence& tokens) const;
  /// `attn`, when given, collects every head's attention matrix of every block.
  EncodedFeatures encode(const TokenSequence& tokens, std::vector<ad::Tensor>* attn = nullptr) const;

  /// patchify -> embed -> add_positional -> encode.
  EncodedFeatures operator()(const MelSpectrogram& spec) const;

  Linear projection;
  ad::Tensor pos_freq;
  ad::Tensor pos_time;
  std::vector<TransformerBlock> blocks;

 private:
  std::size_t patch_f_ = 0;
  std::size_t patch_t_ = 0;
};

}  // namespace pib
