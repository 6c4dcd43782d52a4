// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <random>
#include <vector>

#include "playitback/autodiff.hpp"
#include "playitback/config.hpp"
#include "playitback/encoder.hpp"
#include "playitback/layers.hpp"
#include "playitback/params.hpp"

namespace pib {

/// Latent tokens carried from one playback to the next.
struct DecoderLatent {
  ad::Tensor v;  // latent_tokens x width
  int pass_index = 0;
};

struct DecoderProbe {
  std::vector<ad::Tensor> cross_attention;
  std::vector<ad::Tensor> self_attention;
};

/// Recurrent cross-attention decoder with a classifier head shared by every pass.
class PlaybackDecoder {
 public:
  PlaybackDecoder() = default;
  PlaybackDecoder(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng);

  /// The learned latent used before the first pass.
  DecoderLatent initial() const { return {latent_init, 0}; }

  /// Adds patch and playback encodings to z, cross-attends the previous
  /// latent to it, then applies one self-attention block to the latent.
  DecoderLatent decode(const EncodedFeatures& z, const DecoderLatent& prev, int pass_index,
                       DecoderProbe* probe = nullptr) const;

  /// Mean over latent tokens followed by a linear map to class logits (1 x n_classes).
  ad::Tensor classify(const DecoderLatent& v) const;

  ad::Tensor latent_init;
  ad::Tensor patch_pos;
  ad::Tensor playback_embed;
  LayerNorm norm_latent;
  LayerNorm norm_context;
  MultiHeadAttention cross;
  TransformerBlock self_block;
  Linear head;
};

}  // namespace pib
