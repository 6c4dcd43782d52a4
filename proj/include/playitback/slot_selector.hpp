// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <random>
#include <vector>

#include "playitback/autodiff.hpp"
#include "playitback/config.hpp"
#include "playitback/dsp.hpp"
#include "playitback/encoder.hpp"
#include "playitback/layers.hpp"
#include "playitback/params.hpp"

namespace pib {

/// Two slots stacked as a 2 x d tensor: row 0 informative, row 1 uninformative.
struct SlotState {
  ad::Tensor slots;

  std::vector<double> informative() const;
  std::vector<double> uninformative() const;
};

/// Values over the temporal axis in [0, 1].
struct SaliencyCurve {
  std::vector<double> values;
};

/// Per-iteration attention record, for inspection and tests.
struct SlotIterationProbe {
  ad::Tensor attention;  // T x 2, softmax over tokens per slot
  ad::Tensor weights;    // T x 2, renormalized across the two slots per token
};

/// Keys and values computed once per playback and shared across iterations.
struct SlotInputs {
  ad::Tensor keys;
  ad::Tensor values;
};

class SlotAttention {
 public:
  static constexpr double kMinLogSigma = -20.0;

  SlotAttention() = default;
  SlotAttention(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng);

  /// Training: mean + exp(log_sigma) * N(0, I). Evaluation (`rng` null): mean.
  SlotState init_slots(std::mt19937_64* rng) const;
  SlotInputs project_inputs(const EncodedFeatures& z) const;
  /// One update: softmax over tokens, per-token renormalization across the
  /// two slots, weighted sum of values, GRU step, residual MLP.
  SlotState iterate(const SlotInputs& in, const SlotState& s, std::size_t j,
                    SlotIterationProbe* probe = nullptr) const;
  /// init_slots followed by `iterations` shared-parameter updates.
  SlotState run(const EncodedFeatures& z, std::size_t iterations, std::mt19937_64* rng) const;

  std::size_t dim() const { return dim_; }

  LayerNorm norm_inputs;
  LayerNorm norm_slots;
  LayerNorm norm_update;
  Linear to_q;
  Linear to_k;
  Linear to_v;
  GruCell gru;
  Mlp residual;
  ad::Tensor init_mean;
  ad::Tensor init_log_sigma;

 private:
  std::size_t dim_ = 0;
};

constexpr double kInverseClamp = 1e-4;

/// Row-softmax of outer(s1, 1/s2), d x d row-major. Entries of s2 smaller in
/// magnitude than kInverseClamp are clamped to +-kInverseClamp (sign kept,
/// zero treated as positive).
std::vector<double> saliency_matrix(const std::vector<double>& s1, const std::vector<double>& s2);
/// Min-max normalized diagonal of saliency_matrix; a constant diagonal maps to all ones.
SaliencyCurve saliency_diagonal(const std::vector<double>& s1, const std::vector<double>& s2);
SaliencyCurve saliency_diagonal(const SlotState& slots);

/// Linear interpolation of `curve` onto `t_frames` points, endpoints kept.
std::vector<double> interpolate_curve(const std::vector<double>& curve, std::size_t t_frames);

/// Frames above the threshold become runs, runs closer than merge_gap_frames
/// merge, and each run [a, b] maps to [(a - 0.5) hop, (b + 0.5) hop] clamped to
/// [0, duration_s]; runs touching the first or last frame extend to the clip
/// edge. When less than min_select_s survives, the highest-saliency
/// frames covering min_select_s are used instead. Never returns an empty set.
/// A negative `duration_s` means t_frames * hop.
SegmentSet select_segments(const SaliencyCurve& curve, std::size_t t_frames, double hop_ms,
                           const SelectionConfig& cfg = {}, double duration_s = -1.0);

}  // namespace pib
