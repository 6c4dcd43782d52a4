// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/slot_selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

std::vector<double> SlotState::informative() const {
  return {slots.value().begin(), slots.value().begin() + static_cast<std::ptrdiff_t>(slots.cols())};
}

std::vector<double> SlotState::uninformative() const {
  return {slots.value().begin() + static_cast<std::ptrdiff_t>(slots.cols()), slots.value().end()};
}

SlotAttention::SlotAttention(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng)
    : norm_inputs(ps, "slots.norm_inputs", cfg.width),
      norm_slots(ps, "slots.norm_slots", cfg.slot_dim),
      norm_update(ps, "slots.norm_update", cfg.slot_dim),
      to_q(ps, "slots.to_q", cfg.slot_dim, cfg.slot_dim, rng),
      to_k(ps, "slots.to_k", cfg.width, cfg.slot_dim, rng),
      to_v(ps, "slots.to_v", cfg.width, cfg.slot_dim, rng),
      gru(ps, "slots.gru", cfg.slot_dim, rng),
      residual(ps, "slots.mlp", cfg.slot_dim, 2 * cfg.slot_dim, cfg.slot_dim, Activation::kRelu, rng),
      dim_(cfg.slot_dim) {
  init_mean = ps.add_normal("slots.init_mean", {2, cfg.slot_dim}, 1.0, rng);
  init_log_sigma = ps.add_constant("slots.init_log_sigma", {2, cfg.slot_dim}, std::log(0.1));
}

SlotState SlotAttention::init_slots(std::mt19937_64* rng) const {
  if (!rng) return {init_mean};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(init_mean.size());
  for (double& e : eps) e = normal(*rng);
  const auto ls = init_log_sigma.value();
  Tensor log_sigma = init_log_sigma;
  if (std::any_of(ls.begin(), ls.end(), [](double v) { return v < kMinLogSigma; })) {
    std::vector<double> clamped(ls.begin(), ls.end());
    for (double& v : clamped) v = std::max(v, kMinLogSigma);
    log_sigma = Tensor::constant(init_log_sigma.shape(), std::move(clamped));
  }
  const Tensor noise = Tensor::constant(init_mean.shape(), std::move(eps));
  return {ad::add(init_mean, ad::mul(ad::exp(log_sigma), noise))};
}

SlotInputs SlotAttention::project_inputs(const EncodedFeatures& z) const {
  const Tensor n = norm_inputs(z.z);
  return {to_k(n), to_v(n)};
}

SlotState SlotAttention::iterate(const SlotInputs& in, const SlotState& s, std::size_t j,
                                 SlotIterationProbe* probe) const {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim_));
  const Tensor q = to_q(norm_slots(s.slots));                                // 2 x d
  const Tensor logits = ad::scale(ad::matmul(in.keys, ad::transpose(q)), inv_sqrt_d);  // T x 2
  const Tensor attn = ad::softmax(logits, 0);
  const Tensor weights = ad::div(attn, ad::sum_cols(attn));
  ad::check_finite(weights, "slot attention iteration " + std::to_string(j));
  if (probe) *probe = {attn, weights};
  const Tensor updates = ad::matmul(ad::transpose(weights), in.values);       // 2 x d
  const Tensor h = gru(updates, s.slots);
  return {ad::add(s.slots, residual(norm_update(h)))};
}

SlotState SlotAttention::run(const EncodedFeatures& z, std::size_t iterations, std::mt19937_64* rng) const {
  if (iterations == 0) throw ContractError("run_slot_attention: J must be at least 1");
  const SlotInputs in = project_inputs(z);
  SlotState s = init_slots(rng);
  for (std::size_t j = 1; j <= iterations; ++j) s = iterate(in, s, j);
  return s;
}

std::vector<double> saliency_matrix(const std::vector<double>& s1, const std::vector<double>& s2) {
  if (s1.size() != s2.size() || s1.empty())
    throw ShapeError("saliency_matrix: slot widths " + std::to_string(s1.size()) + " and " +
                     std::to_string(s2.size()) + " differ or are empty");
  const std::size_t d = s1.size();
  std::vector<double> inv(d);
  for (std::size_t i = 0; i < d; ++i) {
    double v = s2[i];
    if (std::abs(v) < kInverseClamp) v = v < 0.0 ? -kInverseClamp : kInverseClamp;
    inv[i] = 1.0 / v;
  }
  std::vector<double> m(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < d; ++c) {
      m[r * d + c] = s1[r] * inv[c];
      mx = std::max(mx, m[r * d + c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      m[r * d + c] = std::exp(m[r * d + c] - mx);
      z += m[r * d + c];
    }
    for (std::size_t c = 0; c < d; ++c) m[r * d + c] /= z;
  }
  return m;
}

SaliencyCurve saliency_diagonal(const std::vector<double>& s1, const std::vector<double>& s2) {
  const auto m = saliency_matrix(s1, s2);
  const std::size_t d = s1.size();
  SaliencyCurve curve;
  curve.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) curve.values[i] = m[i * d + i];
  const auto [lo, hi] = std::minmax_element(curve.values.begin(), curve.values.end());
  const double min = *lo;
  const double range = *hi - min;
  for (double& v : curve.values) v = range > 0.0 ? (v - min) / range : 1.0;
  return curve;
}

SaliencyCurve saliency_diagonal(const SlotState& slots) {
  return saliency_diagonal(slots.informative(), slots.uninformative());
}

std::vector<double> interpolate_curve(const std::vector<double>& curve, std::size_t t_frames) {
  const std::size_t src = curve.size();
  std::vector<double> out(t_frames);
  for (std::size_t j = 0; j < t_frames; ++j) {
    const double pos = t_frames > 1 ? static_cast<double>(j) * static_cast<double>(src - 1) /
                                          static_cast<double>(t_frames - 1)
                                    : 0.0;
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= src - 1) i0 = src - 1;
    const double frac = i0 + 1 < src ? pos - static_cast<double>(i0) : 0.0;
    out[j] = frac == 0.0 ? curve[i0] : (1.0 - frac) * curve[i0] + frac * curve[i0 + 1];
  }
  return out;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> mask_runs(const std::vector<bool>& mask,
                                                           std::size_t merge_gap) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // inclusive frame ranges
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (!runs.empty() && (t == runs.back().second + 1 || t - runs.back().second - 1 < merge_gap)) {
      runs.back().second = t;
    } else {
      runs.emplace_back(t, t);
    }
  }
  return runs;
}

SegmentSet runs_to_segments(const std::vector<std::pair<std::size_t, std::size_t>>& runs,
                            std::size_t t_frames, double hop_s, double duration_s) {
  SegmentSet out;
  for (const auto& [a, b] : runs) {
    const double start = a == 0 ? 0.0 : (static_cast<double>(a) - 0.5) * hop_s;
    const double end = b + 1 == t_frames ? duration_s : std::min(duration_s, (static_cast<double>(b) + 0.5) * hop_s);
    if (end > start) out.intervals.emplace_back(start, end);
  }
  return out;
}

}  // namespace

SegmentSet select_segments(const SaliencyCurve& curve, std::size_t t_frames, double hop_ms,
                           const SelectionConfig& cfg, double duration_s) {
  if (curve.values.empty() || t_frames == 0 || hop_ms <= 0.0)
    throw ContractError("select_segments: empty curve, zero frames, or non-positive hop");
  const double hop_s = hop_ms / 1000.0;
  if (duration_s < 0.0) duration_s = static_cast<double>(t_frames) * hop_s;
  const auto frames = interpolate_curve(curve.values, t_frames);

  std::vector<bool> mask(t_frames);
  for (std::size_t t = 0; t < t_frames; ++t) mask[t] = frames[t] > cfg.threshold;
  SegmentSet segs = runs_to_segments(mask_runs(mask, cfg.merge_gap_frames), t_frames, hop_s, duration_s);

  const double wanted = std::min(cfg.min_select_s, duration_s);
  if (segs.intervals.empty() || segs.total_duration() + 1e-12 < wanted) {
    const auto n_top = std::min<std::size_t>(
        t_frames, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(wanted / hop_s - 1e-9))));
    std::vector<std::size_t> order(t_frames);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frames[a] > frames[b]; });
    std::fill(mask.begin(), mask.end(), false);
    for (std::size_t i = 0; i < n_top; ++i) mask[order[i]] = true;
    segs = runs_to_segments(mask_runs(mask, cfg.merge_gap_frames), t_frames, hop_s, duration_s);
  }
  if (segs.intervals.empty()) segs.intervals.emplace_back(0.0, duration_s);
  return segs;
}

}  // namespace pib
