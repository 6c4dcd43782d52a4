// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include "playitback/losses.hpp"
#include "playitback/model.hpp"

namespace pib {

using ad::Tensor;

namespace {

std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Tensor random_param(ad::Shape s, std::mt19937_64& rng) { return Tensor::parameter(s, normal_values(s.size(), rng)); }

// Contracts with fixed random weights so every output coordinate matters.
Tensor probe(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(t, Tensor::constant(t.shape(), normal_values(t.size(), rng))));
}

GradCheckCase timed(const std::string& name, double tol, const std::function<double()>& run) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckCase c{name, run(), tol, 0.0};
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

using Op = std::function<Tensor(std::vector<Tensor>&)>;

// Worst error of probe(op(inputs)) over a few random shapes.
double primitive_error(const std::function<std::vector<Tensor>(std::size_t, std::size_t, std::size_t,
                                                               std::mt19937_64&)>& make,
                       const Op& op, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const std::size_t r = dim(rng), c = dim(rng), k = dim(rng);
    auto params = make(r, c, k, rng);
    worst = std::max(worst, ad::grad_check([&] { return probe(op(params), seed + trial); }, params).max_rel_error);
  }
  return worst;
}

std::vector<Tensor> one(std::size_t r, std::size_t c, std::size_t, std::mt19937_64& rng) {
  return {random_param({r, c}, rng)};
}
std::vector<Tensor> two(std::size_t r, std::size_t c, std::size_t, std::mt19937_64& rng) {
  return {random_param({r, c}, rng), random_param({r, c}, rng)};
}
std::vector<Tensor> broadcast(std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
  const ad::Shape b = k % 3 == 0 ? ad::Shape{1, c} : k % 3 == 1 ? ad::Shape{r, 1} : ad::Shape{1, 1};
  return {random_param({r, c}, rng), random_param(b, rng)};
}
// Moves entries away from the kink at zero.
std::vector<Tensor> off_kink(std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
  auto p = one(r, c, k, rng);
  for (double& v : p[0].value()) v += v >= 0.0 ? 0.1 : -0.1;
  return p;
}
std::vector<Tensor> positive(std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
  auto p = one(r, c, k, rng);
  for (double& v : p[0].value()) v = 0.2 + std::abs(v);
  return p;
}
std::vector<Tensor> wide(std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
  return one(r, c + 1, k, rng);
}

ModelConfig suite_config() {
  ModelConfig c;
  c.frontend.n_mels = 32;
  c.clip_seconds = 1.0;
  c.patch_f = 16;
  c.patch_t = 10;
  c.width = 8;
  c.depth = 1;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.slot_dim = 8;
  c.slot_iters = 2;
  c.latent_tokens = 3;
  c.decoder_heads = 2;
  c.n_playbacks = 1;
  c.n_classes = 3;
  return c;
}

AudioClip suite_clip(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  AudioClip clip;
  clip.samples.resize(16000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    clip.samples[i] = 0.3 * std::sin(2.0 * M_PI * 700.0 * t) * std::exp(-4.0 * std::abs(t - 0.3)) + noise(rng);
  }
  return clip;
}

}  // namespace

std::vector<GradCheckCase> run_gradient_suite(bool full, std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  auto prim = [&](const std::string& name, auto make, Op op) {
    out.push_back(timed(name, kPrimitiveGradTol, [&] { return primitive_error(make, op, seed + out.size()); }));
  };
  prim("matmul",
       [](std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
         return std::vector<Tensor>{random_param({r, k}, rng), random_param({k, c}, rng)};
       },
       [](auto& p) { return ad::matmul(p[0], p[1]); });
  prim("transpose", one, [](auto& p) { return ad::transpose(p[0]); });
  prim("add", two, [](auto& p) { return ad::add(p[0], p[1]); });
  prim("add_broadcast", broadcast, [](auto& p) { return ad::add(p[0], p[1]); });
  prim("sub", broadcast, [](auto& p) { return ad::sub(p[0], p[1]); });
  prim("mul", two, [](auto& p) { return ad::mul(p[0], p[1]); });
  prim("mul_broadcast", broadcast, [](auto& p) { return ad::mul(p[1], p[0]); });
  prim("div",
       [](std::size_t r, std::size_t c, std::size_t k, std::mt19937_64& rng) {
         auto p = two(r, c, k, rng);
         for (double& v : p[1].value()) v = 0.5 + std::abs(v);
         return p;
       },
       [](auto& p) { return ad::div(p[0], p[1]); });
  prim("scale", one, [](auto& p) { return ad::add_scalar(ad::scale(p[0], -1.3), 0.2); });
  prim("concat", one, [](auto& p) {
    return ad::concat_cols({ad::concat_rows({p[0], ad::exp(p[0])}), ad::concat_rows({p[0], p[0]})});
  });
  prim("slice", one, [](auto& p) {
    return ad::slice_cols(ad::slice_rows(p[0], p[0].rows() / 2, p[0].rows() - p[0].rows() / 2), 0,
                          (p[0].cols() + 1) / 2);
  });
  prim("gather_rows", one, [](auto& p) {
    const std::vector<std::size_t> idx{p[0].rows() - 1, 0, p[0].rows() - 1};
    return ad::gather_rows(p[0], idx);
  });
  prim("sum", one, [](auto& p) { return ad::add(ad::sum(p[0]), ad::sum_cols(p[0])); });
  prim("mean", one, [](auto& p) { return ad::add(ad::mean(p[0]), ad::mean_rows(p[0])); });
  prim("relu", off_kink, [](auto& p) { return ad::relu(p[0]); });
  prim("max_with_zero", off_kink, [](auto& p) { return ad::max_with_zero(p[0]); });
  prim("gelu", one, [](auto& p) { return ad::gelu(p[0]); });
  prim("sigmoid", one, [](auto& p) { return ad::sigmoid(p[0]); });
  prim("tanh", one, [](auto& p) { return ad::tanh(p[0]); });
  prim("exp", one, [](auto& p) { return ad::exp(p[0]); });
  prim("log", positive, [](auto& p) { return ad::log(p[0]); });
  prim("softmax_rows", one, [](auto& p) { return ad::softmax(p[0], 1); });
  prim("softmax_cols", one, [](auto& p) { return ad::softmax(p[0], 0); });
  prim("log_softmax", one, [](auto& p) { return ad::add(ad::log_softmax(p[0], 1), ad::log_softmax(p[0], 0)); });
  prim("layer_norm", wide, [](auto& p) { return ad::layer_norm(p[0]); });
  prim("linear_interp_1d", wide, [](auto& p) { return ad::linear_interp_1d(p[0], 7); });

  const ModelConfig cfg = suite_config();
  out.push_back(timed("gru_cell", kComponentGradTol, [&] {
    std::mt19937_64 rng(seed + 100);
    ParameterStore ps;
    GruCell cell(ps, "gru", 6, rng);
    std::vector<Tensor> params = ps.tensors();
    params.push_back(random_param({2, 6}, rng));
    params.push_back(random_param({2, 6}, rng));
    const std::size_t n = params.size();
    return ad::grad_check([&] { return probe(cell(params[n - 2], params[n - 1]), seed); }, params).max_rel_error;
  }));
  out.push_back(timed("slot_iteration", kComponentGradTol, [&] {
    std::mt19937_64 rng(seed + 200);
    ParameterStore ps;
    SlotAttention sa(ps, cfg, rng);
    std::vector<Tensor> params = ps.tensors();
    params.push_back(random_param({cfg.grid_t(), cfg.width}, rng));
    return ad::grad_check(
               [&] {
                 const SlotInputs in = sa.project_inputs(EncodedFeatures{params.back()});
                 return probe(sa.iterate(in, sa.init_slots(nullptr), 1).slots, seed);
               },
               params)
        .max_rel_error;
  }));
  out.push_back(timed("decode_block", kComponentGradTol, [&] {
    std::mt19937_64 rng(seed + 300);
    ParameterStore ps;
    PlaybackDecoder dec(ps, cfg, rng);
    // Unit-scale latent keeps layer-norm curvature within reach of eps = 1e-5.
    const auto unit = normal_values(dec.latent_init.size(), rng);
    std::copy(unit.begin(), unit.end(), dec.latent_init.value().begin());
    std::vector<Tensor> params = ps.tensors();
    params.push_back(random_param({cfg.grid_t(), cfg.width}, rng));
    return ad::grad_check(
               [&] {
                 const EncodedFeatures z{params.back()};
                 return probe(dec.classify(dec.decode(z, dec.initial(), 1)), seed);
               },
               params)
        .max_rel_error;
  }));
  out.push_back(timed("rank_loss", kComponentGradTol, [&] {
    std::mt19937_64 rng(seed + 400);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t i = 2; i <= 6; ++i) {
      std::vector<Tensor> p;
      for (std::size_t m = 0; m < i; ++m) p.push_back(Tensor::parameter({1, 1}, {u(rng)}));
      worst = std::max(worst, ad::grad_check([&] { return rank_loss(p, i, 0.05); }, p).max_rel_error);
    }
    return worst;
  }));
  if (full) {
    out.push_back(timed("end_to_end", kComponentGradTol, [&] {
      ModelConfig c = cfg;
      c.init_seed = seed + 500;
      PlayItBackModel model(c);
      const AudioClip clip = suite_clip(seed + 501);
      const std::vector<double> target = one_hot(1, c.n_classes);
      const LossConfig loss;
      return ad::grad_check(
                 [&] {
                   std::vector<Tensor> logits;
                   for (const auto& rec : model.forward_all_passes(clip)) logits.push_back(rec.logits);
                   return total_loss(logits, target, loss);
                 },
                 model.params().tensors())
          .max_rel_error;
    }));
  }
  return out;
}

void to_json(nlohmann::json& j, const GradCheckCase& c) {
  j = {{"name", c.name},
       {"max_rel_error", c.max_rel_error},
       {"tolerance", c.tolerance},
       {"passed", c.passed()},
       {"seconds", c.seconds}};
}

}  // namespace pib
