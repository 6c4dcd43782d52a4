// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "playitback/config.hpp"
#include "playitback/losses.hpp"
#include "playitback/metrics.hpp"
#include "playitback/model.hpp"
#include "playitback/optim.hpp"
#include "playitback/synth.hpp"

namespace pib {

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double base_lr = 0.01;
  double warmup_epochs = 2.5;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double mixup_alpha = 0.3;
  double max_grad_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  bool verbose = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct MixedBatch {
  std::vector<AudioClip> clips;
  std::vector<std::vector<double>> targets;
  double lambda = 1.0;
};

/// x = lambda * x_a + (1 - lambda) * x_b with b = perm(a). Partners shorter
/// than x_a are zero-padded. Returns the batch unchanged when alpha == 0.
MixedBatch mixup(const std::vector<AudioClip>& clips, const std::vector<std::vector<double>>& targets,
                 double alpha, std::mt19937_64& rng);
/// Deterministic core of mixup with a given lambda and partner permutation.
MixedBatch mixup_with(const std::vector<AudioClip>& clips, const std::vector<std::vector<double>>& targets,
                      double lambda, const std::vector<std::size_t>& partner);
/// Draw from Beta(alpha, alpha).
double sample_beta(double alpha, std::mt19937_64& rng);

/// One optimizer step on a batch: per-sample forward over every pass,
/// loss averaged over the batch, backward, SGD. Returns the mean loss.
double train_step(PlayItBackModel& model, OptimState& opt, const std::vector<AudioClip>& clips,
                  const std::vector<std::vector<double>>& targets, const LossConfig& loss, double lr,
                  std::mt19937_64& rng);

struct EvalResult {
  MetricsReport metrics;
  std::vector<double> per_pass_top1;  // percent, one entry per pass
  std::vector<std::vector<double>> scores;
};

nlohmann::json to_json(const EvalResult& r);

EvalResult evaluate(const PlayItBackModel& model, const Dataset& data);
EvalResult evaluate(const std::filesystem::path& ckpt, const Dataset& data);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  EvalResult val;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double best_val_top1 = -1.0;
  std::size_t best_epoch = 0;
};

/// Trains from scratch. Writes the best-validation checkpoint to `ckpt`
/// (plus its config sidecar) and the per-epoch CSV to `log_csv` when non-empty.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const std::filesystem::path& ckpt, const std::filesystem::path& log_csv = {});

std::string epoch_log_header(std::size_t n_passes);
std::string epoch_log_row(const EpochRecord& r);

}  // namespace pib
