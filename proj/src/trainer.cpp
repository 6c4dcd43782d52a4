// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "playitback/errors.hpp"

namespace pib {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (base_lr < 0.0) throw ConfigError("base_lr must be non-negative");
  if (mixup_alpha < 0.0) throw ConfigError("mixup_alpha must be non-negative");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be non-negative");
  if (loss.label_mode != model.label_mode) throw ConfigError("loss and model label_mode differ");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", c.model},
       {"gamma", c.loss.gamma},
       {"beta", c.loss.beta},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"base_lr", c.base_lr},
       {"warmup_epochs", c.warmup_epochs},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"mixup_alpha", c.mixup_alpha},
       {"max_grad_norm", c.max_grad_norm},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  c.loss.gamma = j.value("gamma", c.loss.gamma);
  c.loss.beta = j.value("beta", c.loss.beta);
  c.loss.label_mode = c.model.label_mode;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.mixup_alpha = j.value("mixup_alpha", c.mixup_alpha);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.seed = j.value("seed", c.seed);
  c.verbose = j.value("verbose", c.verbose);
}

double sample_beta(double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  const double x = g(rng);
  const double y = g(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

MixedBatch mixup_with(const std::vector<AudioClip>& clips, const std::vector<std::vector<double>>& targets,
                      double lambda, const std::vector<std::size_t>& partner) {
  if (clips.size() != targets.size() || partner.size() != clips.size())
    throw ShapeError("mixup: clips, targets and partners must have equal counts");
  MixedBatch out;
  out.lambda = lambda;
  out.clips.reserve(clips.size());
  out.targets.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const AudioClip& a = clips[i];
    const AudioClip& b = clips[partner[i]];
    if (a.sample_rate != b.sample_rate) throw ContractError("mixup: sample rates differ");
    AudioClip m = a;
    for (std::size_t k = 0; k < m.samples.size(); ++k) {
      const double xb = k < b.samples.size() ? b.samples[k] : 0.0;
      m.samples[k] = lambda * a.samples[k] + (1.0 - lambda) * xb;
    }
    std::vector<double> y(targets[i].size());
    for (std::size_t k = 0; k < y.size(); ++k)
      y[k] = lambda * targets[i][k] + (1.0 - lambda) * targets[partner[i]][k];
    out.clips.push_back(std::move(m));
    out.targets.push_back(std::move(y));
  }
  return out;
}

MixedBatch mixup(const std::vector<AudioClip>& clips, const std::vector<std::vector<double>>& targets,
                 double alpha, std::mt19937_64& rng) {
  if (alpha <= 0.0) return {clips, targets, 1.0};
  const double lambda = sample_beta(alpha, rng);
  std::vector<std::size_t> partner(clips.size());
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  std::shuffle(partner.begin(), partner.end(), rng);
  return mixup_with(clips, targets, lambda, partner);
}

double train_step(PlayItBackModel& model, OptimState& opt, const std::vector<AudioClip>& clips,
                  const std::vector<std::vector<double>>& targets, const LossConfig& loss, double lr,
                  std::mt19937_64& rng) {
  if (clips.empty() || clips.size() != targets.size())
    throw ContractError("train_step: need a non-empty batch with one target per clip");
  model.params().zero_grad();
  const double inv_batch = 1.0 / static_cast<double>(clips.size());
  double total = 0.0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const PlaybackTrace trace = model.forward_all_passes(clips[i], &rng);
    std::vector<ad::Tensor> logits;
    logits.reserve(trace.size());
    for (const auto& rec : trace) logits.push_back(rec.logits);
    ad::Tensor l = ad::scale(total_loss(logits, targets[i], loss), inv_batch);
    const double value = l.item();
    if (!std::isfinite(value))
      throw NumericError("non-finite loss " + std::to_string(value) + " on batch sample " + std::to_string(i));
    l.backward();
    total += value;
  }
  sgd_step(model.params().tensors(), opt, lr);
  return total;
}

namespace {

void check_labels(const Dataset& data, std::size_t n_classes, const char* what) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= n_classes)
      throw ConfigError(std::string(what) + ": label " + std::to_string(data.labels[i]) + " of " +
                        data.paths[i] + " does not fit a model with " + std::to_string(n_classes) +
                        " classes");
  }
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

EvalResult evaluate(const PlayItBackModel& model, const Dataset& data) {
  const ModelConfig& cfg = model.config();
  check_labels(data, cfg.n_classes, "evaluate");
  ad::NoGradGuard no_grad;
  EvalResult r;
  r.per_pass_top1.assign(cfg.n_passes(), 0.0);
  std::vector<std::vector<double>> targets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PlaybackTrace trace = model.forward_all_passes(data.clips[i], nullptr);
    std::vector<std::vector<double>> per_pass;
    for (std::size_t p = 0; p < trace.size(); ++p) {
      per_pass.push_back(pass_probabilities(trace[p].logits, cfg.label_mode));
      if (argmax(per_pass.back()) == static_cast<std::size_t>(data.labels[i])) r.per_pass_top1[p] += 1.0;
    }
    r.scores.push_back(average_probabilities(per_pass));
    targets.push_back(one_hot(data.labels[i], cfg.n_classes));
  }
  if (data.size() > 0) {
    for (double& a : r.per_pass_top1) a *= 100.0 / static_cast<double>(data.size());
    r.metrics = compute_metrics(r.scores, targets);
  }
  return r;
}

EvalResult evaluate(const std::filesystem::path& ckpt, const Dataset& data) {
  const auto model = load_model(ckpt);
  return evaluate(*model, data);
}

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json j = r.metrics;
  j["per_pass_top1"] = r.per_pass_top1;
  return j;
}

std::string epoch_log_header(std::size_t n_passes) {
  std::string h = "epoch,step,lr,train_loss,val_top1,val_top5,val_map,val_auc,val_d_prime";
  for (std::size_t p = 1; p <= n_passes; ++p) h += ",val_pass" + std::to_string(p) + "_top1";
  return h;
}

std::string epoch_log_row(const EpochRecord& r) {
  char buf[512];
  const MetricsReport& m = r.val.metrics;
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.step, r.lr,
                r.train_loss, m.top1, m.top5, m.mean_ap, m.auc, m.d_prime);
  std::string row = buf;
  for (double a : r.val.per_pass_top1) {
    std::snprintf(buf, sizeof(buf), ",%.17g", a);
    row += buf;
  }
  return row;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const std::filesystem::path& ckpt, const std::filesystem::path& log_csv) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("train: training set is empty");
  check_labels(train_set, cfg.model.n_classes, "train");
  check_labels(val_set, cfg.model.n_classes, "train");

  PlayItBackModel model(cfg.model);
  OptimState opt;
  opt.momentum_coef = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.base_lr = cfg.base_lr;
  opt.warmup_epochs = cfg.warmup_epochs;
  opt.total_epochs = static_cast<double>(cfg.epochs);
  opt.max_grad_norm = cfg.max_grad_norm;
  std::mt19937_64 rng(cfg.seed);

  std::ofstream log;
  if (!log_csv.empty()) {
    log.open(log_csv);
    if (!log) throw Error("cannot write training log " + log_csv.string());
    log << epoch_log_header(cfg.model.n_passes()) << "\n";
  }

  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<AudioClip> clips;
      std::vector<std::vector<double>> targets;
      for (std::size_t k = begin; k < end; ++k) {
        clips.push_back(train_set.clips[order[k]]);
        targets.push_back(one_hot(train_set.labels[order[k]], cfg.model.n_classes));
      }
      const MixedBatch batch = mixup(clips, targets, cfg.mixup_alpha, rng);
      const double progress = static_cast<double>(epoch) + static_cast<double>(s) / steps_per_epoch;
      lr = cosine_lr(progress, cfg.base_lr, cfg.warmup_epochs, static_cast<double>(cfg.epochs));
      double loss = 0.0;
      try {
        loss = train_step(model, opt, batch.clips, batch.targets, cfg.loss, lr, rng);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(s + 1) + " (lr " + std::to_string(lr) + "): " + e.what());
      }
      loss_sum += loss;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.step = opt.step;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    if (val_set.size() > 0) rec.val = evaluate(model, val_set);
    if (log.is_open()) log << epoch_log_row(rec) << std::endl;
    if (cfg.verbose) std::cerr << epoch_log_row(rec) << "\n";

    const double top1 = val_set.size() > 0 ? rec.val.metrics.top1 : 0.0;
    if (val_set.size() == 0 || top1 > result.best_val_top1) {
      result.best_val_top1 = top1;
      result.best_epoch = rec.epoch;
      if (!ckpt.empty()) save_model(ckpt, model);
    }
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace pib
