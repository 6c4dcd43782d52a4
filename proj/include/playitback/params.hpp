// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "playitback/autodiff.hpp"

namespace pib {

/// Ordered, named collection of trainable tensors.
class ParameterStore {
 public:
  ad::Tensor add(const std::string& name, ad::Shape shape, std::vector<double> values);
  ad::Tensor add_normal(const std::string& name, ad::Shape shape, double stddev, std::mt19937_64& rng);
  ad::Tensor add_constant(const std::string& name, ad::Shape shape, double value);

  std::vector<ad::Tensor>& tensors() { return tensors_; }
  const std::vector<ad::Tensor>& tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  ad::Tensor get(const std::string& name) const;
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
};

struct CheckpointRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

// Layout: "PIBK1", then per record: u32 name length, name bytes, u32 rank,
// rank x u32 dims, prod(dims) x f64 values. All integers and floats are
// little-endian.
std::vector<unsigned char> encode_checkpoint(const ParameterStore& params);
std::vector<CheckpointRecord> decode_checkpoint(const std::vector<unsigned char>& bytes);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params);
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);
/// Copies values into `params`; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& path, ParameterStore& params);
void apply_checkpoint(const std::vector<CheckpointRecord>& records, ParameterStore& params);

}  // namespace pib
