// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "playitback/errors.hpp"

namespace pib {
namespace {

constexpr char kMagic[] = "PIBK1";
constexpr std::size_t kMagicLen = 5;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw ParseError(std::string("checkpoint: truncated while reading ") + what);
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ad::Tensor ParameterStore::add(const std::string& name, ad::Shape shape, std::vector<double> values) {
  for (const auto& n : names_)
    if (n == name) throw ConfigError("duplicate parameter name " + name);
  auto t = ad::Tensor::parameter(shape, std::move(values));
  names_.push_back(name);
  tensors_.push_back(t);
  return t;
}

ad::Tensor ParameterStore::add_normal(const std::string& name, ad::Shape shape, double stddev,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape.size());
  for (double& x : v) x = dist(rng);
  return add(name, shape, std::move(v));
}

ad::Tensor ParameterStore::add_constant(const std::string& name, ad::Shape shape, double value) {
  return add(name, shape, std::vector<double>(shape.size(), value));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ad::Tensor ParameterStore::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return tensors_[i];
  throw ConfigError("no parameter named " + name);
}

void ParameterStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

std::vector<unsigned char> encode_checkpoint(const ParameterStore& params) {
  std::vector<unsigned char> out(kMagic, kMagic + kMagicLen);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    const auto& t = params.tensors()[i];
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.value()) put_f64(out, v);
  }
  return out;
}

std::vector<CheckpointRecord> decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw ParseError("checkpoint: missing PIBK1 magic");
  std::vector<unsigned char> body(bytes.begin() + kMagicLen, bytes.end());
  Reader r(body);
  std::vector<CheckpointRecord> records;
  while (!r.done()) {
    CheckpointRecord rec;
    const std::uint32_t name_len = r.u32("name length");
    rec.name = r.str(name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      rec.dims.push_back(r.u32("dims"));
      count *= rec.dims.back();
    }
    rec.values.resize(count);
    for (auto& v : rec.values) v = r.f64("values");
    records.push_back(std::move(rec));
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void apply_checkpoint(const std::vector<CheckpointRecord>& records, ParameterStore& params) {
  std::unordered_map<std::string, const CheckpointRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError("checkpoint: missing parameter " + name);
    auto t = params.tensors()[i];
    const auto& dims = it->second->dims;
    if (dims.size() != 2 || dims[0] != t.rows() || dims[1] != t.cols()) {
      std::string got;
      for (auto d : dims) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw ConfigError("checkpoint: parameter " + name + " has shape [" + got + "], model expects " +
                        t.shape().str());
    }
    std::copy(it->second->values.begin(), it->second->values.end(), t.value().begin());
  }
  if (records.size() != params.size())
    throw ConfigError("checkpoint: holds " + std::to_string(records.size()) +
                      " parameters, model has " + std::to_string(params.size()));
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& params) {
  apply_checkpoint(read_checkpoint(path), params);
}

}  // namespace pib
