// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

// Reverse-mode differentiation over dense row-major matrices.
//
// Every tensor is two-dimensional (a vector is 1 x n, a scalar 1 x 1). Each op
// allocates a fresh node that remembers its parents and a closure that pushes
// the node's gradient back into them. `Tensor::backward()` walks the graph in
// reverse topological order so every node is visited exactly once, which makes
// gradient accumulation through shared subexpressions exact.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pib::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  const char* op = "leaf";

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  /// Leaf that accumulates gradient across backward calls.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<double> value() { return node_->value; }
  std::span<const double> value() const { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  /// Gradient buffer; zero-filled when nothing has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  /// Seeds d(self)/d(self) = 1 (scalar only) and back-propagates.
  void backward();
  /// Back-propagates an explicit upstream gradient of the same shape.
  void backward(std::span<const double> seed);

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Linear algebra and structure.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
/// out[i] = a[index[i]]; repeated indices accumulate on the way back.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);

// Elementwise binary ops. `b` may match `a`, or be a 1 x cols row, a rows x 1
// column, or a 1 x 1 scalar broadcast over `a`. `add` and `mul` also accept the
// broadcast operand first.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over rows: rows x cols -> 1 x cols.
Tensor mean_rows(const Tensor& a);
/// Sum over columns: rows x cols -> rows x 1.
Tensor sum_cols(const Tensor& a);

// Pointwise nonlinearities.
Tensor relu(const Tensor& a);
Tensor max_with_zero(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

/// axis 1 normalizes each row, axis 0 each column.
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);
/// Normalizes each row to zero mean and unit variance (no affine part).
Tensor layer_norm(const Tensor& a, double eps = 1e-5);
/// Resamples every row onto `new_len` uniformly spaced points (endpoints kept).
Tensor linear_interp_1d(const Tensor& a, std::size_t new_len);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// Throws NumericError naming `where` if any entry is NaN or Inf.
void check_finite(const Tensor& t, const std::string& where);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t param_index = 0;
  std::size_t coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `f()` against central
/// differences with step `eps`, for every coordinate of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, 1e-4).
GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double eps = 1e-5);

}  // namespace pib::ad
