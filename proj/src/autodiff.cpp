// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "playitback/errors.hpp"

namespace pib::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMatrix>;

thread_local bool g_grad_enabled = true;

Map view(std::vector<double>& v, const Shape& s) {
  return Map(v.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

Tensor make(Shape shape, std::vector<double> value, std::vector<std::shared_ptr<Node>> parents,
            std::function<void(Node&)> backward, const char* op) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of parent `i`, or nullptr when it does not need one.
double* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

enum class Bcast { kSame, kRow, kCol, kScalar };

Bcast classify(const char* op, const Shape& full, const Shape& b) {
  if (b == full) return Bcast::kSame;
  if (b.rows == 1 && b.cols == 1) return Bcast::kScalar;
  if (b.rows == 1 && b.cols == full.cols) return Bcast::kRow;
  if (b.cols == 1 && b.rows == full.rows) return Bcast::kCol;
  shape_error(op, full, b);
}

inline std::size_t bindex(Bcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Bcast::kSame: return r * cols + c;
    case Bcast::kRow: return c;
    case Bcast::kCol: return r;
    case Bcast::kScalar: return 0;
  }
  return 0;
}

template <typename Fwd, typename Back>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Back dydx) {
  const auto& av = a.node()->value;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make(a.shape(), std::move(out), {a.ptr()},
              [dydx](Node& self) {
                double* ga = pgrad(self, 0);
                if (!ga) return;
                const auto& x = self.parents[0]->value;
                for (std::size_t i = 0; i < x.size(); ++i)
                  ga[i] += self.grad[i] * dydx(x[i], self.value[i]);
              },
              op);
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (values.size() != shape.size())
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for shape " + shape.str());
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) { return constant(shape, std::vector<double>(shape.size(), 0.0)); }

Tensor Tensor::full(Shape shape, double v) {
  return constant(shape, std::vector<double>(shape.size(), v));
}

Tensor Tensor::scalar(double v) { return constant({1, 1}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(shape, std::move(values));
  t.node_->requires_grad = true;
  t.node_->op = "parameter";
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape().str() + " is not a scalar");
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::backward() {
  if (size() != 1)
    throw ShapeError("backward: implicit seed needs a scalar, got " + shape().str());
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) {
  if (seed.size() != size())
    throw ShapeError("backward: seed has " + std::to_string(seed.size()) + " entries for " +
                     shape().str());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; every node appears once.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  for (std::size_t i = 0; i < seed.size(); ++i) node_->grad[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->ensure_grad();
      n->backward(*n);
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const Shape out_shape{a.rows(), b.cols()};
  std::vector<double> out(out_shape.size());
  view(out, out_shape).noalias() = view(a.node()->value, a.shape()) * view(b.node()->value, b.shape());
  return make(out_shape, std::move(out), {a.ptr(), b.ptr()},
              [](Node& self) {
                Node& A = *self.parents[0];
                Node& B = *self.parents[1];
                const auto g = view(self.grad, self.shape);
                if (A.requires_grad) {
                  A.ensure_grad();
                  view(A.grad, A.shape).noalias() += g * view(B.value, B.shape).transpose();
                }
                if (B.requires_grad) {
                  B.ensure_grad();
                  view(B.grad, B.shape).noalias() += view(A.value, A.shape).transpose() * g;
                }
              },
              "matmul");
}

Tensor transpose(const Tensor& a) {
  const Shape out_shape{a.cols(), a.rows()};
  std::vector<double> out(out_shape.size());
  view(out, out_shape) = view(a.node()->value, a.shape()).transpose();
  return make(out_shape, std::move(out), {a.ptr()},
              [](Node& self) {
                Node& A = *self.parents[0];
                if (!A.requires_grad) return;
                A.ensure_grad();
                view(A.grad, A.shape) += view(self.grad, self.shape).transpose();
              },
              "transpose");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
    parents.push_back(p.ptr());
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  return make({rows, cols}, std::move(out), std::move(parents),
              [](Node& self) {
                std::size_t offset = 0;
                for (std::size_t i = 0; i < self.parents.size(); ++i) {
                  const std::size_t n = self.parents[i]->value.size();
                  if (double* g = pgrad(self, i)) {
                    for (std::size_t k = 0; k < n; ++k) g[k] += self.grad[offset + k];
                  }
                  offset += n;
                }
              },
              "concat_rows");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
    parents.push_back(p.ptr());
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out[r * cols + offset + c] = p.at(r, c);
    offset += p.cols();
  }
  return make({rows, cols}, std::move(out), std::move(parents),
              [](Node& self) {
                const std::size_t total = self.shape.cols;
                std::size_t off = 0;
                for (std::size_t i = 0; i < self.parents.size(); ++i) {
                  const std::size_t pc = self.parents[i]->shape.cols;
                  if (double* g = pgrad(self, i)) {
                    for (std::size_t r = 0; r < self.shape.rows; ++r)
                      for (std::size_t c = 0; c < pc; ++c) g[r * pc + c] += self.grad[r * total + off + c];
                  }
                  off += pc;
                }
              },
              "concat_cols");
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.rows() || count == 0)
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + a.shape().str());
  const std::size_t cols = a.cols();
  std::vector<double> out(a.value().begin() + static_cast<std::ptrdiff_t>(start * cols),
                          a.value().begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
  return make({count, cols}, std::move(out), {a.ptr()},
              [start](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const std::size_t off = start * self.shape.cols;
                for (std::size_t k = 0; k < self.grad.size(); ++k) g[off + k] += self.grad[k];
              },
              "slice_rows");
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols() || count == 0)
    throw ShapeError("slice_cols: cols [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + a.shape().str());
  const std::size_t rows = a.rows();
  const std::size_t src_cols = a.cols();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = a.at(r, start + c);
  return make({rows, count}, std::move(out), {a.ptr()},
              [start, src_cols](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const std::size_t n = self.shape.cols;
                for (std::size_t r = 0; r < self.shape.rows; ++r)
                  for (std::size_t c = 0; c < n; ++c) g[r * src_cols + start + c] += self.grad[r * n + c];
              },
              "slice_cols");
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t cols = a.cols();
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows())
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                       a.shape().str());
    std::copy_n(a.value().begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  const Shape shape{idx.size(), cols};
  return make(shape, std::move(out), {a.ptr()},
              [idx = std::move(idx)](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const std::size_t c = self.shape.cols;
                for (std::size_t i = 0; i < idx.size(); ++i)
                  for (std::size_t k = 0; k < c; ++k) g[idx[i] * c + k] += self.grad[i * c + k];
              },
              "gather_rows");
}

namespace {

enum class BinOp { kAdd, kSub, kMul, kDiv };

// Calls f(i, j) for every output index i and its broadcast index j.
template <typename F>
inline void for_each_pair(Bcast kind, std::size_t rows, std::size_t cols, F&& f) {
  const std::size_t n = rows * cols;
  switch (kind) {
    case Bcast::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i);
      break;
    case Bcast::kRow:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) f(r * cols + c, c);
      break;
    case Bcast::kCol:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) f(r * cols + c, r);
      break;
    case Bcast::kScalar:
      for (std::size_t i = 0; i < n; ++i) f(i, 0);
      break;
  }
}

template <BinOp Op>
Tensor binary_impl(const Tensor& a, const Tensor& b, Bcast kind, const char* name) {
  const Shape full = a.shape();
  const double* x = a.node()->value.data();
  const double* y = b.node()->value.data();
  std::vector<double> out(full.size());
  double* o = out.data();
  for_each_pair(kind, full.rows, full.cols, [&](std::size_t i, std::size_t j) {
    if constexpr (Op == BinOp::kAdd) o[i] = x[i] + y[j];
    if constexpr (Op == BinOp::kSub) o[i] = x[i] - y[j];
    if constexpr (Op == BinOp::kMul) o[i] = x[i] * y[j];
    if constexpr (Op == BinOp::kDiv) o[i] = x[i] / y[j];
  });
  return make(full, std::move(out), {a.ptr(), b.ptr()},
              [kind](Node& self) {
                double* ga = pgrad(self, 0);
                double* gb = pgrad(self, 1);
                const double* xv = self.parents[0]->value.data();
                const double* yv = self.parents[1]->value.data();
                const double* g = self.grad.data();
                const std::size_t rows = self.shape.rows;
                const std::size_t cols = self.shape.cols;
                if (ga) {
                  for_each_pair(kind, rows, cols, [&](std::size_t i, std::size_t j) {
                    if constexpr (Op == BinOp::kAdd || Op == BinOp::kSub) ga[i] += g[i];
                    if constexpr (Op == BinOp::kMul) ga[i] += g[i] * yv[j];
                    if constexpr (Op == BinOp::kDiv) ga[i] += g[i] / yv[j];
                  });
                }
                if (gb) {
                  for_each_pair(kind, rows, cols, [&](std::size_t i, std::size_t j) {
                    if constexpr (Op == BinOp::kAdd) gb[j] += g[i];
                    if constexpr (Op == BinOp::kSub) gb[j] -= g[i];
                    if constexpr (Op == BinOp::kMul) gb[j] += g[i] * xv[i];
                    if constexpr (Op == BinOp::kDiv) gb[j] -= g[i] * xv[i] / (yv[j] * yv[j]);
                  });
                }
              },
              name);
}

template <BinOp Op>
Tensor binary(const Tensor& a_in, const Tensor& b_in, const char* name) {
  const Tensor* a = &a_in;
  const Tensor* b = &b_in;
  if constexpr (Op == BinOp::kAdd || Op == BinOp::kMul) {
    if (a->shape() != b->shape() && a->size() < b->size()) std::swap(a, b);
  }
  const Bcast kind = classify(name, a->shape(), b->shape());
  return binary_impl<Op>(*a, *b, kind, name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary<BinOp::kAdd>(a, b, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary<BinOp::kSub>(a, b, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary<BinOp::kMul>(a, b, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary<BinOp::kDiv>(a, b, "div"); }

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  return make({1, 1}, {s}, {a.ptr()},
              [](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const std::size_t n = self.parents[0]->value.size();
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
              },
              "sum");
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  const double n = static_cast<double>(a.size());
  return make({1, 1}, {s / n}, {a.ptr()},
              [n](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const double d = self.grad[0] / n;
                for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += d;
              },
              "mean");
}

Tensor mean_rows(const Tensor& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += a.at(r, c);
  for (double& v : out) v /= static_cast<double>(rows);
  return make({1, cols}, std::move(out), {a.ptr()},
              [rows, cols](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const double inv = 1.0 / static_cast<double>(rows);
                for (std::size_t r = 0; r < rows; ++r)
                  for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c] * inv;
              },
              "mean_rows");
}

Tensor sum_cols(const Tensor& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += a.at(r, c);
  return make({rows, 1}, std::move(out), {a.ptr()},
              [rows, cols](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                for (std::size_t r = 0; r < rows; ++r)
                  for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
              },
              "sum_cols");
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor max_with_zero(const Tensor& a) { return relu(a); }

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const auto& x = a.node()->value;
  std::vector<double> cdf(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cdf[i] = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
    out[i] = x[i] * cdf[i];
  }
  return make(a.shape(), std::move(out), {a.ptr()},
              [inv_sqrt_2pi, cdf = std::move(cdf)](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const auto& xv = self.parents[0]->value;
                for (std::size_t i = 0; i < xv.size(); ++i)
                  g[i] += self.grad[i] * (cdf[i] + xv[i] * inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]));
              },
              "gelu");
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  // Treat the normalized axis as the inner loop via strides.
  const std::size_t outer = axis == 1 ? rows : cols;
  const std::size_t inner = axis == 1 ? cols : rows;
  const std::size_t so = axis == 1 ? cols : 1;
  const std::size_t si = axis == 1 ? 1 : cols;
  const auto& x = a.node()->value;
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x[o * so + i * si]);
    double z = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double e = std::exp(x[o * so + i * si] - mx);
      y[o * so + i * si] = e;
      z += e;
    }
    for (std::size_t i = 0; i < inner; ++i) y[o * so + i * si] /= z;
  }
  return make(a.shape(), std::move(y), {a.ptr()},
              [outer, inner, so, si](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const auto& yv = self.value;
                for (std::size_t o = 0; o < outer; ++o) {
                  double dot = 0.0;
                  for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t k = o * so + i * si;
                    dot += self.grad[k] * yv[k];
                  }
                  for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t k = o * so + i * si;
                    g[k] += yv[k] * (self.grad[k] - dot);
                  }
                }
              },
              "softmax");
}

Tensor log_softmax(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("log_softmax: axis must be 0 or 1");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const std::size_t outer = axis == 1 ? rows : cols;
  const std::size_t inner = axis == 1 ? cols : rows;
  const std::size_t so = axis == 1 ? cols : 1;
  const std::size_t si = axis == 1 ? 1 : cols;
  const auto& x = a.node()->value;
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x[o * so + i * si]);
    double z = 0.0;
    for (std::size_t i = 0; i < inner; ++i) z += std::exp(x[o * so + i * si] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < inner; ++i) y[o * so + i * si] = x[o * so + i * si] - lse;
  }
  return make(a.shape(), std::move(y), {a.ptr()},
              [outer, inner, so, si](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                for (std::size_t o = 0; o < outer; ++o) {
                  double gs = 0.0;
                  for (std::size_t i = 0; i < inner; ++i) gs += self.grad[o * so + i * si];
                  for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t k = o * so + i * si;
                    g[k] += self.grad[k] - std::exp(self.value[k]) * gs;
                  }
                }
              },
              "log_softmax");
}

Tensor layer_norm(const Tensor& a, double eps) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const auto& x = a.node()->value;
  std::vector<double> y(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = (xr[c] - mu) * inv_std[r];
  }
  return make(a.shape(), std::move(y), {a.ptr()},
              [rows, cols, inv_std = std::move(inv_std)](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                const double n = static_cast<double>(cols);
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* gy = self.grad.data() + r * cols;
                  const double* yr = self.value.data() + r * cols;
                  double sg = 0.0, sgy = 0.0;
                  for (std::size_t c = 0; c < cols; ++c) {
                    sg += gy[c];
                    sgy += gy[c] * yr[c];
                  }
                  for (std::size_t c = 0; c < cols; ++c)
                    g[r * cols + c] += inv_std[r] * (gy[c] - sg / n - yr[c] * sgy / n);
                }
              },
              "layer_norm");
}

Tensor linear_interp_1d(const Tensor& a, std::size_t new_len) {
  if (new_len == 0) throw ShapeError("linear_interp_1d: target length must be positive");
  const std::size_t rows = a.rows();
  const std::size_t src = a.cols();
  std::vector<std::size_t> lo(new_len);
  std::vector<double> frac(new_len);
  for (std::size_t j = 0; j < new_len; ++j) {
    const double pos = new_len > 1 ? static_cast<double>(j) * static_cast<double>(src - 1) /
                                         static_cast<double>(new_len - 1)
                                   : 0.0;
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= src - 1) i0 = src - 1;
    lo[j] = i0;
    frac[j] = i0 + 1 < src ? pos - static_cast<double>(i0) : 0.0;
  }
  std::vector<double> out(rows * new_len);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < new_len; ++j) {
      const double x0 = a.at(r, lo[j]);
      const double x1 = a.at(r, std::min(lo[j] + 1, src - 1));
      out[r * new_len + j] = (1.0 - frac[j]) * x0 + frac[j] * x1;
    }
  }
  return make({rows, new_len}, std::move(out), {a.ptr()},
              [rows, src, new_len, lo = std::move(lo), frac = std::move(frac)](Node& self) {
                double* g = pgrad(self, 0);
                if (!g) return;
                for (std::size_t r = 0; r < rows; ++r) {
                  for (std::size_t j = 0; j < new_len; ++j) {
                    const double gy = self.grad[r * new_len + j];
                    g[r * src + lo[j]] += (1.0 - frac[j]) * gy;
                    g[r * src + std::min(lo[j] + 1, src - 1)] += frac[j] * gy;
                  }
                }
              },
              "linear_interp_1d");
}

void check_finite(const Tensor& t, const std::string& where) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t.value()[i]))
      throw NumericError(where + ": non-finite value at flat index " + std::to_string(i));
  }
}

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps) {
  for (auto& p : params) p.zero_grad();
  Tensor y = f();
  if (y.size() != 1) throw ShapeError("grad_check: f must return a scalar, got " + y.shape().str());
  check_finite(y, "grad_check: f()");
  y.backward();

  GradCheckResult worst;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p.value()[k];
      p.value()[k] = saved + eps;
      const double fp = f().item();
      p.value()[k] = saved - eps;
      const double fm = f().item();
      p.value()[k] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("grad_check: non-finite f at parameter " + std::to_string(pi) +
                           ", coordinate " + std::to_string(k));
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > worst.max_rel_error) worst = {rel, pi, k, a, numeric};
    }
  }
  return worst;
}

}  // namespace pib::ad
