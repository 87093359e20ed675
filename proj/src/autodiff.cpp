#include "mtm/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>

namespace mtm::ad {

std::string shape_string(const Shape& shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const MatR<T>>;
template <typename T>
using MMap = Eigen::Map<MatR<T>>;
template <typename T>
using CVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_2d(const char* op, const Shape& s) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_string(s));
}

template <typename T>
std::pair<std::size_t, std::size_t> rows_cols(const Graph<T>& g, Var v) {
  const Shape& s = g.shape(v);
  if (s.size() == 2) return {s[0], s[1]};
  return {1, numel(s)};
}

template <typename T, typename Back>
Var push_with_self(Graph<T>& g, Shape shape, std::vector<T> values, std::initializer_list<Var> inputs, Back back) {
  return g.push_result(std::move(shape), std::move(values), inputs, std::move(back));
}

template <typename T, typename Back>
Var push_with_self(Graph<T>& g, Shape shape, std::vector<T> values, const std::vector<Var>& inputs, Back back) {
  return g.push_result(std::move(shape), std::move(values), inputs, std::move(back));
}

}  // namespace

// Identical shapes, or two single-element tensors of any rank.
template <typename T>
bool elementwise_compatible(const Graph<T>& g, Var a, Var b) {
  return g.shape(a) == g.shape(b) || (g.size(a) == 1 && g.size(b) == 1);
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  if (!elementwise_compatible(g, a, b)) shape_fail("add", g.shape(a), g.shape(b));
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  const T* y = g.data(b);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
  return push_with_self(g, g.shape(a), std::move(out), {a, b}, [&g, a, b, n](Var self) {
    const T* go = g.grad_ptr(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
    if (T* gb = g.grad_ptr(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] += go[i];
  });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  if (!elementwise_compatible(g, a, b)) shape_fail("sub", g.shape(a), g.shape(b));
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  const T* y = g.data(b);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
  return push_with_self(g, g.shape(a), std::move(out), {a, b}, [&g, a, b, n](Var self) {
    const T* go = g.grad_ptr(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
    if (T* gb = g.grad_ptr(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] -= go[i];
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  if (!elementwise_compatible(g, a, b)) shape_fail("mul", g.shape(a), g.shape(b));
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  const T* y = g.data(b);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
  return push_with_self(g, g.shape(a), std::move(out), {a, b}, [&g, a, b, n](Var self) {
    const T* go = g.grad_ptr(self);
    const T* x = g.data(a);
    const T* y = g.data(b);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * y[i];
    if (T* gb = g.grad_ptr(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * x[i];
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * factor;
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, n, factor](Var self) {
    const T* go = g.grad_ptr(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * factor;
  });
}

template <typename T>
Var relu(Graph<T>& g, Var a) {
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, n](Var self) {
    const T* go = g.grad_ptr(self);
    const T* x = g.data(a);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i)
        if (x[i] > T(0)) ga[i] += go[i];
  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var a) {
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  for (std::size_t i = 0; i < n; ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, n](Var self) {
    const T* go = g.grad_ptr(self);
    const T* y = g.data(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var tanh(Graph<T>& g, Var a) {
  const std::size_t n = g.size(a);
  std::vector<T> out(n);
  const T* x = g.data(a);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, n](Var self) {
    const T* go = g.grad_ptr(self);
    const T* y = g.data(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  const std::size_t n = g.size(a);
  const T* x = g.data(a);
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return push_with_self(g, Shape{}, std::vector<T>{s}, {a}, [&g, a, n](Var self) {
    const T go = g.grad_ptr(self)[0];
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go;
  });
}

template <typename T>
Var square(Graph<T>& g, Var a) {
  return mul(g, a, a);
}

template <typename T>
Var concat(Graph<T>& g, const std::vector<Var>& parts) {
  std::size_t total = 0;
  for (Var p : parts) total += g.size(p);
  std::vector<T> out;
  out.reserve(total);
  for (Var p : parts) {
    auto v = g.value(p);
    out.insert(out.end(), v.begin(), v.end());
  }
  return push_with_self(g, Shape{total}, std::move(out), parts, [&g, parts](Var self) {
    const T* go = g.grad_ptr(self);
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t n = g.size(p);
      if (T* gp = g.grad_ptr(p))
        for (std::size_t i = 0; i < n; ++i) gp[i] += go[offset + i];
      offset += n;
    }
  });
}

template <typename T>
Var reshape(Graph<T>& g, Var a, Shape shape) {
  if (numel(shape) != g.size(a)) shape_fail("reshape", g.shape(a), shape);
  auto v = g.value(a);
  const std::size_t n = v.size();
  return push_with_self(g, std::move(shape), std::vector<T>(v.begin(), v.end()), {a}, [&g, a, n](Var self) {
    const T* go = g.grad_ptr(self);
    if (T* ga = g.grad_ptr(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
  });
}

template <typename T>
Var slice(Graph<T>& g, Var a, std::size_t start, std::size_t length) {
  if (start + length > g.size(a)) throw ShapeError("slice out of range for " + shape_string(g.shape(a)));
  const T* x = g.data(a);
  return push_with_self(g, Shape{length}, std::vector<T>(x + start, x + start + length), {a},
                        [&g, a, start, length](Var self) {
                          const T* go = g.grad_ptr(self);
                          if (T* ga = g.grad_ptr(a))
                            for (std::size_t i = 0; i < length; ++i) ga[start + i] += go[i];
                        });
}

template <typename T>
Var row(Graph<T>& g, Var a, std::size_t r) {
  require_2d("row", g.shape(a));
  const std::size_t cols = g.shape(a)[1];
  if (r >= g.shape(a)[0]) throw ShapeError("row index out of range");
  return slice(g, a, r * cols, cols);
}

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  require_2d("matmul", g.shape(a));
  require_2d("matmul", g.shape(b));
  const std::size_t m = g.shape(a)[0], k = g.shape(a)[1], n = g.shape(b)[1];
  if (g.shape(b)[0] != k) shape_fail("matmul", g.shape(a), g.shape(b));
  std::vector<T> out(m * n);
  MMap<T>(out.data(), m, n).noalias() = CMap<T>(g.data(a), m, k) * CMap<T>(g.data(b), k, n);
  return push_with_self(g, Shape{m, n}, std::move(out), {a, b}, [&g, a, b, m, k, n](Var self) {
    CMap<T> go(g.grad_ptr(self), m, n);
    if (T* ga = g.grad_ptr(a)) MMap<T>(ga, m, k).noalias() += go * CMap<T>(g.data(b), k, n).transpose();
    if (T* gb = g.grad_ptr(b)) MMap<T>(gb, k, n).noalias() += CMap<T>(g.data(a), m, k).transpose() * go;
  });
}

template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b) {
  require_2d("matmul_nt", g.shape(a));
  require_2d("matmul_nt", g.shape(b));
  const std::size_t m = g.shape(a)[0], k = g.shape(a)[1], n = g.shape(b)[0];
  if (g.shape(b)[1] != k) shape_fail("matmul_nt", g.shape(a), g.shape(b));
  std::vector<T> out(m * n);
  MMap<T>(out.data(), m, n).noalias() = CMap<T>(g.data(a), m, k) * CMap<T>(g.data(b), n, k).transpose();
  return push_with_self(g, Shape{m, n}, std::move(out), {a, b}, [&g, a, b, m, k, n](Var self) {
    CMap<T> go(g.grad_ptr(self), m, n);
    if (T* ga = g.grad_ptr(a)) MMap<T>(ga, m, k).noalias() += go * CMap<T>(g.data(b), n, k);
    if (T* gb = g.grad_ptr(b)) MMap<T>(gb, n, k).noalias() += go.transpose() * CMap<T>(g.data(a), m, k);
  });
}

template <typename T>
Var dense(Graph<T>& g, Var x, Var w, Var b) {
  require_2d("dense", g.shape(w));
  const std::size_t n = g.shape(w)[0], m = g.shape(w)[1];
  if (g.size(x) != n) shape_fail("dense", g.shape(x), g.shape(w));
  if (g.size(b) != m) shape_fail("dense", g.shape(w), g.shape(b));
  std::vector<T> out(m);
  MVec<T>(out.data(), m).noalias() =
      CMap<T>(g.data(w), n, m).transpose() * CVec<T>(g.data(x), n) + CVec<T>(g.data(b), m);
  return push_with_self(g, Shape{m}, std::move(out), {x, w, b}, [&g, x, w, b, n, m](Var self) {
    CVec<T> go(g.grad_ptr(self), m);
    if (T* gx = g.grad_ptr(x)) MVec<T>(gx, n).noalias() += CMap<T>(g.data(w), n, m) * go;
    if (T* gw = g.grad_ptr(w)) MMap<T>(gw, n, m).noalias() += CVec<T>(g.data(x), n) * go.transpose();
    if (T* gb = g.grad_ptr(b)) MVec<T>(gb, m) += go;
  });
}

template <typename T>
Var conv1d(Graph<T>& g, Var x, Var w, Var b) {
  require_2d("conv1d", g.shape(x));
  const Shape& ws = g.shape(w);
  if (ws.size() != 3 || ws[0] != 3) throw ShapeError("conv1d: filters must be {3, Cin, Cout}, got " + shape_string(ws));
  const std::size_t len = g.shape(x)[0], cin = g.shape(x)[1], cout = ws[2];
  if (ws[1] != cin) shape_fail("conv1d", g.shape(x), ws);
  if (g.size(b) != cout) shape_fail("conv1d", ws, g.shape(b));
  if (len == 0) throw ShapeError("conv1d: empty sequence");

  // Tap k reads position l + k - 1; rows outside [0, len) are zero padding.
  struct Span {
    std::size_t src, dst, count;
  };
  auto tap_span = [len](std::size_t k) -> Span {
    if (k == 0) return {0, 1, len - 1};
    if (k == 1) return {0, 0, len};
    return {1, 0, len - 1};
  };

  std::vector<T> out(len * cout);
  MMap<T> y(out.data(), len, cout);
  y.rowwise() = CVec<T>(g.data(b), cout).transpose();
  CMap<T> xm(g.data(x), len, cin);
  for (std::size_t k = 0; k < 3; ++k) {
    const Span s = tap_span(k);
    if (s.count == 0) continue;
    CMap<T> wk(g.data(w) + k * cin * cout, cin, cout);
    y.middleRows(s.dst, s.count).noalias() += xm.middleRows(s.src, s.count) * wk;
  }
  return push_with_self(g, Shape{len, cout}, std::move(out), {x, w, b},
                        [&g, x, w, b, len, cin, cout, tap_span](Var self) {
                          CMap<T> go(g.grad_ptr(self), len, cout);
                          T* gx = g.grad_ptr(x);
                          T* gw = g.grad_ptr(w);
                          for (std::size_t k = 0; k < 3; ++k) {
                            const Span s = tap_span(k);
                            if (s.count == 0) continue;
                            if (gx) {
                              CMap<T> wk(g.data(w) + k * cin * cout, cin, cout);
                              MMap<T>(gx, len, cin).middleRows(s.src, s.count).noalias() +=
                                  go.middleRows(s.dst, s.count) * wk.transpose();
                            }
                            if (gw) {
                              CMap<T> xm(g.data(x), len, cin);
                              MMap<T>(gw + k * cin * cout, cin, cout).noalias() +=
                                  xm.middleRows(s.src, s.count).transpose() * go.middleRows(s.dst, s.count);
                            }
                          }
                          if (T* gb = g.grad_ptr(b)) MVec<T>(gb, cout) += go.colwise().sum().transpose();
                        });
}

template <typename T>
Var row_softmax(Graph<T>& g, Var a) {
  const auto [rows, cols] = rows_cols(g, a);
  if (cols == 0) throw ShapeError("softmax over an empty row");
  const T* x = g.data(a);
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = out.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T z = T(0);
    for (std::size_t c = 0; c < cols; ++c) z += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, rows, cols](Var self) {
    T* ga = g.grad_ptr(a);
    if (!ga) return;
    const T* go = g.grad_ptr(self);
    const T* y = g.data(self);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T(0);
      for (std::size_t c = 0; c < cols; ++c) dot += go[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += y[r * cols + c] * (go[r * cols + c] - dot);
    }
  });
}

template <typename T>
Var row_log_softmax(Graph<T>& g, Var a) {
  const auto [rows, cols] = rows_cols(g, a);
  if (cols == 0) throw ShapeError("log-softmax over an empty row");
  const T* x = g.data(a);
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T z = T(0);
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xr[c] - lse;
  }
  return push_with_self(g, g.shape(a), std::move(out), {a}, [&g, a, rows, cols](Var self) {
    T* ga = g.grad_ptr(a);
    if (!ga) return;
    const T* go = g.grad_ptr(self);
    const T* y = g.data(self);
    for (std::size_t r = 0; r < rows; ++r) {
      T total = T(0);
      for (std::size_t c = 0; c < cols; ++c) total += go[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += go[r * cols + c] - std::exp(y[r * cols + c]) * total;
    }
  });
}

template <typename T>
Var categorical_logprob(Graph<T>& g, Var logits, std::size_t index, std::size_t r) {
  const auto [rows, cols] = rows_cols(g, logits);
  if (r >= rows || index >= cols) throw std::out_of_range("categorical index out of range");
  const T* x = g.data(logits) + r * cols;
  const T mx = *std::max_element(x, x + cols);
  T z = T(0);
  for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
  const T lse = mx + std::log(z);
  return push_with_self(g, Shape{}, std::vector<T>{x[index] - lse}, {logits},
                        [&g, logits, index, r, cols = cols, lse](Var self) {
                          T* ga = g.grad_ptr(logits);
                          if (!ga) return;
                          const T go = g.grad_ptr(self)[0];
                          const T* x = g.data(logits) + r * cols;
                          T* gr = ga + r * cols;
                          for (std::size_t c = 0; c < cols; ++c) gr[c] -= go * std::exp(x[c] - lse);
                          gr[index] += go;
                        });
}

template <typename T>
Var categorical_entropy(Graph<T>& g, Var logits, std::size_t r) {
  const auto [rows, cols] = rows_cols(g, logits);
  if (r >= rows) throw std::out_of_range("categorical row out of range");
  const T* x = g.data(logits) + r * cols;
  const T mx = *std::max_element(x, x + cols);
  T z = T(0);
  for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
  const T lse = mx + std::log(z);
  T h = T(0);
  for (std::size_t c = 0; c < cols; ++c) {
    const T lp = x[c] - lse;
    h -= std::exp(lp) * lp;
  }
  // dH/dx_c = -p_c (log p_c + H)
  return push_with_self(g, Shape{}, std::vector<T>{h}, {logits}, [&g, logits, r, cols = cols, lse, h](Var self) {
    T* ga = g.grad_ptr(logits);
    if (!ga) return;
    const T go = g.grad_ptr(self)[0];
    const T* x = g.data(logits) + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const T lp = x[c] - lse;
      ga[r * cols + c] -= go * std::exp(lp) * (lp + h);
    }
  });
}

template <typename T>
Var attention_scores(Graph<T>& g, Var queries, Var keys) {
  require_2d("attention", g.shape(queries));
  require_2d("attention", g.shape(keys));
  const std::size_t d = g.shape(queries)[1];
  if (d == 0) throw ShapeError("attention: key dimension must be positive");
  if (g.shape(keys)[1] != d) shape_fail("attention", g.shape(queries), g.shape(keys));
  return scale(g, matmul_nt(g, queries, keys), T(1) / std::sqrt(static_cast<T>(d)));
}

template <typename T>
AttentionResult softmax_attention(Graph<T>& g, Var queries, Var keys, Var values) {
  require_2d("attention", g.shape(values));
  if (g.shape(values)[0] != g.shape(keys)[0]) shape_fail("attention", g.shape(keys), g.shape(values));
  Var weights = row_softmax(g, attention_scores(g, queries, keys));
  return {matmul(g, weights, values), weights};
}

template <typename T>
Var lstm_final(Graph<T>& g, Var x, const LstmWeights& weights, bool reverse) {
  require_2d("lstm", g.shape(x));
  const std::size_t len = g.shape(x)[0], cin = g.shape(x)[1];
  const Shape& ws = g.shape(weights.w);
  if (ws.size() != 2 || ws[1] % 4 != 0) throw ShapeError("lstm: weights must be {Cin + H, 4H}");
  const std::size_t hidden = ws[1] / 4;
  if (ws[0] != cin + hidden) shape_fail("lstm", g.shape(x), ws);
  if (len == 0) throw ShapeError("lstm: empty sequence");

  Var h = g.constant(Tensor<T>(Shape{hidden}));
  Var c = g.constant(Tensor<T>(Shape{hidden}));
  for (std::size_t step = 0; step < len; ++step) {
    const std::size_t t = reverse ? len - 1 - step : step;
    Var z = dense(g, concat(g, {row(g, x, t), h}), weights.w, weights.b);
    Var i = sigmoid(g, slice(g, z, 0, hidden));
    Var f = sigmoid(g, slice(g, z, hidden, hidden));
    Var cand = tanh(g, slice(g, z, 2 * hidden, hidden));
    Var o = sigmoid(g, slice(g, z, 3 * hidden, hidden));
    c = add(g, mul(g, f, c), mul(g, i, cand));
    h = mul(g, o, tanh(g, c));
  }
  return h;
}

template <typename T>
Var bilstm(Graph<T>& g, Var x, const LstmWeights& forward, const LstmWeights& backward) {
  Var hf = lstm_final(g, x, forward, false);
  Var hb = lstm_final(g, x, backward, true);
  return concat(g, {hf, hb});
}

#define MTM_INSTANTIATE_AD(T)                                                               \
  template Var add<T>(Graph<T>&, Var, Var);                                                 \
  template Var sub<T>(Graph<T>&, Var, Var);                                                 \
  template Var mul<T>(Graph<T>&, Var, Var);                                                 \
  template Var scale<T>(Graph<T>&, Var, T);                                                 \
  template Var relu<T>(Graph<T>&, Var);                                                     \
  template Var sigmoid<T>(Graph<T>&, Var);                                                  \
  template Var tanh<T>(Graph<T>&, Var);                                                     \
  template Var sum<T>(Graph<T>&, Var);                                                      \
  template Var square<T>(Graph<T>&, Var);                                                   \
  template Var concat<T>(Graph<T>&, const std::vector<Var>&);                               \
  template Var reshape<T>(Graph<T>&, Var, Shape);                                           \
  template Var slice<T>(Graph<T>&, Var, std::size_t, std::size_t);                          \
  template Var row<T>(Graph<T>&, Var, std::size_t);                                         \
  template Var matmul<T>(Graph<T>&, Var, Var);                                              \
  template Var matmul_nt<T>(Graph<T>&, Var, Var);                                           \
  template Var dense<T>(Graph<T>&, Var, Var, Var);                                          \
  template Var conv1d<T>(Graph<T>&, Var, Var, Var);                                         \
  template Var row_softmax<T>(Graph<T>&, Var);                                              \
  template Var row_log_softmax<T>(Graph<T>&, Var);                                          \
  template Var categorical_logprob<T>(Graph<T>&, Var, std::size_t, std::size_t);            \
  template Var categorical_entropy<T>(Graph<T>&, Var, std::size_t);                         \
  template Var attention_scores<T>(Graph<T>&, Var, Var);                                    \
  template AttentionResult softmax_attention<T>(Graph<T>&, Var, Var, Var);                  \
  template Var lstm_final<T>(Graph<T>&, Var, const LstmWeights&, bool);                     \
  template Var bilstm<T>(Graph<T>&, Var, const LstmWeights&, const LstmWeights&);

MTM_INSTANTIATE_AD(float)
MTM_INSTANTIATE_AD(double)

#undef MTM_INSTANTIATE_AD

}  // namespace mtm::ad
