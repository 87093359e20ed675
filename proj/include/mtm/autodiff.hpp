#pragma once

// Reverse-mode autodiff over a recorded op tape. Sequences use a
// positions-by-channels ({L, C}) layout so the channel axis is contiguous.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtm::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Raised on NaN/Inf values or on shape contract violations.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape)) throw ShapeError("tensor data does not match shape " + shape_string(shape));
  }

  std::size_t size() const { return data.size(); }
};

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

/// A named trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> grad;
};

/// Named parameters with stable addresses (deque storage).
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(std::string name, Shape shape) {
    if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
    Tensor<T> value(std::move(shape));
    std::vector<T> grad(value.size(), T(0));
    params_.push_back(Parameter<T>{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  Parameter<T>& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter " + name);
  }
  const Parameter<T>& at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter " + name);
  }

  std::deque<Parameter<T>>& params() { return params_; }
  const std::deque<Parameter<T>>& params() const { return params_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  bool grads_finite() const {
    for (const auto& p : params_)
      if (!all_finite<T>(p.grad)) return false;
    return true;
  }

 private:
  std::deque<Parameter<T>> params_;
};

struct Var {
  std::size_t id = 0;
};

/// Records ops and their backward closures. With `record == false` the graph
/// only evaluates forward values (used by actors and evaluation).
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  /// Constant leaf: no gradient.
  Var constant(Tensor<T> value) { return push_owned(std::move(value), false); }

  /// Differentiable leaf owning its value; read the gradient with grad().
  Var variable(Tensor<T> value) { return push_owned(std::move(value), record_); }

  /// Borrowed parameter leaf; gradients accumulate into `p.grad`.
  Var param(Parameter<T>& p) {
    Node n;
    n.shape = p.value.shape;
    n.ext = p.value.data.data();
    n.ext_grad = record_ ? p.grad.data() : nullptr;
    n.requires_grad = record_;
    return push(std::move(n));
  }

  /// Read-only parameter leaf (no gradient).
  Var param(const Parameter<T>& p) {
    Node n;
    n.shape = p.value.shape;
    n.ext = p.value.data.data();
    return push(std::move(n));
  }

  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  std::size_t size(Var v) const { return numel(nodes_[v.id].shape); }
  const T* data(Var v) const {
    const Node& n = nodes_[v.id];
    return n.ext ? n.ext : n.own.data();
  }
  std::span<const T> value(Var v) const { return {data(v), size(v)}; }
  T scalar(Var v) const { return data(v)[0]; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of `v`, or nullptr when `v` does not require grad.
  T* grad_ptr(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.ext_grad) return n.ext_grad;
    if (n.grad.empty()) n.grad.assign(numel(n.shape), T(0));
    return n.grad.data();
  }
  std::span<const T> grad(Var v) {
    T* g = grad_ptr(v);
    if (!g) return {};
    return {g, size(v)};
  }

  /// Appends an op result. `backward(self)` runs once during backward().
  Var push_result(Shape shape, std::vector<T> values, std::initializer_list<Var> inputs,
                  std::function<void(Var)> backward) {
    Node n;
    n.shape = std::move(shape);
    n.own = std::move(values);
    if (record_)
      for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }
  Var push_result(Shape shape, std::vector<T> values, const std::vector<Var>& inputs,
                  std::function<void(Var)> backward) {
    Node n;
    n.shape = std::move(shape);
    n.own = std::move(values);
    if (record_)
      for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  /// Seeds d(out)/d(out) = seed for a single-element `out` and propagates.
  void backward(Var out, T seed = T(1)) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    if (size(out) != 1) throw ShapeError("backward needs a scalar output");
    if (!std::isfinite(scalar(out))) throw NumericError("non-finite loss");
    T* g = grad_ptr(out);
    if (!g) return;
    g[0] += seed;
    for (std::size_t i = out.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && (!n.grad.empty() || n.ext_grad)) n.backward(Var{i});
    }
  }

 private:
  struct Node {
    Shape shape;
    std::vector<T> own;
    const T* ext = nullptr;
    std::vector<T> grad;
    T* ext_grad = nullptr;
    bool requires_grad = false;
    std::function<void(Var)> backward;
  };

  Var push_owned(Tensor<T> value, bool requires_grad) {
    Node n;
    n.shape = std::move(value.shape);
    n.own = std::move(value.data);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Ops. Shapes are checked on entry; all throw ShapeError on mismatch.

template <typename T>
Var add(Graph<T>& g, Var a, Var b);
template <typename T>
Var sub(Graph<T>& g, Var a, Var b);
template <typename T>
Var mul(Graph<T>& g, Var a, Var b);
template <typename T>
Var scale(Graph<T>& g, Var a, T factor);
template <typename T>
Var relu(Graph<T>& g, Var a);
template <typename T>
Var sigmoid(Graph<T>& g, Var a);
template <typename T>
Var tanh(Graph<T>& g, Var a);
template <typename T>
Var sum(Graph<T>& g, Var a);
template <typename T>
Var square(Graph<T>& g, Var a);

/// Flattens and concatenates into a 1-D vector.
template <typename T>
Var concat(Graph<T>& g, const std::vector<Var>& parts);
template <typename T>
Var reshape(Graph<T>& g, Var a, Shape shape);
template <typename T>
Var slice(Graph<T>& g, Var a, std::size_t start, std::size_t length);
/// Row `r` of a 2-D tensor as a 1-D vector.
template <typename T>
Var row(Graph<T>& g, Var a, std::size_t r);

/// {m,k} x {k,n} -> {m,n}
template <typename T>
Var matmul(Graph<T>& g, Var a, Var b);
/// {m,k} x {n,k}^T -> {m,n}
template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b);

/// x {n}, w {n, m}, b {m} -> x w + b, shape {m}
template <typename T>
Var dense(Graph<T>& g, Var x, Var w, Var b);

/// Width-3, stride-1, zero-padded cross-correlation along positions.
/// x {L, Cin}, w {3, Cin, Cout}, b {Cout} -> {L, Cout}
template <typename T>
Var conv1d(Graph<T>& g, Var x, Var w, Var b);

template <typename T>
Var row_softmax(Graph<T>& g, Var a);
template <typename T>
Var row_log_softmax(Graph<T>& g, Var a);

/// log softmax(logits)[index] for a 1-D logits vector (or row `row` of a 2-D one).
template <typename T>
Var categorical_logprob(Graph<T>& g, Var logits, std::size_t index, std::size_t row = 0);
/// Entropy of softmax(logits) for one row.
template <typename T>
Var categorical_entropy(Graph<T>& g, Var logits, std::size_t row = 0);

/// Scaled dot-product scores q k^T / sqrt(d): {q,d} x {L,d} -> {q,L}.
template <typename T>
Var attention_scores(Graph<T>& g, Var queries, Var keys);

struct AttentionResult {
  Var output;   // {q, v}
  Var weights;  // {q, L}
};

template <typename T>
AttentionResult softmax_attention(Graph<T>& g, Var queries, Var keys, Var values);

struct LstmWeights {
  Var w;  // {Cin + H, 4H}, gate order i, f, g, o
  Var b;  // {4H}
};

/// Final hidden state of a single-direction LSTM over the rows of x {L, Cin}.
template <typename T>
Var lstm_final(Graph<T>& g, Var x, const LstmWeights& weights, bool reverse);

/// Concatenation of the forward and backward final states, shape {2H}.
template <typename T>
Var bilstm(Graph<T>& g, Var x, const LstmWeights& forward, const LstmWeights& backward);

}  // namespace mtm::ad
