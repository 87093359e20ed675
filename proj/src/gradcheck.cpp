#include "mtm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "mtm/autodiff.hpp"
#include "mtm/policy.hpp"
#include "mtm/trainer.hpp"

namespace mtm {

namespace {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;

template <typename T>
using OpFn = std::function<Var(Graph<T>&, const std::vector<Var>&)>;

struct OpCase {
  std::string shape;
  bool length_one = false;
  std::vector<Tensor<double>> inputs;
  OpFn<double> f64;
  OpFn<float> f32;
};

using CaseMaker = std::function<OpCase(Rng&, std::size_t length)>;

Tensor<double> uniform(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = d(rng);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename F>
OpCase make_case(std::string shape, std::size_t length, std::vector<Tensor<double>> inputs, F f) {
  OpCase c;
  c.shape = std::move(shape);
  c.length_one = length == 1;
  c.inputs = std::move(inputs);
  c.f64 = f;
  c.f32 = f;
  return c;
}

std::string dims(std::initializer_list<std::size_t> d) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t v : d) {
    os << (first ? "" : "x") << v;
    first = false;
  }
  return os.str();
}

template <typename T>
Tensor<T> cast(const Tensor<double>& t) {
  Tensor<T> out(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<T>(t.data[i]);
  return out;
}

/// Scalar loss sum(out * R) for a fixed projection R.
template <typename T>
Var project(Graph<T>& g, Var out, const std::vector<double>& r) {
  Tensor<T> rt(g.shape(out));
  for (std::size_t i = 0; i < rt.size(); ++i) rt.data[i] = static_cast<T>(r[i]);
  return ad::sum(g, ad::mul(g, out, g.constant(std::move(rt))));
}

double eval_case(const OpCase& c, const std::vector<Tensor<double>>& inputs, const std::vector<double>& r) {
  Graph<double> g(false);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return g.scalar(project(g, c.f64(g, vars), r));
}

template <typename T>
std::vector<std::vector<double>> analytic(const OpCase& c, const OpFn<T>& f, const std::vector<double>& r) {
  Graph<T> g(true);
  std::vector<Var> vars;
  for (const auto& t : c.inputs) vars.push_back(g.variable(cast<T>(t)));
  g.backward(project(g, f(g, vars), r));
  std::vector<std::vector<double>> grads;
  for (Var v : vars) {
    std::vector<double> gd(g.size(v), 0.0);
    auto gs = g.grad(v);
    for (std::size_t i = 0; i < gs.size(); ++i) gd[i] = static_cast<double>(gs[i]);
    grads.push_back(std::move(gd));
  }
  return grads;
}

/// Central difference with kink detection; returns false for a
/// non-differentiable coordinate.
template <typename Eval>
bool central_difference(double& x, double h, const Eval& f, double& out) {
  const double saved = x;
  const double f0 = f();
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  const double dp = (fp - f0) / h, dm = (f0 - fm) / h;
  if (std::abs(dp - dm) > 1e-4 * std::max(std::abs(dp), std::abs(dm)) + 1e-5) return false;
  out = (fp - fm) / (2 * h);
  return true;
}

double tensor_error(const std::vector<double>& a, const std::vector<double>& n, const std::vector<bool>& use) {
  double num = 0, den = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!use[i]) continue;
    num = std::max(num, std::abs(a[i] - n[i]));
    den = std::max(den, std::abs(n[i]));
  }
  return num / den;
}

void check_op(const std::string& name, const CaseMaker& maker, const GradCheckOptions& opt, Rng& rng,
              GradCheckRow& row) {
  row.op = name;
  for (std::size_t k = 0; k < opt.cases_per_op; ++k) {
    const std::size_t length = k == 0 ? 1 : pick(rng, 1, 7);
    OpCase c = maker(rng, length);
    row.covers_length_one = row.covers_length_one || c.length_one;

    std::vector<double> r;
    {
      Graph<double> g(false);
      std::vector<Var> vars;
      for (const auto& t : c.inputs) vars.push_back(g.constant(t));
      r = uniform(rng, g.shape(c.f64(g, vars)), -1.0, 1.0).data;
    }
    const auto a64 = analytic<double>(c, c.f64, r);
    const auto a32 = analytic<float>(c, c.f32, r);

    // 32-bit inputs rounded once so both columns see the same point.
    std::vector<Tensor<double>> point64 = c.inputs;
    std::vector<Tensor<double>> point32 = c.inputs;
    for (auto& t : point32)
      for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));

    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      const std::size_t n = c.inputs[i].size();
      for (int pass = 0; pass < 2; ++pass) {
        auto& point = pass == 0 ? point64 : point32;
        std::vector<double> num(n, 0.0);
        std::vector<bool> use(n, true);
        for (std::size_t j = 0; j < n; ++j) {
          if (!central_difference(point[i].data[j], opt.step, [&] { return eval_case(c, point, r); }, num[j])) {
            use[j] = false;
            ++row.skipped_coordinates;
          }
        }
        const double err = tensor_error(pass == 0 ? a64[i] : a32[i], num, use);
        if (pass == 0 && err > row.max_error64) {
          row.max_error64 = err;
          row.worst_case = c.shape + " input " + std::to_string(i);
        }
        if (pass == 1) row.max_error32 = std::max(row.max_error32, err);
      }
    }
    ++row.cases;
  }
}

// ---------------------------------------------------------------------------
// Case makers

std::vector<std::pair<std::string, CaseMaker>> op_cases() {
  std::vector<std::pair<std::string, CaseMaker>> ops;
  auto binary = [&](std::string name, auto op) {
    ops.emplace_back(name, [op](Rng& rng, std::size_t L) {
      const std::size_t c = pick(rng, 1, 5);
      return make_case(dims({L, c}), L, {uniform(rng, {L, c}), uniform(rng, {L, c})},
                       [op](auto& g, const std::vector<Var>& v) { return op(g, v[0], v[1]); });
    });
  };
  auto unary = [&](std::string name, auto op, double lo = -1.0, double hi = 1.0, bool away_from_zero = false) {
    ops.emplace_back(name, [=](Rng& rng, std::size_t L) {
      const std::size_t c = pick(rng, 1, 5);
      Tensor<double> x = uniform(rng, {L, c}, lo, hi);
      if (away_from_zero)
        for (double& v : x.data)
          if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - v : 0.05 + v;
      return make_case(dims({L, c}), L, {x}, [op](auto& g, const std::vector<Var>& v) { return op(g, v[0]); });
    });
  };

  binary("add", [](auto& g, Var a, Var b) { return ad::add(g, a, b); });
  binary("sub", [](auto& g, Var a, Var b) { return ad::sub(g, a, b); });
  binary("mul", [](auto& g, Var a, Var b) { return ad::mul(g, a, b); });
  ops.emplace_back("scale", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 5);
    const double f = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    return make_case(dims({L, c}), L, {uniform(rng, {L, c})}, [f](auto& g, const std::vector<Var>& v) {
      using T = std::remove_reference_t<decltype(*g.data(v[0]))>;
      return ad::scale(g, v[0], static_cast<T>(f));
    });
  });
  unary("relu", [](auto& g, Var a) { return ad::relu(g, a); }, -1.0, 1.0, true);
  unary("sigmoid", [](auto& g, Var a) { return ad::sigmoid(g, a); }, -3.0, 3.0);
  unary("tanh", [](auto& g, Var a) { return ad::tanh(g, a); }, -2.0, 2.0);
  unary("sum", [](auto& g, Var a) { return ad::sum(g, a); });
  unary("square", [](auto& g, Var a) { return ad::square(g, a); });
  unary("row_softmax", [](auto& g, Var a) { return ad::row_softmax(g, a); }, -2.0, 2.0);
  unary("row_log_softmax", [](auto& g, Var a) { return ad::row_log_softmax(g, a); }, -2.0, 2.0);

  ops.emplace_back("concat", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 4), m = pick(rng, 1, 4);
    return make_case(dims({L, c}) + "," + dims({m}) + "," + dims({L}), L,
                     {uniform(rng, {L, c}), uniform(rng, {m}), uniform(rng, {L})},
                     [](auto& g, const std::vector<Var>& v) { return ad::concat(g, {v[0], v[1], v[2]}); });
  });
  ops.emplace_back("reshape", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 5);
    return make_case(dims({L, c}), L, {uniform(rng, {L, c})},
                     [L, c](auto& g, const std::vector<Var>& v) { return ad::reshape(g, v[0], Shape{c, L}); });
  });
  ops.emplace_back("slice", [](Rng& rng, std::size_t L) {
    const std::size_t n = L * pick(rng, 1, 4);
    const std::size_t start = pick(rng, 0, n - 1), len = pick(rng, 1, n - start);
    return make_case(dims({n}) + "[" + std::to_string(start) + "+" + std::to_string(len) + "]", L, {uniform(rng, {n})},
                     [start, len](auto& g, const std::vector<Var>& v) { return ad::slice(g, v[0], start, len); });
  });
  ops.emplace_back("row", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 5), r = pick(rng, 0, L - 1);
    return make_case(dims({L, c}) + " row " + std::to_string(r), L, {uniform(rng, {L, c})},
                     [r](auto& g, const std::vector<Var>& v) { return ad::row(g, v[0], r); });
  });
  ops.emplace_back("matmul", [](Rng& rng, std::size_t L) {
    const std::size_t k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    return make_case(dims({L, k}) + "*" + dims({k, n}), L, {uniform(rng, {L, k}), uniform(rng, {k, n})},
                     [](auto& g, const std::vector<Var>& v) { return ad::matmul(g, v[0], v[1]); });
  });
  ops.emplace_back("matmul_nt", [](Rng& rng, std::size_t L) {
    const std::size_t k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    return make_case(dims({L, k}) + "*" + dims({n, k}) + "^T", L, {uniform(rng, {L, k}), uniform(rng, {n, k})},
                     [](auto& g, const std::vector<Var>& v) { return ad::matmul_nt(g, v[0], v[1]); });
  });
  ops.emplace_back("dense", [](Rng& rng, std::size_t L) {
    const std::size_t m = pick(rng, 1, 6);
    return make_case(dims({L}) + "->" + dims({m}), L, {uniform(rng, {L}), uniform(rng, {L, m}), uniform(rng, {m})},
                     [](auto& g, const std::vector<Var>& v) { return ad::dense(g, v[0], v[1], v[2]); });
  });
  ops.emplace_back("conv1d", [](Rng& rng, std::size_t L) {
    const std::size_t cin = pick(rng, 1, 4), cout = pick(rng, 1, 4);
    return make_case(dims({L, cin}) + "->" + dims({L, cout}), L,
                     {uniform(rng, {L, cin}), uniform(rng, {3, cin, cout}), uniform(rng, {cout})},
                     [](auto& g, const std::vector<Var>& v) { return ad::conv1d(g, v[0], v[1], v[2]); });
  });
  ops.emplace_back("categorical_logprob", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 6), r = pick(rng, 0, L - 1), idx = pick(rng, 0, c - 1);
    return make_case(dims({L, c}) + " row " + std::to_string(r), L, {uniform(rng, {L, c}, -2.0, 2.0)},
                     [r, idx](auto& g, const std::vector<Var>& v) { return ad::categorical_logprob(g, v[0], idx, r); });
  });
  ops.emplace_back("categorical_entropy", [](Rng& rng, std::size_t L) {
    const std::size_t c = pick(rng, 1, 6), r = pick(rng, 0, L - 1);
    return make_case(dims({L, c}) + " row " + std::to_string(r), L, {uniform(rng, {L, c}, -2.0, 2.0)},
                     [r](auto& g, const std::vector<Var>& v) { return ad::categorical_entropy(g, v[0], r); });
  });
  ops.emplace_back("attention_scores", [](Rng& rng, std::size_t L) {
    const std::size_t q = pick(rng, 1, 4), d = pick(rng, 1, 5);
    return make_case("q" + std::to_string(q) + " L" + std::to_string(L) + " d" + std::to_string(d), L,
                     {uniform(rng, {q, d}), uniform(rng, {L, d})},
                     [](auto& g, const std::vector<Var>& v) { return ad::attention_scores(g, v[0], v[1]); });
  });
  ops.emplace_back("softmax_attention", [](Rng& rng, std::size_t L) {
    const std::size_t q = pick(rng, 1, 4), d = pick(rng, 1, 5), dv = pick(rng, 1, 4);
    return make_case("q" + std::to_string(q) + " L" + std::to_string(L) + " d" + std::to_string(d) + " v" +
                         std::to_string(dv),
                     L, {uniform(rng, {q, d}), uniform(rng, {L, d}), uniform(rng, {L, dv})},
                     [](auto& g, const std::vector<Var>& v) {
                       const auto res = ad::softmax_attention(g, v[0], v[1], v[2]);
                       return ad::concat(g, {res.output, res.weights});
                     });
  });
  ops.emplace_back("lstm_final", [](Rng& rng, std::size_t L) {
    const std::size_t cin = pick(rng, 1, 4), h = pick(rng, 1, 4);
    const bool reverse = pick(rng, 0, 1) == 1;
    return make_case(dims({L, cin}) + " H" + std::to_string(h) + (reverse ? " rev" : ""), L,
                     {uniform(rng, {L, cin}), uniform(rng, {cin + h, 4 * h}, -0.7, 0.7), uniform(rng, {4 * h})},
                     [reverse](auto& g, const std::vector<Var>& v) {
                       return ad::lstm_final(g, v[0], ad::LstmWeights{v[1], v[2]}, reverse);
                     });
  });
  ops.emplace_back("bilstm", [](Rng& rng, std::size_t L) {
    const std::size_t cin = pick(rng, 1, 4), h = pick(rng, 1, 4);
    return make_case(dims({L, cin}) + " H" + std::to_string(h), L,
                     {uniform(rng, {L, cin}), uniform(rng, {cin + h, 4 * h}, -0.7, 0.7), uniform(rng, {4 * h}),
                      uniform(rng, {cin + h, 4 * h}, -0.7, 0.7), uniform(rng, {4 * h})},
                     [](auto& g, const std::vector<Var>& v) {
                       return ad::bilstm(g, v[0], ad::LstmWeights{v[1], v[2]}, ad::LstmWeights{v[3], v[4]});
                     });
  });
  return ops;
}

// ---------------------------------------------------------------------------
// Full loss

void check_loss(EncoderKind encoder, const GradCheckOptions& opt, Rng& rng, GradCheckRow& row) {
  row.op = std::string("policy_loss/") + std::string(encoder_name(encoder));
  row.covers_length_one = true;  // kernel ops cover L=1; tapes here have L >= 3
  const double h = opt.loss_step;
  for (std::size_t k = 0; k < opt.cases_per_op; ++k) {
    const TaskKind kind = kAllTasks[pick(rng, 0, std::size(kAllTasks) - 1)];
    PolicyDims d = dims_for_task(kind, encoder);
    d.conv_channels = pick(rng, 2, 5);
    d.queries = pick(rng, 1, 3);
    d.trunk = pick(rng, 4, 10);
    d.lstm_hidden = pick(rng, 2, 4);
    PolicyParams<double> p64 = init_params<double>(d, rng);

    TrainConfig cfg;
    cfg.task = kind;
    cfg.t_max_multiplier = 1.0;
    cfg.reward = pick(rng, 0, 1) ? RewardScheme::Dense : RewardScheme::Sparse;
    std::vector<EpisodeTrace> batch;
    std::size_t total_steps = 0;
    while (batch.size() < 2 || total_steps == 0) {
      if (batch.size() == 2) batch.clear();
      const TaskInstance inst = generate(kind, static_cast<int>(pick(rng, 1, 3)), rng);
      batch.push_back(run_episode(p64, inst, cfg, rng));
      total_steps = 0;
      for (const auto& t : batch) total_steps += t.steps.size();
    }
    std::vector<std::vector<double>> adv;
    for (const auto& t : batch) adv.push_back(uniform(rng, {t.steps.size()}, -1.0, 1.0).data);
    const LossWeights w{std::uniform_real_distribution<double>(0.8, 1.0)(rng), 0.5, 0.01};

    // float copy, and a double copy holding the float-rounded values
    PolicyParams<float> p32{d, {}};
    PolicyParams<double> p64r{d, {}};
    for (const auto& prm : p64.store.params()) {
      p32.store.add(prm.name, prm.value.shape).value = cast<float>(prm.value);
      auto& r = p64r.store.add(prm.name, prm.value.shape);
      for (std::size_t i = 0; i < prm.value.size(); ++i) r.value.data[i] = static_cast<float>(prm.value.data[i]);
    }
    p64.store.zero_grad();
    accumulate_loss_gradients(p64, std::span<const EpisodeTrace>(batch), w, &adv);
    accumulate_loss_gradients(p32, std::span<const EpisodeTrace>(batch), w, &adv);

    // sampled coordinates, spread over all tensors
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    const auto& plist = p64.store.params();
    for (std::size_t pi = 0; pi < plist.size(); ++pi)
      for (std::size_t j = 0; j < plist[pi].value.size(); ++j) coords.emplace_back(pi, j);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > opt.loss_coordinates) coords.resize(opt.loss_coordinates);

    for (int pass = 0; pass < 2; ++pass) {
      PolicyParams<double>& point = pass == 0 ? p64 : p64r;
      std::vector<double> a, num;
      std::vector<bool> use;
      for (auto [pi, j] : coords) {
        double n = 0;
        const bool ok = central_difference(point.store.params()[pi].value.data[j], h,
                                           [&] { return batch_loss(point, std::span<const EpisodeTrace>(batch), w, adv); }, n);
        if (!ok) ++row.skipped_coordinates;
        use.push_back(ok);
        num.push_back(n);
        a.push_back(pass == 0 ? p64.store.params()[pi].grad[j] : static_cast<double>(p32.store.params()[pi].grad[j]));
      }
      const double err = tensor_error(a, num, use);
      if (pass == 0 && err > row.max_error64) {
        row.max_error64 = err;
        row.worst_case = std::string(task_name(kind)) + " batch of 2, " + std::to_string(total_steps) + " steps";
      }
      if (pass == 1) row.max_error32 = std::max(row.max_error32, err);
    }
    ++row.cases;
  }
}

}  // namespace

std::vector<std::string> gradcheck_op_names() {
  std::vector<std::string> names;
  for (const auto& [name, maker] : op_cases()) names.push_back(name);
  names.push_back("policy_loss/attention");
  names.push_back("policy_loss/recurrent");
  return names;
}

std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckOptions& options) {
  Rng rng(options.seed);
  std::vector<GradCheckRow> rows;
  for (const auto& [name, maker] : op_cases()) {
    GradCheckRow row;
    check_op(name, maker, options, rng, row);
    rows.push_back(row);
  }
  for (EncoderKind e : {EncoderKind::Attention, EncoderKind::Recurrent}) {
    GradCheckRow row;
    check_loss(e, options, rng, row);
    rows.push_back(row);
  }
  for (auto& row : rows)
    row.ok = row.cases >= options.cases_per_op && row.covers_length_one && row.max_error64 < options.tol64 &&
             row.max_error32 < options.tol32;
  return rows;
}

}  // namespace mtm
