#include "mtm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtm {

std::string_view encoder_name(EncoderKind kind) {
  return kind == EncoderKind::Attention ? "attention" : "recurrent";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "attention") return EncoderKind::Attention;
  if (name == "recurrent" || name == "rnn" || name == "bilstm") return EncoderKind::Recurrent;
  throw std::invalid_argument("unknown encoder '" + std::string(name) + "'");
}

PolicyDims dims_for_task(TaskKind kind, EncoderKind encoder, HeadConfig heads) {
  PolicyDims dims;
  dims.layout = layout_for_task(kind, heads);
  dims.reads = heads.reads;
  dims.encoder = encoder;
  return dims;
}

nlohmann::json dims_to_json(const PolicyDims& d) {
  return {{"vocab", d.layout.vocab},
          {"landmarks", d.layout.landmarks},
          {"heads", d.layout.heads},
          {"modules", d.layout.modules},
          {"reads", d.reads},
          {"encoder", encoder_name(d.encoder)},
          {"conv_channels", d.conv_channels},
          {"queries", d.queries},
          {"trunk", d.trunk},
          {"lstm_hidden", d.lstm_hidden}};
}

PolicyDims dims_from_json(const nlohmann::json& j) {
  PolicyDims d;
  d.layout.vocab = j.at("vocab").get<std::size_t>();
  d.layout.landmarks = j.at("landmarks").get<std::size_t>();
  d.layout.heads = j.at("heads").get<std::size_t>();
  d.layout.modules = j.at("modules").get<std::size_t>();
  d.reads = j.at("reads").get<std::size_t>();
  d.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  d.conv_channels = j.at("conv_channels").get<std::size_t>();
  d.queries = j.at("queries").get<std::size_t>();
  d.trunk = j.at("trunk").get<std::size_t>();
  d.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  return d;
}

namespace {

template <typename T>
void fill_uniform(ad::Parameter<T>& p, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (T& v : p.value.data) v = static_cast<T>(u(rng));
}

template <typename T>
ad::Tensor<T> sigma_tensor(const ChannelMatrix& sigma) {
  // {L, C}: one row per tape position
  ad::Tensor<T> t(ad::Shape{sigma.length, sigma.channels});
  for (std::size_t c = 0; c < sigma.channels; ++c)
    for (std::size_t l = 0; l < sigma.length; ++l) t.data[l * sigma.channels + c] = static_cast<T>(sigma.at(c, l));
  return t;
}

template <typename T>
ad::Tensor<T> xi_tensor(const FixedContext& xi) {
  ad::Tensor<T> t(ad::Shape{xi.bits.size()});
  for (std::size_t i = 0; i < xi.bits.size(); ++i) t.data[i] = static_cast<T>(xi.bits[i]);
  return t;
}

template <typename T, typename Store>
PolicyVars forward_impl(ad::Graph<T>& g, Store& store, const PolicyDims& dims, const FixedContext& xi,
                        const ChannelMatrix& sigma) {
  if (sigma.channels != dims.layout.sigma_channels())
    throw ad::ShapeError("sigma has " + std::to_string(sigma.channels) + " channels, policy expects " +
                         std::to_string(dims.layout.sigma_channels()));
  if (xi.bits.size() != dims.layout.xi_width())
    throw ad::ShapeError("xi has width " + std::to_string(xi.bits.size()) + ", policy expects " +
                         std::to_string(dims.layout.xi_width()));
  if (sigma.length == 0) throw ad::ShapeError("empty tape");

  auto P = [&](const char* name) { return g.param(store.at(name)); };

  ad::Var x = g.constant(sigma_tensor<T>(sigma));
  ad::Var h1 = ad::relu(g, ad::conv1d(g, x, P("conv1.w"), P("conv1.b")));
  ad::Var features = ad::relu(g, ad::conv1d(g, h1, P("conv2.w"), P("conv2.b")));  // {L, d}

  ad::Var embedding;
  if (dims.encoder == EncoderKind::Attention) {
    auto att = ad::softmax_attention(g, P("encoder.queries"), features, features);
    embedding = ad::reshape(g, att.output, ad::Shape{dims.embedding_width()});
  } else {
    embedding = ad::bilstm(g, features, ad::LstmWeights{P("lstm.fwd.w"), P("lstm.fwd.b")},
                           ad::LstmWeights{P("lstm.bwd.w"), P("lstm.bwd.b")});
  }

  ad::Var trunk_in = ad::concat(g, {embedding, g.constant(xi_tensor<T>(xi))});
  ad::Var t1 = ad::relu(g, ad::dense(g, trunk_in, P("trunk1.w"), P("trunk1.b")));
  ad::Var t2 = ad::relu(g, ad::dense(g, t1, P("trunk2.w"), P("trunk2.b")));

  PolicyVars out;
  out.module_logits = ad::dense(g, t2, P("module.w"), P("module.b"));
  out.value = ad::dense(g, t2, P("value.w"), P("value.b"));
  ad::Var head_queries = ad::reshape(g, ad::dense(g, t2, P("query.w"), P("query.b")),
                                     ad::Shape{dims.heads(), dims.conv_channels});
  out.head_logits = ad::attention_scores(g, head_queries, features);
  return out;
}

void check_action_ranges(const PolicyOutput& out, const Action& action) {
  if (action.module >= out.module_logits.size()) throw std::out_of_range("module index out of range");
  if (action.reads.size() + action.writes.size() != out.heads || action.reads.size() != out.reads)
    throw std::out_of_range("action head count does not match the policy");
  for (std::size_t p : action.reads)
    if (p >= out.length) throw std::out_of_range("read position out of range");
  for (std::size_t p : action.writes)
    if (p >= out.length) throw std::out_of_range("write position out of range");
}

double log_softmax_at(std::span<const double> logits, std::size_t index) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double x : logits) z += std::exp(x - mx);
  return logits[index] - mx - std::log(z);
}

double entropy_of(std::span<const double> logits) {
  double h = 0;
  for (double p : softmax(logits))
    if (p > 0) h -= p * std::log(p);
  return h;
}

std::size_t sample_index(std::span<const double> logits, Rng& rng) {
  const std::vector<double> p = softmax(logits);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  // u landed in the rounding slack above the last cumulative sum
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0) return i;
  return p.size() - 1;
}

std::size_t argmax(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace

template <typename T>
PolicyParams<T> init_params(const PolicyDims& dims, Rng& rng) {
  PolicyParams<T> params{dims, {}};
  auto& s = params.store;
  const std::size_t c = dims.layout.sigma_channels();
  const std::size_t d = dims.conv_channels;

  fill_uniform(s.add("conv1.w", {3, c, d}), 3.0 * c, rng);
  s.add("conv1.b", {d});
  fill_uniform(s.add("conv2.w", {3, d, d}), 3.0 * d, rng);
  s.add("conv2.b", {d});
  if (dims.encoder == EncoderKind::Attention) {
    fill_uniform(s.add("encoder.queries", {dims.queries, d}), static_cast<double>(d), rng);
  } else {
    const std::size_t h = dims.lstm_hidden;
    fill_uniform(s.add("lstm.fwd.w", {d + h, 4 * h}), static_cast<double>(d + h), rng);
    s.add("lstm.fwd.b", {4 * h});
    fill_uniform(s.add("lstm.bwd.w", {d + h, 4 * h}), static_cast<double>(d + h), rng);
    s.add("lstm.bwd.b", {4 * h});
  }
  const std::size_t trunk_in = dims.embedding_width() + dims.layout.xi_width();
  fill_uniform(s.add("trunk1.w", {trunk_in, dims.trunk}), static_cast<double>(trunk_in), rng);
  s.add("trunk1.b", {dims.trunk});
  fill_uniform(s.add("trunk2.w", {dims.trunk, dims.trunk}), static_cast<double>(dims.trunk), rng);
  s.add("trunk2.b", {dims.trunk});
  fill_uniform(s.add("module.w", {dims.trunk, dims.layout.modules}), static_cast<double>(dims.trunk), rng);
  s.add("module.b", {dims.layout.modules});
  fill_uniform(s.add("value.w", {dims.trunk, 1}), static_cast<double>(dims.trunk), rng);
  s.add("value.b", {1});
  fill_uniform(s.add("query.w", {dims.trunk, dims.heads() * d}), static_cast<double>(dims.trunk), rng);
  s.add("query.b", {dims.heads() * d});
  return params;
}

template <typename T>
PolicyVars forward(ad::Graph<T>& g, PolicyParams<T>& params, const FixedContext& xi, const ChannelMatrix& sigma) {
  return forward_impl(g, params.store, params.dims, xi, sigma);
}

template <typename T>
PolicyVars forward(ad::Graph<T>& g, const PolicyParams<T>& params, const FixedContext& xi,
                   const ChannelMatrix& sigma) {
  return forward_impl(g, params.store, params.dims, xi, sigma);
}

template <typename T>
PolicyOutput extract_output(const ad::Graph<T>& g, const PolicyVars& vars, std::size_t reads) {
  PolicyOutput out;
  auto ml = g.value(vars.module_logits);
  out.module_logits.assign(ml.begin(), ml.end());
  auto hl = g.value(vars.head_logits);
  out.head_logits.assign(hl.begin(), hl.end());
  out.heads = g.shape(vars.head_logits)[0];
  out.length = g.shape(vars.head_logits)[1];
  out.reads = reads;
  out.value = static_cast<double>(g.scalar(vars.value));
  return out;
}

template <typename T>
PolicyOutput evaluate_policy(const PolicyParams<T>& params, const FixedContext& xi, const ChannelMatrix& sigma) {
  ad::Graph<T> g(false);
  PolicyVars vars = forward(g, params, xi, sigma);
  return extract_output(g, vars, params.dims.reads);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= z;
  return p;
}

std::pair<Action, double> sample_action(const PolicyOutput& out, Rng& rng) {
  Action a;
  a.module = sample_index(out.module_logits, rng);
  for (std::size_t h = 0; h < out.heads; ++h) {
    const std::size_t pos = sample_index(out.head_row(h), rng);
    (h < out.reads ? a.reads : a.writes).push_back(pos);
  }
  return {a, action_logprob(out, a)};
}

std::pair<Action, double> greedy_action(const PolicyOutput& out) {
  Action a;
  a.module = argmax(out.module_logits);
  for (std::size_t h = 0; h < out.heads; ++h) (h < out.reads ? a.reads : a.writes).push_back(argmax(out.head_row(h)));
  return {a, action_logprob(out, a)};
}

double action_logprob(const PolicyOutput& out, const Action& action) {
  check_action_ranges(out, action);
  double lp = log_softmax_at(out.module_logits, action.module);
  std::size_t h = 0;
  for (std::size_t p : action.reads) lp += log_softmax_at(out.head_row(h++), p);
  for (std::size_t p : action.writes) lp += log_softmax_at(out.head_row(h++), p);
  return lp;
}

double policy_entropy(const PolicyOutput& out) {
  double h = entropy_of(out.module_logits);
  for (std::size_t i = 0; i < out.heads; ++i) h += entropy_of(out.head_row(i));
  return h;
}

template <typename T>
ad::Var action_logprob(ad::Graph<T>& g, const PolicyVars& vars, const Action& action, std::size_t reads) {
  const std::size_t heads = g.shape(vars.head_logits)[0];
  if (action.reads.size() != reads || action.reads.size() + action.writes.size() != heads)
    throw std::out_of_range("action head count does not match the policy");
  std::vector<ad::Var> parts;
  parts.push_back(ad::categorical_logprob(g, vars.module_logits, action.module));
  std::size_t h = 0;
  for (std::size_t p : action.reads) parts.push_back(ad::categorical_logprob(g, vars.head_logits, p, h++));
  for (std::size_t p : action.writes) parts.push_back(ad::categorical_logprob(g, vars.head_logits, p, h++));
  return ad::sum(g, ad::concat(g, parts));
}

template <typename T>
ad::Var policy_entropy(ad::Graph<T>& g, const PolicyVars& vars) {
  std::vector<ad::Var> parts;
  parts.push_back(ad::categorical_entropy(g, vars.module_logits));
  const std::size_t heads = g.shape(vars.head_logits)[0];
  for (std::size_t h = 0; h < heads; ++h) parts.push_back(ad::categorical_entropy(g, vars.head_logits, h));
  return ad::sum(g, ad::concat(g, parts));
}

#define MTM_INSTANTIATE_POLICY(T)                                                                                  \
  template PolicyParams<T> init_params<T>(const PolicyDims&, Rng&);                                                \
  template PolicyVars forward<T>(ad::Graph<T>&, PolicyParams<T>&, const FixedContext&, const ChannelMatrix&);      \
  template PolicyVars forward<T>(ad::Graph<T>&, const PolicyParams<T>&, const FixedContext&, const ChannelMatrix&); \
  template PolicyOutput extract_output<T>(const ad::Graph<T>&, const PolicyVars&, std::size_t);                    \
  template PolicyOutput evaluate_policy<T>(const PolicyParams<T>&, const FixedContext&, const ChannelMatrix&);      \
  template ad::Var action_logprob<T>(ad::Graph<T>&, const PolicyVars&, const Action&, std::size_t);                \
  template ad::Var policy_entropy<T>(ad::Graph<T>&, const PolicyVars&);

MTM_INSTANTIATE_POLICY(float)
MTM_INSTANTIATE_POLICY(double)

#undef MTM_INSTANTIATE_POLICY

}  // namespace mtm
