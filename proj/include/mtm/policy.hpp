#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtm/autodiff.hpp"
#include "mtm/context.hpp"
#include "mtm/machine.hpp"
#include "mtm/tasks.hpp"

namespace mtm {

enum class EncoderKind { Attention, Recurrent };

std::string_view encoder_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Network sizes. Nothing here depends on the tape length.
struct PolicyDims {
  ContextLayout layout;
  std::size_t reads = 2;
  EncoderKind encoder = EncoderKind::Attention;
  std::size_t conv_channels = 64;
  std::size_t queries = 8;  // learned query set of the attention encoder
  std::size_t trunk = 128;
  std::size_t lstm_hidden = 64;

  std::size_t heads() const { return layout.heads; }
  std::size_t embedding_width() const {
    return encoder == EncoderKind::Attention ? queries * conv_channels : 2 * lstm_hidden;
  }

  friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

PolicyDims dims_for_task(TaskKind kind, EncoderKind encoder = EncoderKind::Attention, HeadConfig heads = {});

nlohmann::json dims_to_json(const PolicyDims& dims);
PolicyDims dims_from_json(const nlohmann::json& j);

template <typename T>
struct PolicyParams {
  PolicyDims dims;
  ad::ParamStore<T> store;
};

/// Fan-in scaled uniform weights, zero biases.
template <typename T>
PolicyParams<T> init_params(const PolicyDims& dims, Rng& rng);

/// Graph handles of one forward pass.
struct PolicyVars {
  ad::Var module_logits;  // {k}
  ad::Var head_logits;    // {R + W, L}
  ad::Var value;          // {1}
};

/// Forward pass recording gradients into `params`.
template <typename T>
PolicyVars forward(ad::Graph<T>& g, PolicyParams<T>& params, const FixedContext& xi, const ChannelMatrix& sigma);

/// Forward pass over a read-only snapshot.
template <typename T>
PolicyVars forward(ad::Graph<T>& g, const PolicyParams<T>& params, const FixedContext& xi, const ChannelMatrix& sigma);

/// Plain values of a forward pass.
struct PolicyOutput {
  std::vector<double> module_logits;
  std::vector<double> head_logits;  // row-major (R + W) x L
  std::size_t reads = 0;
  std::size_t heads = 0;
  std::size_t length = 0;
  double value = 0;

  std::span<const double> head_row(std::size_t h) const { return {head_logits.data() + h * length, length}; }
};

template <typename T>
PolicyOutput extract_output(const ad::Graph<T>& g, const PolicyVars& vars, std::size_t reads);

template <typename T>
PolicyOutput evaluate_policy(const PolicyParams<T>& params, const FixedContext& xi, const ChannelMatrix& sigma);

/// Samples the module and every head independently; returns the summed log-probability.
std::pair<Action, double> sample_action(const PolicyOutput& out, Rng& rng);

/// Argmax of every component.
std::pair<Action, double> greedy_action(const PolicyOutput& out);

/// Throws std::out_of_range for an action outside the output's ranges.
double action_logprob(const PolicyOutput& out, const Action& action);
double policy_entropy(const PolicyOutput& out);

/// Differentiable counterparts.
template <typename T>
ad::Var action_logprob(ad::Graph<T>& g, const PolicyVars& vars, const Action& action, std::size_t reads);
template <typename T>
ad::Var policy_entropy(ad::Graph<T>& g, const PolicyVars& vars);

/// Softmax in double precision.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace mtm
