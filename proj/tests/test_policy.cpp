#include <gtest/gtest.h>

#include <cmath>

#include "mtm/context.hpp"
#include "mtm/policy.hpp"
#include "mtm/tasks.hpp"

using namespace mtm;

namespace {

struct Inputs {
  FixedContext xi;
  ChannelMatrix sigma;
};

Inputs inputs_for(TaskKind kind, int n, std::uint64_t seed) {
  Rng rng(seed);
  const TaskInstance inst = generate(kind, n, rng);
  const MachineState s = init_machine(inst);
  const ContextLayout l = layout_for_task(kind);
  return {encode_xi(s, task_vocabulary(kind), l), encode_sigma(s, task_vocabulary(kind), l)};
}

PolicyOutput uniform_output(std::size_t k, std::size_t L) {
  PolicyOutput o;
  o.module_logits.assign(k, 0.3);
  o.head_logits.assign(3 * L, -1.0);
  o.reads = 2;
  o.heads = 3;
  o.length = L;
  return o;
}

}  // namespace

TEST(Policy, InitIsSeededAndLengthFree) {
  const PolicyDims d = dims_for_task(TaskKind::Copy);
  Rng a(5), b(5);
  const auto pa = init_params<double>(d, a);
  const auto pb = init_params<double>(d, b);
  ASSERT_EQ(pa.store.params().size(), pb.store.params().size());
  for (std::size_t i = 0; i < pa.store.params().size(); ++i)
    EXPECT_EQ(pa.store.params()[i].value.data, pb.store.params()[i].value.data);

  // The same params run on L = 11 and L = 201 without any change.
  for (int n : {5, 100}) {
    const Inputs in = inputs_for(TaskKind::Copy, n, 1);
    const PolicyOutput out = evaluate_policy(pa, in.xi, in.sigma);
    EXPECT_EQ(out.length, static_cast<std::size_t>(2 * n + 1));
  }
}

TEST(Policy, EncodersDifferOnlyInEncoderBlock) {
  Rng rng(1);
  const auto att = init_params<double>(dims_for_task(TaskKind::Copy, EncoderKind::Attention), rng);
  const auto rec = init_params<double>(dims_for_task(TaskKind::Copy, EncoderKind::Recurrent), rng);
  auto names = [](const PolicyParams<double>& p) {
    std::set<std::string> s;
    for (const auto& prm : p.store.params()) s.insert(prm.name);
    return s;
  };
  const auto na = names(att), nr = names(rec);
  std::set<std::string> only_a, only_r;
  std::set_difference(na.begin(), na.end(), nr.begin(), nr.end(), std::inserter(only_a, only_a.end()));
  std::set_difference(nr.begin(), nr.end(), na.begin(), na.end(), std::inserter(only_r, only_r.end()));
  EXPECT_EQ(only_a, (std::set<std::string>{"encoder.queries"}));
  for (const auto& n : only_r) EXPECT_EQ(n.rfind("lstm.", 0), 0u) << n;
  // shared layers other than the trunk input have identical shapes
  for (const std::string n : {"conv1.w", "conv2.w", "module.w", "query.w", "value.w"})
    EXPECT_EQ(att.store.at(n).value.shape, rec.store.at(n).value.shape) << n;
}

TEST(Policy, OutputShapes) {
  Rng rng(2);
  const auto copy = init_params<double>(dims_for_task(TaskKind::Copy), rng);
  const auto add = init_params<double>(dims_for_task(TaskKind::MultiDigitAdd), rng);
  const Inputs ci = inputs_for(TaskKind::Copy, 4, 3);
  const Inputs ai = inputs_for(TaskKind::MultiDigitAdd, 4, 3);
  const PolicyOutput co = evaluate_policy(copy, ci.xi, ci.sigma);
  const PolicyOutput ao = evaluate_policy(add, ai.xi, ai.sigma);
  EXPECT_EQ(co.module_logits.size(), 5u);
  EXPECT_EQ(ao.module_logits.size(), 2u);
  EXPECT_EQ(co.heads, 3u);
  EXPECT_EQ(co.head_logits.size(), 3u * 9u);
  EXPECT_EQ(ao.head_logits.size(), 3u * 16u);
}

TEST(Policy, WrongLayoutIsRejected) {
  Rng rng(2);
  const auto copy = init_params<double>(dims_for_task(TaskKind::Copy), rng);
  const Inputs ai = inputs_for(TaskKind::MultiDigitAdd, 3, 1);
  EXPECT_THROW(evaluate_policy(copy, ai.xi, ai.sigma), ad::ShapeError);
}

TEST(Policy, HeadDistributionsNormalizeAtAnyLength) {
  Rng rng(9);
  for (EncoderKind e : {EncoderKind::Attention, EncoderKind::Recurrent}) {
    const auto p = init_params<double>(dims_for_task(TaskKind::Copy, e), rng);
    const std::size_t count = p.store.count();
    for (int n : {1, 10, 100}) {
      const Inputs in = inputs_for(TaskKind::Copy, n, 4);
      const PolicyOutput out = evaluate_policy(p, in.xi, in.sigma);
      for (std::size_t h = 0; h < out.heads; ++h) {
        const auto probs = softmax(out.head_row(h));
        double total = 0;
        for (double q : probs) total += q;
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
      EXPECT_EQ(p.store.count(), count);
    }
  }
}

TEST(Policy, UniformLogprobAndEntropy) {
  const PolicyOutput o = uniform_output(5, 7);
  const double expect = -(std::log(5.0) + 3 * std::log(7.0));
  EXPECT_NEAR(action_logprob(o, Action{2, {0, 6}, {3}}), expect, 1e-12);
  EXPECT_NEAR(policy_entropy(o), -expect, 1e-12);
  EXPECT_THROW(action_logprob(o, Action{5, {0, 0}, {0}}), std::out_of_range);
  EXPECT_THROW(action_logprob(o, Action{0, {0, 7}, {0}}), std::out_of_range);
}

TEST(Policy, SaturatedLogitsAreDeterministic) {
  PolicyOutput o = uniform_output(5, 4);
  o.module_logits[3] = 200;
  for (std::size_t h = 0; h < 3; ++h) o.head_logits[h * 4 + h] = 200;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto [a, lp] = sample_action(o, rng);
    EXPECT_EQ(a, (Action{3, {0, 1}, {2}}));
    EXPECT_NEAR(lp, 0.0, 1e-12);
  }
  EXPECT_EQ(greedy_action(o).first, (Action{3, {0, 1}, {2}}));
}

TEST(Policy, SampledLogprobIsConsistent) {
  Rng rng(4);
  const auto p = init_params<double>(dims_for_task(TaskKind::FilterEven), rng);
  const Inputs in = inputs_for(TaskKind::FilterEven, 6, 2);
  const PolicyOutput out = evaluate_policy(p, in.xi, in.sigma);
  for (int i = 0; i < 50; ++i) {
    const auto [a, lp] = sample_action(out, rng);
    EXPECT_NEAR(action_logprob(out, a), lp, 1e-12);
  }
}

TEST(Policy, SamplingFrequenciesMatchSoftmax) {
  PolicyOutput o = uniform_output(3, 4);
  o.module_logits = {0.2, 1.0, -0.7};
  o.head_logits = {0.0, 0.5, -1.0, 2.0, 1.0, 1.0, 0.0, -2.0, 0.3, 0.3, 0.3, 0.9};
  const int samples = 100'000;
  std::vector<std::vector<int>> head_counts(3, std::vector<int>(4, 0));
  std::vector<int> module_counts(3, 0);
  Rng rng(123);
  for (int i = 0; i < samples; ++i) {
    const Action a = sample_action(o, rng).first;
    ++module_counts[a.module];
    ++head_counts[0][a.reads[0]];
    ++head_counts[1][a.reads[1]];
    ++head_counts[2][a.writes[0]];
  }
  auto within = [&](const std::vector<int>& counts, std::span<const double> logits) {
    const auto probs = softmax(logits);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double sigma = std::sqrt(samples * probs[i] * (1 - probs[i]));
      EXPECT_LT(std::abs(counts[i] - samples * probs[i]), 5 * sigma) << i;
    }
  };
  within(module_counts, o.module_logits);
  for (std::size_t h = 0; h < 3; ++h) within(head_counts[h], o.head_row(h));
}

TEST(Policy, GraphAndPlainLogprobAgree) {
  Rng rng(6);
  auto p = init_params<double>(dims_for_task(TaskKind::Copy, EncoderKind::Recurrent), rng);
  const Inputs in = inputs_for(TaskKind::Copy, 3, 8);
  ad::Graph<double> g(true);
  const PolicyVars vars = forward(g, p, in.xi, in.sigma);
  const PolicyOutput out = extract_output(g, vars, 2);
  const Action a{4, {1, 2}, {6}};
  EXPECT_NEAR(g.scalar(action_logprob(g, vars, a, 2)), action_logprob(out, a), 1e-12);
  EXPECT_NEAR(g.scalar(policy_entropy(g, vars)), policy_entropy(out), 1e-12);
}

TEST(Policy, DimsRoundTripThroughJson) {
  PolicyDims d = dims_for_task(TaskKind::MultiDigitAdd, EncoderKind::Recurrent);
  d.trunk = 32;
  EXPECT_EQ(dims_from_json(dims_to_json(d)), d);
}
