#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mtm/eval.hpp"
#include "mtm/oracle.hpp"

using namespace mtm;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<Action> oracle_actions(const TaskInstance& inst, MachineState* final_state = nullptr) {
  OraclePolicy oracle(inst.kind);
  const ModulePool pool = pool_for_task(inst.kind);
  MachineState s = init_machine(inst);
  std::vector<Action> out;
  while (!check_halt(s, inst) && out.size() < 3 * s.length()) {
    out.push_back(oracle.next_action(s));
    auto next = apply_action(s, out.back(), pool);
    EXPECT_TRUE(next.has_value());
    if (!next) break;
    s = *next;
  }
  if (final_state) *final_state = s;
  return out;
}

Token sum_without_modulo(const ModuleSpec& spec, Token x, Token y) {
  if (spec.kind == ModuleKind::Sum && x.is_digit() && y.is_digit()) {
    const int v = x.digit_value() + y.digit_value();
    return v < spec.base ? Token::digit(v) : Token::star();  // overflow leaves garbage
  }
  return eval_module(spec, x, y);
}

}  // namespace

// --- oracles ---------------------------------------------------------------

TEST(Oracle, CopyUsesOneIdentityPerDigit) {
  const auto acts = oracle_actions(make_instance(TaskKind::Copy, tape_from_string("123", 10)));
  ASSERT_EQ(acts.size(), 3u);
  for (const auto& a : acts) EXPECT_EQ(pool_for_task(TaskKind::Copy)[a.module].kind, ModuleKind::Identity);
}

TEST(Oracle, AddCarriesIntoPadColumn) {
  const TaskInstance inst = make_instance(TaskKind::MultiDigitAdd, tape_from_string("9901", 10));
  MachineState fin;
  const auto acts = oracle_actions(inst, &fin);
  ASSERT_EQ(acts.size(), 3u);
  const ModulePool pool = pool_for_task(TaskKind::MultiDigitAdd);
  EXPECT_EQ(pool[acts[0].module].kind, ModuleKind::Sum);
  EXPECT_EQ(pool[acts[1].module].kind, ModuleKind::SumInc);
  EXPECT_EQ(pool[acts[2].module].kind, ModuleKind::SumInc);
  std::string targets;
  for (std::size_t p : inst.target_positions) targets += fin.tape[p].to_char();
  EXPECT_EQ(targets, "100");
}

TEST(Oracle, FilterWithoutEvensNeedsNoSteps) {
  EXPECT_TRUE(oracle_actions(make_instance(TaskKind::FilterEven, tape_from_string("135", 16))).empty());
}

TEST(Oracle, RejectsForeignState) {
  OraclePolicy oracle(TaskKind::MultiDigitAdd);
  const MachineState s = init_machine(make_instance(TaskKind::Copy, tape_from_string("12", 10)));
  EXPECT_THROW(oracle.next_action(s), std::invalid_argument);
}

TEST(Oracle, VerifiesAllTasksUpToLengthHundred) {
  for (TaskKind k : kAllTasks) {
    const VerifyReport r = verify_environment(k, 100);
    EXPECT_TRUE(r.ok) << task_name(k) << ": " << r.failure;
    ASSERT_EQ(r.lengths.size(), 100u);
    for (const auto& l : r.lengths) {
      EXPECT_TRUE(l.ok);
      EXPECT_LE(l.steps, 3 * l.length);
      if (k == TaskKind::Copy) EXPECT_EQ(l.steps, static_cast<std::size_t>(l.n));
    }
  }
}

TEST(Oracle, InjectedFaultIsCaught) {
  const VerifyReport r = verify_environment(TaskKind::MultiDigitAdd, 30, 1, &sum_without_modulo);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_NE(r.failure_trace.find("task=add"), std::string::npos);
}

// --- eval sets -------------------------------------------------------------

TEST(EvalSet, DeterministicFilesAndLayouts) {
  const auto dir = std::filesystem::temp_directory_path() / "mtm_test_evalset";
  std::filesystem::create_directories(dir);
  save_eval_set(dir / "a.txt", build_eval_set(TaskKind::Copy, 100, 9));
  save_eval_set(dir / "b.txt", build_eval_set(TaskKind::Copy, 100, 9));
  EXPECT_EQ(slurp(dir / "a.txt"), slurp(dir / "b.txt"));
  const EvalDataset copy = load_eval_set(dir / "a.txt");
  ASSERT_EQ(copy.instances.size(), 100u);
  for (const auto& inst : copy.instances) EXPECT_EQ(inst.initial_tape.size(), 201u);

  const EvalDataset add = build_eval_set(TaskKind::MultiDigitAdd, 100, 9);
  for (const auto& inst : add.instances) EXPECT_EQ(inst.initial_tape.size(), 304u);
  save_eval_set(dir / "add.txt", add);
  const EvalDataset back = load_eval_set(dir / "add.txt");
  for (std::size_t i = 0; i < add.instances.size(); ++i) EXPECT_EQ(back.instances[i].expected, add.instances[i].expected);

  std::ofstream(dir / "bad.txt") << "# mtm-evalset v1 kind=copy length=3 seed=0 count=2\ncopy;3;123;0\n";
  EXPECT_THROW(load_eval_set(dir / "bad.txt"), std::runtime_error);
}

TEST(EvalSet, OracleStandInScoresPerfectly) {
  for (TaskKind k : kAllTasks) {
    const EvalDataset ds = build_eval_set(k, 12, 4);
    const EvalReport r = evaluate_scripted(
        ds,
        [](const TaskInstance& inst) {
          auto oracle = std::make_shared<OraclePolicy>(inst.kind);
          return ActionSource([oracle](const MachineState& s) { return oracle->next_action(s); });
        },
        8.0);
    EXPECT_EQ(r.passes, 100u) << task_name(k);
    EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
  }
}

TEST(EvalSet, RandomPolicyRarelySucceeds) {
  const EvalDataset ds = build_eval_set(TaskKind::Copy, 10, 2);
  Rng rng(1);
  const auto params = init_params<double>(dims_for_task(TaskKind::Copy), rng);
  const EvalReport r = evaluate(params, ds, EvalOptions{8.0, false, 3, {}});
  EXPECT_EQ(r.total, 100u);
  EXPECT_LT(r.success_rate, 0.05);
}

TEST(EvalSet, EvaluationIsReadOnlyAndSeeded) {
  const EvalDataset ds = build_eval_set(TaskKind::Copy, 2, 6, 20);
  Rng rng(1);
  const auto params = init_params<double>(dims_for_task(TaskKind::Copy), rng);
  const auto before = params.store.params()[0].value.data;
  const EvalReport a = evaluate(params, ds, EvalOptions{8.0, false, 3, {}});
  const EvalReport b = evaluate(params, ds, EvalOptions{8.0, false, 3, {}});
  EXPECT_EQ(a.passed, b.passed);
  EXPECT_EQ(params.store.params()[0].value.data, before);
}

// --- statistics ------------------------------------------------------------

TEST(Stats, SuccessRateArithmetic) {
  EXPECT_DOUBLE_EQ(success_rate(73, 100), 0.73);
  EXPECT_DOUBLE_EQ(success_rate(0, 100), 0.0);
  EXPECT_THROW(success_rate(101, 100), std::invalid_argument);
}

TEST(Stats, BestSoFar) {
  const std::vector<double> rates{0.2, 0.9, 0.7};
  EXPECT_EQ(track_best(rates), 0.9);
  EXPECT_FALSE(track_best(std::span<const double>{}).has_value());
  BestTracker t;
  double prev = -1;
  for (double r : {0.1, 0.5, 0.3, 0.8, 0.2}) {
    const double b = t.add(r);
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(Stats, TrialSummary) {
  const std::vector<double> ones(10, 1.0);
  const TrialSummary a = summarize_trials(ones);
  EXPECT_DOUBLE_EQ(a.mean, 1.0);
  EXPECT_DOUBLE_EQ(a.stddev, 0.0);
  EXPECT_EQ(a.perfect, 10u);

  std::vector<double> mixed(7, 1.0);
  mixed.insert(mixed.end(), 3, 0.0);
  const TrialSummary b = summarize_trials(mixed);
  EXPECT_EQ(b.perfect, 7u);
  EXPECT_DOUBLE_EQ(b.mean, 0.7);
  EXPECT_NEAR(b.stddev, std::sqrt(0.7 * 0.3 * 10 / 9), 1e-12);

  const std::vector<double> one{0.4};
  const TrialSummary c = summarize_trials(one);
  EXPECT_TRUE(c.single_trial);
  EXPECT_DOUBLE_EQ(c.stddev, 0.0);
  EXPECT_TRUE(summary_to_json(c).at("stddev").is_null());
}
