#include <gtest/gtest.h>

#include <cmath>

#include "mtm/context.hpp"
#include "mtm/machine.hpp"
#include "mtm/modules.hpp"
#include "mtm/tasks.hpp"
#include "mtm/token.hpp"

using namespace mtm;

namespace {

Tape T(std::string_view s, int base = 10) { return tape_from_string(s, base); }

TaskInstance copy_of(std::string_view digits) {
  const Tape in = T(digits);
  return make_instance(TaskKind::Copy, in);
}

MachineState state_with_tape(std::string_view tape, TaskKind kind = TaskKind::Copy) {
  // A Copy-shaped instance with the right length, then the tape overwritten.
  const std::size_t n = (tape.size() - 1) / 2;
  TaskInstance inst = make_instance(kind, Tape(n, Token::digit(1)));
  MachineState s = init_machine(inst);
  s.tape = T(tape);
  return s;
}

std::size_t module_index(const ModulePool& pool, ModuleKind k) {
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].kind == k) return i;
  throw std::logic_error("module not in pool");
}

}  // namespace

// --- tokens ----------------------------------------------------------------

TEST(Token, RoundTripsThroughText) {
  EXPECT_EQ(tape_to_string(T("123$...")), "123$...");
  EXPECT_EQ(tape_to_string(T("*3a+f0$..", 16)), "*3a+f0$..");
  EXPECT_THROW(T("12a"), std::invalid_argument);
  EXPECT_THROW(T("1?"), std::invalid_argument);
}

TEST(Token, OrderPutsEmptyFirstAndDigitsLast) {
  EXPECT_LT(Token::empty().order_rank(), Token::sep().order_rank());
  EXPECT_LT(Token::sep().order_rank(), Token::plus().order_rank());
  EXPECT_LT(Token::plus().order_rank(), Token::star().order_rank());
  EXPECT_LT(Token::star().order_rank(), Token::digit(0).order_rank());
  EXPECT_LT(Token::digit(3).order_rank(), Token::digit(7).order_rank());
}

TEST(Token, VocabularySizes) {
  EXPECT_EQ(task_vocabulary(TaskKind::Copy).size(), 12u);
  EXPECT_EQ(task_vocabulary(TaskKind::MultiDigitAdd).size(), 14u);
  EXPECT_EQ(task_vocabulary(TaskKind::FilterEven).size(), 18u);
  EXPECT_FALSE(task_vocabulary(TaskKind::Copy).contains(Token::plus()));
}

// --- modules ---------------------------------------------------------------

TEST(Modules, AppendixExamples) {
  const ModuleSpec sum{ModuleKind::Sum, 10}, suminc{ModuleKind::SumInc, 10}, id{ModuleKind::Identity, 10},
      inc{ModuleKind::Increment, 10}, mx{ModuleKind::Max, 10};
  EXPECT_EQ(eval_module(sum, Token::empty(), Token::digit(5)), Token::digit(0));
  EXPECT_EQ(eval_module(id, Token::digit(7), Token::sep()), Token::digit(7));
  EXPECT_EQ(eval_module(suminc, Token::digit(9), Token::digit(9)), Token::digit(9));
  EXPECT_EQ(eval_module(inc, Token::digit(9), Token::empty()), Token::digit(0));
  EXPECT_EQ(eval_module(mx, Token::digit(3), Token::digit(7)), Token::digit(7));
}

TEST(Modules, PoolsAreStable) {
  const ModulePool copy = pool_for_task(TaskKind::Copy);
  ASSERT_EQ(copy.size(), 5u);
  EXPECT_EQ(copy[0].kind, ModuleKind::Reset);
  EXPECT_EQ(copy[4].kind, ModuleKind::Sum);
  const ModulePool add = pool_for_task(TaskKind::MultiDigitAdd);
  ASSERT_EQ(add.size(), 2u);
  EXPECT_EQ(add[0].kind, ModuleKind::Sum);
  EXPECT_EQ(add[1].kind, ModuleKind::SumInc);
  EXPECT_EQ(pool_for_task(TaskKind::Copy), pool_for_task(TaskKind::Copy));
  EXPECT_EQ(pool_for_task(TaskKind::FilterEven)[0].base, 16);
}

// --- tasks -----------------------------------------------------------------

TEST(Tasks, CopyLayout) {
  const TaskInstance c = copy_of("123");
  EXPECT_EQ(tape_to_string(c.initial_tape), "123$...");
  EXPECT_EQ(c.target_positions, (std::vector<std::size_t>{4, 5, 6}));
  EXPECT_EQ(tape_to_string(c.expected), "123");
}

TEST(Tasks, AddLayoutAndExpected) {
  const TaskInstance a = make_instance(TaskKind::MultiDigitAdd, T("12345678"));
  EXPECT_EQ(tape_to_string(a.initial_tape), "*1234+5678$.....");
  EXPECT_EQ(tape_to_string(a.expected), "06912");
  EXPECT_EQ(a.difficulty, 4);
  EXPECT_EQ(tape_to_string(make_instance(TaskKind::MultiDigitAdd, T("9901")).expected), "100");
}

TEST(Tasks, OtherExpectedOutputs) {
  EXPECT_EQ(tape_to_string(expected_output(TaskKind::FilterEven, T("3a2f4", 16))), "a24..");
  EXPECT_EQ(tape_to_string(expected_output(TaskKind::Increment, T("19"))), "20");
  EXPECT_EQ(tape_to_string(expected_output(TaskKind::Reverse, T("123"))), "321");
}

TEST(Tasks, LayoutLengths) {
  Rng rng(3);
  EXPECT_EQ(generate(TaskKind::Copy, 100, rng).initial_tape.size(), 201u);
  EXPECT_EQ(generate(TaskKind::MultiDigitAdd, 100, rng).initial_tape.size(), 304u);
  EXPECT_EQ(generate(TaskKind::FilterEven, 7, rng).initial_tape.size(), 15u);
}

TEST(Tasks, SuccessScoresTargetsOnly) {
  const TaskInstance c = copy_of("12");
  EXPECT_TRUE(success(T("12$12"), c));
  EXPECT_FALSE(success(T("12$1."), c));
  EXPECT_FALSE(success(T("12$13"), c));
  EXPECT_TRUE(success(T("..$12"), c));  // clobbered input is not scored
}

TEST(Tasks, FilterWithoutEvensIsSolvedAtStart) {
  const TaskInstance f = make_instance(TaskKind::FilterEven, T("135", 16));
  EXPECT_TRUE(success(f.initial_tape, f));
}

TEST(Tasks, CurriculumSchedule) {
  const CurriculumSchedule s;
  EXPECT_EQ(curriculum_level(0, s), 2);
  EXPECT_EQ(curriculum_level(1'000'000, s), 2);
  EXPECT_EQ(curriculum_level(9'500'000, s), 6);
  EXPECT_EQ(curriculum_level(18'000'000, s), 10);
  EXPECT_EQ(curriculum_level(40'000'000, s), 10);
  int prev = 0;
  for (std::int64_t step = 0; step <= 20'000'000; step += 250'000) {
    const int c = curriculum_level(step, s);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(Tasks, DifficultySampling) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_difficulty(1, rng), 1);
  const int samples = 100'000;
  std::vector<int> counts(11, 0);
  for (int i = 0; i < samples; ++i) {
    const int n = sample_difficulty(10, rng);
    ASSERT_GE(n, 1);
    ASSERT_LE(n, 10);
    ++counts[n];
  }
  const double sigma = std::sqrt(samples * 0.1 * 0.9);
  for (int n = 1; n <= 10; ++n) EXPECT_LT(std::abs(counts[n] - samples * 0.1), 5 * sigma) << n;
}

TEST(Tasks, SeededGenerationIsDeterministic) {
  const TaskInstance a = generate_seeded(TaskKind::Reverse, 9, 77);
  const TaskInstance b = generate_seeded(TaskKind::Reverse, 9, 77);
  EXPECT_EQ(a.initial_tape, b.initial_tape);
  EXPECT_EQ(a.seed, 77u);
}

TEST(Tasks, InstanceLineRoundTrip) {
  const TaskInstance a = generate_seeded(TaskKind::MultiDigitAdd, 6, 5);
  const TaskInstance b = parse_instance_line(format_instance_line(a));
  EXPECT_EQ(a.initial_tape, b.initial_tape);
  EXPECT_EQ(a.expected, b.expected);
  EXPECT_EQ(b.seed, 5u);
  EXPECT_THROW(parse_instance_line("copy;3;12;0"), std::invalid_argument);
  EXPECT_THROW(parse_instance_line("copy;3;123"), std::invalid_argument);
}

// --- machine ---------------------------------------------------------------

TEST(Machine, InitialState) {
  const MachineState s = init_machine(copy_of("123"));
  EXPECT_EQ(s.length(), 7u);
  EXPECT_EQ(s.landmarks, (std::vector<std::size_t>{0, 0, 3, 6}));
  EXPECT_EQ(s.step, 0u);
  EXPECT_FALSE(s.previous.has_value());
  EXPECT_FALSE(s.prev_module().has_value());
}

TEST(Machine, RejectsTargetsOutsideTape) {
  TaskInstance bad = copy_of("12");
  bad.target_positions.back() = 99;
  EXPECT_THROW(init_machine(bad), std::invalid_argument);
}

TEST(Machine, ModuleSemanticsOnTape) {
  const ModulePool pool = pool_for_task(TaskKind::Copy);
  MachineState s = init_machine(copy_of("1"));
  s.tape = T("12$.");  // 4 cells is enough for the examples
  s.landmarks = {0, 0, 2, 3};
  auto after = [&](ModuleKind k, std::vector<std::size_t> reads, std::size_t w) {
    auto next = apply_action(s, Action{module_index(pool, k), std::move(reads), {w}}, pool);
    EXPECT_TRUE(next.has_value());
    return tape_to_string(next->tape);
  };
  EXPECT_EQ(after(ModuleKind::Identity, {0, 0}, 3), "12$1");
  EXPECT_EQ(after(ModuleKind::Reset, {0, 1}, 0), ".2$.");
  s.tape = T("77$.");
  EXPECT_EQ(after(ModuleKind::Sum, {0, 1}, 3), "77$4");
}

TEST(Machine, IllegalActionsAreRejected) {
  const ModulePool pool = pool_for_task(TaskKind::Copy);
  const MachineState s = init_machine(copy_of("12"));
  EXPECT_FALSE(apply_action(s, Action{9, {0, 0}, {3}}, pool));
  EXPECT_FALSE(apply_action(s, Action{1, {0}, {3}}, pool));
  EXPECT_FALSE(apply_action(s, Action{1, {0, 5}, {3}}, pool));
  EXPECT_FALSE(apply_action(s, Action{1, {0, 0}, {}}, pool));
  EXPECT_TRUE(apply_action(s, Action{1, {0, 0}, {3}}, pool));
}

TEST(Machine, StepRecordsPreviousAction) {
  const ModulePool pool = pool_for_task(TaskKind::Copy);
  const MachineState s = init_machine(copy_of("12"));
  const Action a{1, {0, 1}, {3}};
  const MachineState n = *apply_action(s, a, pool);
  EXPECT_EQ(n.step, 1u);
  ASSERT_TRUE(n.previous);
  EXPECT_EQ(*n.previous, a);
  EXPECT_EQ(n.prev_module(), 1u);
  EXPECT_EQ(s.step, 0u);  // input state untouched
}

TEST(Machine, HaltCheck) {
  const TaskInstance inst = copy_of("12");
  MachineState s = init_machine(inst);
  EXPECT_FALSE(check_halt(s, inst));
  s.tape = T("12$12");
  EXPECT_TRUE(check_halt(s, inst));
}

TEST(Machine, RenderTrace) {
  MachineState s = state_with_tape("123$1..");
  EXPECT_EQ(render_trace(s, TaskKind::Copy), "task=copy L=7 t=0\n123$1..\n^  ^  ^\n");
  s.previous = Action{1, {1, 1}, {5}};
  s.step = 1;
  EXPECT_EQ(render_trace(s, TaskKind::Copy), "task=copy L=7 t=1\n123$1..\n^r ^ w^\n");
  MachineState later = s;
  later.step = 2;
  const std::string a = render_trace(s, TaskKind::Copy), b = render_trace(later, TaskKind::Copy);
  EXPECT_NE(a, b);
  EXPECT_EQ(a.substr(a.find('\n')), b.substr(b.find('\n')));
}

// --- context ---------------------------------------------------------------

TEST(Context, ShapeLawForEveryTask) {
  for (TaskKind k : kAllTasks) {
    const ContextLayout l = layout_for_task(k);
    const std::size_t v = task_vocabulary(k).size(), lam = task_landmark_count(k);
    const std::size_t modules = pool_for_task(k).size();
    EXPECT_EQ(l.sigma_channels(), v + lam + 3);
    EXPECT_EQ(l.xi_width(), 3 * v + modules);
    Rng rng(1);
    const TaskInstance inst = generate(k, 4, rng);
    const MachineState s = init_machine(inst);
    const ChannelMatrix sigma = encode_sigma(s, task_vocabulary(k), l);
    EXPECT_EQ(sigma.channels, l.sigma_channels());
    EXPECT_EQ(sigma.length, s.length());
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t p = 0; p < s.length(); ++p) EXPECT_EQ(sigma.at(l.head_row(h), p), 0);
    const FixedContext xi = encode_xi(s, task_vocabulary(k), l);
    EXPECT_EQ(xi.bits.size(), l.xi_width());
    for (auto b : xi.bits) EXPECT_EQ(b, 0);
  }
  EXPECT_EQ(layout_for_task(TaskKind::Copy).sigma_channels(), 19u);
}

TEST(Context, SigmaBlocks) {
  const Vocabulary vocab = task_vocabulary(TaskKind::Copy);
  const ContextLayout l = layout_for_task(TaskKind::Copy);
  MachineState s = init_machine(copy_of("1"));
  s.tape = T("12$.");
  s.landmarks = {0, 0, 2, 3};
  s.previous = Action{1, {0, 0}, {3}};
  const ChannelMatrix sigma = encode_sigma(s, vocab, l);
  EXPECT_EQ(sigma.at(*vocab.index_of(Token::digit(1)), 0), 1);
  EXPECT_EQ(sigma.at(*vocab.index_of(Token::digit(2)), 1), 1);
  EXPECT_EQ(sigma.at(*vocab.index_of(Token::sep()), 2), 1);
  EXPECT_EQ(sigma.at(*vocab.index_of(Token::empty()), 3), 1);
  EXPECT_EQ(sigma.at(l.landmark_row(2), 2), 1);
  EXPECT_EQ(sigma.at(l.landmark_row(3), 3), 1);
  EXPECT_EQ(sigma.at(l.head_row(0), 0), 1);
  EXPECT_EQ(sigma.at(l.head_row(1), 0), 1);
  EXPECT_EQ(sigma.at(l.head_row(2), 3), 1);
  EXPECT_EQ(sigma.at(l.head_row(2), 0), 0);
}

TEST(Context, XiAfterIdentity) {
  const ModulePool pool = pool_for_task(TaskKind::Copy);
  const Vocabulary vocab = task_vocabulary(TaskKind::Copy);
  const ContextLayout l = layout_for_task(TaskKind::Copy);
  MachineState s = init_machine(copy_of("1"));
  s.tape = T("12$.");
  s.landmarks = {0, 0, 2, 3};
  const MachineState n = *apply_action(s, Action{1, {0, 0}, {3}}, pool);
  const FixedContext xi = encode_xi(n, vocab, l);
  const std::size_t one = *vocab.index_of(Token::digit(1));
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t v = 0; v < vocab.size(); ++v) EXPECT_EQ(xi.bits[h * vocab.size() + v], v == one ? 1 : 0);
  for (std::size_t m = 0; m < pool.size(); ++m) EXPECT_EQ(xi.bits[3 * vocab.size() + m], m == 1 ? 1 : 0);

  AblationFlags hist;
  hist.no_history_tape_values = true;
  const FixedContext xi2 = encode_xi(n, vocab, l, hist);
  for (std::size_t i = 0; i < 3 * vocab.size(); ++i) EXPECT_EQ(xi2.bits[i], 0);
  EXPECT_EQ(xi2.bits[3 * vocab.size() + 1], 1);
}

TEST(Context, AblationsZeroExactlyTheirBlocks) {
  const ModulePool pool = pool_for_task(TaskKind::Copy);
  const Vocabulary vocab = task_vocabulary(TaskKind::Copy);
  const ContextLayout l = layout_for_task(TaskKind::Copy);
  const MachineState s = *apply_action(init_machine(copy_of("123")), Action{1, {0, 1}, {4}}, pool);
  const ChannelMatrix full = encode_sigma(s, vocab, l);
  const FixedContext xi_full = encode_xi(s, vocab, l);

  AblationFlags tape;
  tape.no_tape_values = true;
  const ChannelMatrix no_tape = encode_sigma(s, vocab, l, tape);
  AblationFlags hist;
  hist.no_action_history = true;
  const ChannelMatrix no_hist = encode_sigma(s, vocab, l, hist);
  const FixedContext xi_no_hist = encode_xi(s, vocab, l, hist);

  for (std::size_t c = 0; c < l.sigma_channels(); ++c)
    for (std::size_t p = 0; p < s.length(); ++p) {
      const bool token_row = c < l.vocab, head_row = c >= l.vocab + l.landmarks;
      EXPECT_EQ(no_tape.at(c, p), token_row ? 0 : full.at(c, p));
      EXPECT_EQ(no_hist.at(c, p), head_row ? 0 : full.at(c, p));
    }
  for (auto b : xi_no_hist.bits) EXPECT_EQ(b, 0);
  EXPECT_EQ(encode_xi(s, vocab, l, tape).bits, xi_full.bits);
}
