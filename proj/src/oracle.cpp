#include "mtm/oracle.hpp"

#include <algorithm>

namespace mtm {

OraclePolicy::OraclePolicy(TaskKind kind) : kind_(kind), pool_(pool_for_task(kind)) {}

std::size_t OraclePolicy::module_index(ModuleKind m) const {
  for (std::size_t i = 0; i < pool_.size(); ++i)
    if (pool_[i].kind == m) return i;
  throw std::logic_error("module missing from the task pool");
}

std::size_t OraclePolicy::difficulty_of(const MachineState& state) const {
  const std::size_t len = state.length();
  const auto& lm = state.landmarks;
  if (kind_ == TaskKind::MultiDigitAdd) {
    if (lm.size() != 5 || len < 7 || (len - 4) % 3 != 0) throw std::invalid_argument("state is not an addition tape");
    const std::size_t n = (len - 4) / 3;
    if (lm[1] != 0 || lm[2] != n + 1 || lm[3] != 2 * n + 2) throw std::invalid_argument("unexpected addition landmarks");
    return n;
  }
  if (lm.size() != 4 || len < 3 || len % 2 == 0) throw std::invalid_argument("state is not a copy-family tape");
  const std::size_t n = (len - 1) / 2;
  if (lm[1] != 0 || lm[2] != n) throw std::invalid_argument("unexpected copy-family landmarks");
  return n;
}

Action OraclePolicy::next_action(const MachineState& state) {
  const std::size_t n = difficulty_of(state);
  const std::size_t len = state.length();
  const auto& prev = state.previous;

  switch (kind_) {
    case TaskKind::Copy:
    case TaskKind::Reverse:
    case TaskKind::Increment: {
      const std::size_t i = prev ? prev->writes.at(0) - (n + 1) + 1 : 0;
      if (i >= n) throw std::invalid_argument("copy-family cursor ran past the input");
      const std::size_t src = kind_ == TaskKind::Reverse ? n - 1 - i : i;
      const ModuleKind m = kind_ == TaskKind::Increment ? ModuleKind::Increment : ModuleKind::Identity;
      return Action{module_index(m), {src, src}, {n + 1 + i}};
    }
    case TaskKind::FilterEven: {
      // reads[1] always holds the input cursor
      const std::size_t i = prev ? prev->reads.at(1) + 1 : 0;
      if (i >= n) throw std::invalid_argument("filter cursor ran past the input");
      const std::size_t dst = n + 1 + std::min(filter_written_, n - 1);
      const Token t = state.tape[i];
      if (t.is_digit() && t.digit_value() % 2 == 0) {
        ++filter_written_;
        return Action{module_index(ModuleKind::Identity), {i, i}, {dst}};
      }
      // Odd digit: rewrite the next free target with its own value.
      return Action{module_index(ModuleKind::Identity), {dst, i}, {dst}};
    }
    case TaskKind::MultiDigitAdd: {
      const std::size_t base = static_cast<std::size_t>(task_base(kind_));
      const std::size_t sum = module_index(ModuleKind::Sum);
      const std::size_t sum_inc = module_index(ModuleKind::SumInc);
      if (add_column_ < n) {
        const std::size_t j = add_column_++;
        const std::size_t pa = n - j, pb = 2 * n + 1 - j;
        const int s = state.tape[pa].digit_value() + state.tape[pb].digit_value() + add_carry_;
        const std::size_t m = add_carry_ ? sum_inc : sum;
        add_carry_ = s >= static_cast<int>(base) ? 1 : 0;
        return Action{m, {pa, pb}, {len - 1 - j}};
      }
      const std::size_t pad = len - 1 - n;
      if (add_column_ > n) throw std::invalid_argument("addition oracle already finished");
      if (!add_carry_) {
        ++add_column_;
        return Action{sum, {0, 0}, {pad}};  // non-digit inputs make Sum emit '0'
      }
      // Carry into the pad column needs SumInc over two digits summing to 0 mod B.
      for (std::size_t p = 0; p < len; ++p) {
        if (!state.tape[p].is_digit()) continue;
        for (std::size_t q = p; q < len; ++q) {
          if (!state.tape[q].is_digit()) continue;
          if ((state.tape[p].digit_value() + state.tape[q].digit_value()) % base == 0) {
            ++add_column_;
            return Action{sum_inc, {p, q}, {pad}};
          }
        }
      }
      if (!pad_zero_written_) {
        pad_zero_written_ = true;
        return Action{sum, {0, 0}, {pad}};
      }
      ++add_column_;
      return Action{sum_inc, {pad, pad}, {pad}};
    }
  }
  throw std::logic_error("unreachable");
}

VerifyReport verify_environment(TaskKind kind, int max_len, std::uint64_t seed, ModuleEvaluator evaluator) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  VerifyReport report{kind, {}, 0, true, {}, {}};
  const ModulePool pool = pool_for_task(kind);
  Rng rng(seed);
  for (int n = 1; n <= max_len; ++n) {
    const TaskInstance inst = generate(kind, n, rng);
    MachineState state = init_machine(inst);
    OraclePolicy oracle(kind);
    const std::size_t cap = 3 * state.length();
    std::string trace = render_trace(state, kind);
    LengthResult res{n, state.length(), 0, false};
    std::string failure;
    try {
      while (!check_halt(state, inst)) {
        if (state.step >= cap) {
          failure = "no halt within 3L = " + std::to_string(cap) + " steps";
          break;
        }
        auto next = apply_action(state, oracle.next_action(state), pool, evaluator);
        if (!next) {
          failure = "oracle emitted an illegal action";
          break;
        }
        state = std::move(*next);
        trace += render_trace(state, kind);
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }
    res.steps = state.step;
    res.ok = failure.empty();
    report.lengths.push_back(res);
    report.max_steps = std::max(report.max_steps, res.steps);
    if (!res.ok) {
      report.ok = false;
      report.failure = std::string(task_name(kind)) + " n=" + std::to_string(n) + ": " + failure;
      report.failure_trace = trace;
      break;
    }
  }
  return report;
}

}  // namespace mtm
