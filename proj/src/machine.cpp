#include "mtm/machine.hpp"

#include <algorithm>
#include <stdexcept>

namespace mtm {

std::optional<std::size_t> MachineState::prev_module() const {
  if (!previous) return std::nullopt;
  return previous->module;
}

MachineState init_machine(const TaskInstance& instance, HeadConfig heads) {
  const std::size_t length = instance.initial_tape.size();
  if (length == 0) throw std::invalid_argument("tape length must be >= 1");
  if (heads.reads == 0 || heads.writes == 0) throw std::invalid_argument("need at least one read and one write head");
  for (std::size_t p : instance.landmarks)
    if (p >= length) throw std::invalid_argument("landmark position out of range");
  for (std::size_t p : instance.target_positions)
    if (p >= length) throw std::invalid_argument("target position out of range");
  if (instance.expected.size() != instance.target_positions.size())
    throw std::invalid_argument("expected output does not match target positions");

  MachineState state;
  state.tape = instance.initial_tape;
  state.heads = heads;
  state.landmarks.reserve(instance.landmarks.size() + 2);
  state.landmarks.push_back(0);
  state.landmarks.insert(state.landmarks.end(), instance.landmarks.begin(), instance.landmarks.end());
  state.landmarks.push_back(length - 1);
  return state;
}

bool is_legal(const MachineState& state, const Action& action, const ModulePool& pool) {
  if (action.module >= pool.size()) return false;
  if (action.reads.size() != state.heads.reads || action.writes.size() != state.heads.writes) return false;
  // Every module in the pool is 2-in / 1-out.
  if (action.reads.size() != ModuleSpec::arity_in || action.writes.size() != ModuleSpec::arity_out) return false;
  const std::size_t length = state.length();
  auto in_range = [length](std::size_t p) { return p < length; };
  return std::all_of(action.reads.begin(), action.reads.end(), in_range) &&
         std::all_of(action.writes.begin(), action.writes.end(), in_range);
}

std::optional<MachineState> apply_action(const MachineState& state, const Action& action, const ModulePool& pool) {
  return apply_action(state, action, pool, &eval_module);
}

std::optional<MachineState> apply_action(const MachineState& state, const Action& action, const ModulePool& pool,
                                         ModuleEvaluator evaluator) {
  if (!is_legal(state, action, pool)) return std::nullopt;
  MachineState next = state;
  const Token out = evaluator(pool[action.module], state.tape[action.reads[0]], state.tape[action.reads[1]]);
  // W = 1 for every module; with more write heads the last one would win.
  for (std::size_t w : action.writes) next.tape[w] = out;
  next.previous = action;
  next.step = state.step + 1;
  return next;
}

bool check_halt(const MachineState& state, const TaskInstance& instance) { return success(state.tape, instance); }

std::string render_trace(const MachineState& state, TaskKind kind) {
  const std::size_t length = state.length();
  std::string marks(length, ' ');
  for (std::size_t p : state.landmarks) marks[p] = '^';
  if (state.previous) {
    std::vector<char> read(length, 0), written(length, 0);
    for (std::size_t p : state.previous->reads) read[p] = 1;
    for (std::size_t p : state.previous->writes) written[p] = 1;
    for (std::size_t p = 0; p < length; ++p) {
      if (read[p] && written[p])
        marks[p] = 'b';
      else if (read[p])
        marks[p] = 'r';
      else if (written[p])
        marks[p] = 'w';
    }
  }
  while (!marks.empty() && marks.back() == ' ') marks.pop_back();

  std::string out = "task=" + std::string(task_name(kind)) + " L=" + std::to_string(length) +
                    " t=" + std::to_string(state.step) + "\n";
  out += tape_to_string(state.tape) + "\n";
  out += marks + "\n";
  return out;
}

}  // namespace mtm
