#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtm/modules.hpp"
#include "mtm/tasks.hpp"
#include "mtm/token.hpp"

namespace mtm {

struct HeadConfig {
  std::size_t reads = 2;
  std::size_t writes = 1;
  std::size_t total() const { return reads + writes; }
};

/// One controller decision: a module index plus read and write positions.
struct Action {
  std::size_t module = 0;
  std::vector<std::size_t> reads;
  std::vector<std::size_t> writes;

  friend bool operator==(const Action&, const Action&) = default;
};

/// The full machine state s_t plus the immutable landmark metadata.
/// `previous` is empty at t = 0.
struct MachineState {
  Tape tape;
  std::vector<std::size_t> landmarks;  // [Start-Of-Tape, task landmarks..., End-Of-Tape]
  HeadConfig heads;
  std::optional<Action> previous;
  std::size_t step = 0;

  std::size_t length() const { return tape.size(); }
  std::optional<std::size_t> prev_module() const;
};

/// Throws std::invalid_argument when the instance is malformed.
MachineState init_machine(const TaskInstance& instance, HeadConfig heads = {});

bool is_legal(const MachineState& state, const Action& action, const ModulePool& pool);

/// Applies one step of the tape update. Returns nullopt for an illegal action
/// (wrong head count, out-of-range position or module index).
std::optional<MachineState> apply_action(const MachineState& state, const Action& action, const ModulePool& pool);

/// Same update with a substitute module evaluator (fault injection in tests).
using ModuleEvaluator = Token (*)(const ModuleSpec&, Token, Token);
std::optional<MachineState> apply_action(const MachineState& state, const Action& action, const ModulePool& pool,
                                         ModuleEvaluator evaluator);

bool check_halt(const MachineState& state, const TaskInstance& instance);

/// Three lines: `task=<kind> L=<n> t=<step>`, the tape, and a marker line
/// with 'r' / 'w' under previous read / write heads ('b' when a cell is
/// both) and '^' under landmarks without a head.
std::string render_trace(const MachineState& state, TaskKind kind);

}  // namespace mtm
