#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtm/machine.hpp"
#include "mtm/modules.hpp"
#include "mtm/tasks.hpp"

namespace mtm {

/// Hand-written controller for one task. Cursor positions come from the
/// previous-head metadata of the state; the addition carry (with its pad
/// column bookkeeping) and the filter write cursor are kept internally, so
/// one instance drives exactly one episode.
class OraclePolicy {
 public:
  explicit OraclePolicy(TaskKind kind);

  /// Throws std::invalid_argument when the state does not have this task's layout.
  Action next_action(const MachineState& state);

  TaskKind kind() const { return kind_; }

 private:
  std::size_t module_index(ModuleKind m) const;
  std::size_t difficulty_of(const MachineState& state) const;

  TaskKind kind_;
  ModulePool pool_;
  std::size_t filter_written_ = 0;
  std::size_t add_column_ = 0;
  int add_carry_ = 0;
  bool pad_zero_written_ = false;
};

struct LengthResult {
  int n = 0;
  std::size_t length = 0;
  std::size_t steps = 0;
  bool ok = false;
};

struct VerifyReport {
  TaskKind kind;
  std::vector<LengthResult> lengths;
  std::size_t max_steps = 0;
  bool ok = true;
  std::string failure;        // diagnostic for the first failing length
  std::string failure_trace;  // rendered states of the failing episode
};

/// Drives one oracle episode per n in [1, max_len]; an episode passes when the
/// halting check fires within 3 L steps. Stops at the first failure.
VerifyReport verify_environment(TaskKind kind, int max_len, std::uint64_t seed = 1,
                                ModuleEvaluator evaluator = &eval_module);

}  // namespace mtm
