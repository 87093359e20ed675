#pragma once

#include <string_view>
#include <vector>

#include "mtm/tasks.hpp"
#include "mtm/token.hpp"

namespace mtm {

enum class ModuleKind { Reset, Identity, Increment, Max, Sum, SumInc };

std::string_view module_name(ModuleKind kind);

/// A fixed two-input, one-output tape function over digits of `base`.
struct ModuleSpec {
  ModuleKind kind;
  int base;

  static constexpr int arity_in = 2;
  static constexpr int arity_out = 1;

  friend bool operator==(const ModuleSpec&, const ModuleSpec&) = default;
};

/// Ordered module set; indices are the controller's module actions.
using ModulePool = std::vector<ModuleSpec>;

/// Total over all tokens. Modules that use one input ignore `y`.
Token eval_module(const ModuleSpec& spec, Token x, Token y);

ModulePool pool_for_task(TaskKind kind);

}  // namespace mtm
