#include "mtm/modules.hpp"

#include "mtm/tasks.hpp"

namespace mtm {

std::string_view module_name(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Reset:
      return "Reset";
    case ModuleKind::Identity:
      return "Identity";
    case ModuleKind::Increment:
      return "Increment";
    case ModuleKind::Max:
      return "Max";
    case ModuleKind::Sum:
      return "Sum";
    case ModuleKind::SumInc:
      return "SumInc";
  }
  return "?";
}

Token eval_module(const ModuleSpec& spec, Token x, Token y) {
  const int b = spec.base;
  switch (spec.kind) {
    case ModuleKind::Reset:
      return Token::empty();
    case ModuleKind::Identity:
      return x;
    case ModuleKind::Increment:
      // Wraps modulo the base so the module can solve the Increment task.
      return x.is_digit() ? Token::digit((x.digit_value() + 1) % b) : Token::empty();
    case ModuleKind::Max:
      return x.order_rank() >= y.order_rank() ? x : y;
    case ModuleKind::Sum:
      if (!x.is_digit() || !y.is_digit()) return Token::digit(0);
      return Token::digit((x.digit_value() + y.digit_value()) % b);
    case ModuleKind::SumInc:
      if (!x.is_digit() || !y.is_digit()) return Token::digit(0);
      return Token::digit((x.digit_value() + y.digit_value() + 1) % b);
  }
  return Token::empty();
}

ModulePool pool_for_task(TaskKind kind) {
  const int b = task_base(kind);
  if (kind == TaskKind::MultiDigitAdd) return {{ModuleKind::Sum, b}, {ModuleKind::SumInc, b}};
  return {{ModuleKind::Reset, b}, {ModuleKind::Identity, b}, {ModuleKind::Increment, b}, {ModuleKind::Max, b}, {ModuleKind::Sum, b}};
}

}  // namespace mtm
