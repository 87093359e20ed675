#include "mtm/context.hpp"

#include <stdexcept>

namespace mtm {

ContextLayout layout_for_task(TaskKind kind, HeadConfig heads) {
  return {task_vocabulary(kind).size(), task_landmark_count(kind), heads.total(), pool_for_task(kind).size()};
}

namespace {

std::size_t token_index(const Vocabulary& vocab, Token t) {
  auto idx = vocab.index_of(t);
  if (!idx) throw std::invalid_argument("tape token outside the task vocabulary");
  return *idx;
}

void check_layout(const MachineState& state, const Vocabulary& vocab, const ContextLayout& layout) {
  if (layout.vocab != vocab.size()) throw std::invalid_argument("layout vocabulary size mismatch");
  if (layout.landmarks != state.landmarks.size()) throw std::invalid_argument("layout landmark count mismatch");
  if (layout.heads != state.heads.total()) throw std::invalid_argument("layout head count mismatch");
}

}  // namespace

ChannelMatrix encode_sigma(const MachineState& state, const Vocabulary& vocab, const ContextLayout& layout,
                           const AblationFlags& flags) {
  check_layout(state, vocab, layout);
  const std::size_t length = state.length();
  ChannelMatrix m{layout.sigma_channels(), length, std::vector<std::uint8_t>(layout.sigma_channels() * length, 0)};
  auto set = [&](std::size_t row, std::size_t col) { m.bits[row * length + col] = 1; };

  if (!flags.no_tape_values)
    for (std::size_t l = 0; l < length; ++l) set(token_index(vocab, state.tape[l]), l);

  for (std::size_t i = 0; i < state.landmarks.size(); ++i) set(layout.landmark_row(i), state.landmarks[i]);

  if (!flags.no_action_history && state.previous) {
    const Action& a = *state.previous;
    std::size_t h = 0;
    for (std::size_t p : a.reads) set(layout.head_row(h++), p);
    for (std::size_t p : a.writes) set(layout.head_row(h++), p);
  }
  return m;
}

FixedContext encode_xi(const MachineState& state, const Vocabulary& vocab, const ContextLayout& layout,
                       const AblationFlags& flags) {
  check_layout(state, vocab, layout);
  FixedContext xi{std::vector<std::uint8_t>(layout.xi_width(), 0)};
  if (flags.no_action_history || !state.previous) return xi;

  const Action& a = *state.previous;
  if (!flags.no_history_tape_values) {
    std::size_t h = 0;
    auto mark = [&](std::size_t p) {
      xi.bits[h * layout.vocab + token_index(vocab, state.tape[p])] = 1;
      ++h;
    };
    for (std::size_t p : a.reads) mark(p);
    for (std::size_t p : a.writes) mark(p);
  }
  if (a.module >= layout.modules) throw std::invalid_argument("previous module outside the pool");
  xi.bits[layout.heads * layout.vocab + a.module] = 1;
  return xi;
}

}  // namespace mtm
