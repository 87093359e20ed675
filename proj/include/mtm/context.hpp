#pragma once

#include <cstdint>
#include <vector>

#include "mtm/machine.hpp"
#include "mtm/tasks.hpp"
#include "mtm/token.hpp"

namespace mtm {

/// Context switches. Ablated blocks are zero-filled, never dropped, so the
/// network shape is the same under every flag combination.
struct AblationFlags {
  bool no_tape_values = false;
  bool no_action_history = false;
  bool no_history_tape_values = false;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// Block sizes of the controller input for one task configuration.
///
/// sigma rows: [token presence x |V|][landmarks x Lambda][previous heads x (R+W)]
/// xi:         [one-hot value under each previous head x (R+W)|V|][previous module x k]
struct ContextLayout {
  std::size_t vocab = 0;
  std::size_t landmarks = 0;
  std::size_t heads = 0;  // R + W
  std::size_t modules = 0;

  std::size_t sigma_channels() const { return vocab + landmarks + heads; }
  std::size_t xi_width() const { return heads * vocab + modules; }
  std::size_t landmark_row(std::size_t i) const { return vocab + i; }
  std::size_t head_row(std::size_t i) const { return vocab + landmarks + i; }

  friend bool operator==(const ContextLayout&, const ContextLayout&) = default;
};

ContextLayout layout_for_task(TaskKind kind, HeadConfig heads = {});

/// sigma_t: channels x L binary matrix, row-major.
struct ChannelMatrix {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(std::size_t c, std::size_t l) const { return bits[c * length + l]; }
};

/// xi_t: fixed-width binary vector.
struct FixedContext {
  std::vector<std::uint8_t> bits;
};

ChannelMatrix encode_sigma(const MachineState& state, const Vocabulary& vocab, const ContextLayout& layout,
                           const AblationFlags& flags = {});

FixedContext encode_xi(const MachineState& state, const Vocabulary& vocab, const ContextLayout& layout,
                       const AblationFlags& flags = {});

}  // namespace mtm
