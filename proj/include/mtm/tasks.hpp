#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtm/token.hpp"

namespace mtm {

using Rng = std::mt19937_64;

enum class TaskKind { Copy, Reverse, Increment, FilterEven, MultiDigitAdd };

inline constexpr TaskKind kAllTasks[] = {TaskKind::Copy, TaskKind::Reverse, TaskKind::Increment, TaskKind::FilterEven,
                                         TaskKind::MultiDigitAdd};

std::string_view task_name(TaskKind kind);

/// Accepts the names printed by task_name() plus a few aliases ("add", "filter").
TaskKind parse_task_kind(std::string_view name);

int task_base(TaskKind kind);
Vocabulary task_vocabulary(TaskKind kind);

/// Landmark count as seen by the controller, including Start/End-Of-Tape.
std::size_t task_landmark_count(TaskKind kind);

struct TaskInstance {
  TaskKind kind;
  int difficulty = 0;
  Tape input;  // raw input digits; for addition the n digits of a followed by the n digits of b
  Tape initial_tape;
  std::vector<std::size_t> landmarks;  // task landmarks, excluding Start/End-Of-Tape
  std::vector<std::size_t> target_positions;
  Tape expected;  // aligned with target_positions
  std::uint64_t seed = 0;
};

/// Builds the instance for explicit input digits (2n digits for addition).
TaskInstance make_instance(TaskKind kind, std::span<const Token> input);

/// Draws n digits i.i.d. uniform over the task base and lays out the tape.
TaskInstance generate(TaskKind kind, int difficulty, Rng& rng);

/// Same as generate() with a fresh stream seeded by `seed`; records the seed.
TaskInstance generate_seeded(TaskKind kind, int difficulty, std::uint64_t seed);

Tape expected_output(TaskKind kind, std::span<const Token> input);

bool success(std::span<const Token> tape, const TaskInstance& instance);

struct CurriculumSchedule {
  int c_min = 2;
  int c_max = 10;
  std::int64_t ramp_start = 1'000'000;
  std::int64_t ramp_end = 18'000'000;
};

int curriculum_level(std::int64_t step, const CurriculumSchedule& sched);

/// Uniform on {1, ..., c}.
int sample_difficulty(int c, Rng& rng);

/// One eval-set line: `kind;n;input_digits;seed`. The expected output is
/// never serialized; parse_instance_line recomputes it.
std::string format_instance_line(const TaskInstance& instance);
TaskInstance parse_instance_line(std::string_view line);

}  // namespace mtm
