#include "mtm/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace mtm {

std::string_view task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Copy:
      return "copy";
    case TaskKind::Reverse:
      return "reverse";
    case TaskKind::Increment:
      return "increment";
    case TaskKind::FilterEven:
      return "filter-even";
    case TaskKind::MultiDigitAdd:
      return "add";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::Copy;
  if (name == "reverse") return TaskKind::Reverse;
  if (name == "increment") return TaskKind::Increment;
  if (name == "filter-even" || name == "filter" || name == "filtereven") return TaskKind::FilterEven;
  if (name == "add" || name == "multi-digit-add" || name == "addition") return TaskKind::MultiDigitAdd;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

int task_base(TaskKind kind) { return kind == TaskKind::FilterEven ? 16 : 10; }

Vocabulary task_vocabulary(TaskKind kind) {
  if (kind == TaskKind::MultiDigitAdd) return Vocabulary(10, {Token::sep(), Token::plus(), Token::star()});
  return Vocabulary(task_base(kind), {Token::sep()});
}

std::size_t task_landmark_count(TaskKind kind) {
  // SOT + task landmarks + EOT
  return kind == TaskKind::MultiDigitAdd ? 5 : 4;
}

Tape expected_output(TaskKind kind, std::span<const Token> input) {
  const int base = task_base(kind);
  Tape out;
  switch (kind) {
    case TaskKind::Copy:
      out.assign(input.begin(), input.end());
      break;
    case TaskKind::Reverse:
      out.assign(input.rbegin(), input.rend());
      break;
    case TaskKind::Increment:
      for (Token t : input) out.push_back(Token::digit((t.digit_value() + 1) % base));
      break;
    case TaskKind::FilterEven:
      for (Token t : input)
        if (t.digit_value() % 2 == 0) out.push_back(t);
      out.resize(input.size(), Token::empty());
      break;
    case TaskKind::MultiDigitAdd: {
      if (input.size() % 2 != 0) throw std::invalid_argument("addition input must hold two equal-length operands");
      const std::size_t n = input.size() / 2;
      out.assign(n + 1, Token::digit(0));
      int carry = 0;
      for (std::size_t col = 0; col < n; ++col) {
        const int s = input[n - 1 - col].digit_value() + input[2 * n - 1 - col].digit_value() + carry;
        out[n - col] = Token::digit(s % base);
        carry = s / base;
      }
      out[0] = Token::digit(carry);
      break;
    }
  }
  return out;
}

TaskInstance make_instance(TaskKind kind, std::span<const Token> input) {
  const int base = task_base(kind);
  for (Token t : input)
    if (!t.is_digit() || t.digit_value() >= base) throw std::invalid_argument("input must consist of base digits");

  TaskInstance inst;
  inst.kind = kind;
  inst.input.assign(input.begin(), input.end());
  inst.expected = expected_output(kind, input);

  if (kind == TaskKind::MultiDigitAdd) {
    if (input.empty() || input.size() % 2 != 0) throw std::invalid_argument("addition needs 2n digits, n >= 1");
    const std::size_t n = input.size() / 2;
    inst.difficulty = static_cast<int>(n);
    Tape& tape = inst.initial_tape;
    tape.push_back(Token::star());
    tape.insert(tape.end(), input.begin(), input.begin() + n);
    tape.push_back(Token::plus());
    tape.insert(tape.end(), input.begin() + n, input.end());
    tape.push_back(Token::sep());
    const std::size_t first_target = tape.size();
    tape.resize(first_target + n + 1, Token::empty());
    inst.landmarks = {0, n + 1, 2 * n + 2};
    for (std::size_t p = first_target; p < tape.size(); ++p) inst.target_positions.push_back(p);
    return inst;
  }

  if (input.empty()) throw std::invalid_argument("difficulty must be >= 1");
  const std::size_t n = input.size();
  inst.difficulty = static_cast<int>(n);
  inst.initial_tape.assign(input.begin(), input.end());
  inst.initial_tape.push_back(Token::sep());
  inst.initial_tape.resize(2 * n + 1, Token::empty());
  inst.landmarks = {0, n};
  for (std::size_t p = n + 1; p < 2 * n + 1; ++p) inst.target_positions.push_back(p);
  return inst;
}

TaskInstance generate(TaskKind kind, int difficulty, Rng& rng) {
  if (difficulty < 1) throw std::invalid_argument("difficulty must be >= 1");
  std::uniform_int_distribution<int> digit(0, task_base(kind) - 1);
  const std::size_t count = static_cast<std::size_t>(difficulty) * (kind == TaskKind::MultiDigitAdd ? 2 : 1);
  Tape input(count);
  for (Token& t : input) t = Token::digit(digit(rng));
  return make_instance(kind, input);
}

TaskInstance generate_seeded(TaskKind kind, int difficulty, std::uint64_t seed) {
  Rng rng(seed);
  TaskInstance inst = generate(kind, difficulty, rng);
  inst.seed = seed;
  return inst;
}

bool success(std::span<const Token> tape, const TaskInstance& instance) {
  for (std::size_t i = 0; i < instance.target_positions.size(); ++i) {
    const std::size_t p = instance.target_positions[i];
    if (p >= tape.size() || tape[p] != instance.expected[i]) return false;
  }
  return true;
}

int curriculum_level(std::int64_t step, const CurriculumSchedule& sched) {
  if (step <= sched.ramp_start) return sched.c_min;
  if (step >= sched.ramp_end) return sched.c_max;
  // exact integer floor; both factors are positive here
  const std::int64_t raw = (sched.c_max - sched.c_min) * (step - sched.ramp_start) / (sched.ramp_end - sched.ramp_start);
  return static_cast<int>(std::clamp<std::int64_t>(sched.c_min + raw, sched.c_min, sched.c_max));
}

int sample_difficulty(int c, Rng& rng) {
  if (c < 1) throw std::invalid_argument("curriculum level must be >= 1");
  return std::uniform_int_distribution<int>(1, c)(rng);
}

std::string format_instance_line(const TaskInstance& instance) {
  return std::string(task_name(instance.kind)) + ";" + std::to_string(instance.difficulty) + ";" +
         tape_to_string(instance.input) + ";" + std::to_string(instance.seed);
}

TaskInstance parse_instance_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t semi = line.find(';', start);
    fields.push_back(line.substr(start, semi - start));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  if (fields.size() != 4) throw std::invalid_argument("eval-set line must have 4 fields: " + std::string(line));
  const TaskKind kind = parse_task_kind(fields[0]);
  int n = 0;
  std::uint64_t seed = 0;
  if (std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), n).ec != std::errc{} ||
      std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), seed).ec != std::errc{})
    throw std::invalid_argument("malformed eval-set line: " + std::string(line));
  TaskInstance inst = make_instance(kind, tape_from_string(fields[2], task_base(kind)));
  if (inst.difficulty != n) throw std::invalid_argument("difficulty does not match digits: " + std::string(line));
  inst.seed = seed;
  return inst;
}

}  // namespace mtm
