#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

/// A single tape symbol. Digits carry their value (0..15); the remaining
/// codes are the empty cell and the three landmark symbols.
class Token {
 public:
  enum class Kind : std::uint8_t { Digit, Empty, Sep, Plus, Star };

  constexpr Token() = default;

  static constexpr Token digit(int value) { return Token(static_cast<std::uint8_t>(value)); }
  static constexpr Token empty() { return Token(kEmptyCode); }
  static constexpr Token sep() { return Token(kEmptyCode + 1); }
  static constexpr Token plus() { return Token(kEmptyCode + 2); }
  static constexpr Token star() { return Token(kEmptyCode + 3); }

  constexpr bool is_digit() const { return code_ < kEmptyCode; }
  constexpr int digit_value() const { return code_; }
  constexpr Kind kind() const {
    if (code_ < kEmptyCode) return Kind::Digit;
    return static_cast<Kind>(code_ - kEmptyCode + 1);
  }

  /// Total order used by Max: Empty < '$' < '+' < '*' < digits.
  constexpr int order_rank() const { return is_digit() ? 4 + code_ : code_ - kEmptyCode; }

  char to_char() const;

  /// Parses one character. Digits must be below `base`.
  static std::optional<Token> from_char(char c, int base);

  constexpr std::uint8_t code() const { return code_; }
  friend constexpr bool operator==(Token, Token) = default;

 private:
  static constexpr std::uint8_t kEmptyCode = 16;
  constexpr explicit Token(std::uint8_t code) : code_(code) {}
  std::uint8_t code_ = kEmptyCode;
};

using Tape = std::vector<Token>;

std::string tape_to_string(std::span<const Token> tape);

/// Throws std::invalid_argument on characters outside the base.
Tape tape_from_string(std::string_view text, int base);

/// Ordered token set of a task; the order defines one-hot channel indices.
class Vocabulary {
 public:
  Vocabulary(int base, std::vector<Token> landmark_symbols);

  int base() const { return base_; }
  std::size_t size() const { return tokens_.size(); }
  std::span<const Token> tokens() const { return tokens_; }

  /// Index of `t` in the vocabulary, or nullopt when `t` is not part of it.
  std::optional<std::size_t> index_of(Token t) const;
  bool contains(Token t) const { return index_of(t).has_value(); }

 private:
  int base_;
  std::vector<Token> tokens_;
  std::vector<int> index_by_code_;
};

}  // namespace mtm
