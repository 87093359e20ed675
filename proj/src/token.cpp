#include "mtm/token.hpp"

#include <stdexcept>

namespace mtm {

char Token::to_char() const {
  switch (kind()) {
    case Kind::Digit:
      return code_ < 10 ? static_cast<char>('0' + code_) : static_cast<char>('a' + code_ - 10);
    case Kind::Empty:
      return '.';
    case Kind::Sep:
      return '$';
    case Kind::Plus:
      return '+';
    case Kind::Star:
      return '*';
  }
  return '?';
}

std::optional<Token> Token::from_char(char c, int base) {
  int value = -1;
  if (c >= '0' && c <= '9') value = c - '0';
  if (c >= 'a' && c <= 'f') value = c - 'a' + 10;
  if (value >= 0) {
    if (value >= base) return std::nullopt;
    return digit(value);
  }
  switch (c) {
    case '.':
      return empty();
    case '$':
      return sep();
    case '+':
      return plus();
    case '*':
      return star();
    default:
      return std::nullopt;
  }
}

std::string tape_to_string(std::span<const Token> tape) {
  std::string out;
  out.reserve(tape.size());
  for (Token t : tape) out.push_back(t.to_char());
  return out;
}

Tape tape_from_string(std::string_view text, int base) {
  Tape tape;
  tape.reserve(text.size());
  for (char c : text) {
    auto t = Token::from_char(c, base);
    if (!t) throw std::invalid_argument("invalid tape character '" + std::string(1, c) + "'");
    tape.push_back(*t);
  }
  return tape;
}

Vocabulary::Vocabulary(int base, std::vector<Token> landmark_symbols) : base_(base), index_by_code_(32, -1) {
  if (base < 2 || base > 16) throw std::invalid_argument("base must be in [2, 16]");
  for (int d = 0; d < base; ++d) tokens_.push_back(Token::digit(d));
  tokens_.push_back(Token::empty());
  for (Token t : landmark_symbols) {
    if (t.is_digit() || t == Token::empty()) throw std::invalid_argument("landmark symbols must be non-digit tokens");
    tokens_.push_back(t);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_by_code_[tokens_[i].code()] = static_cast<int>(i);
}

std::optional<std::size_t> Vocabulary::index_of(Token t) const {
  int i = index_by_code_[t.code()];
  if (i < 0) return std::nullopt;
  return static_cast<std::size_t>(i);
}

}  // namespace mtm
