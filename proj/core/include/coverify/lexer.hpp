#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace coverify::lex {

enum class TokenKind { Identifier, Number, String, Char, Punct };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;  // byte offset of the first character in the input
  std::size_t length;  // byte length in the input

  std::size_t end() const noexcept { return offset + length; }
  bool is(std::string_view s) const noexcept { return text == s; }
  bool is_identifier() const noexcept { return kind == TokenKind::Identifier; }
};

struct LexOptions {
  /// Drop `#...` lines (with backslash continuations) entirely.
  bool skip_preprocessor = false;
};

/// Lexer-level tokens for C, C++ and CUDA sources. Comments are dropped.
/// Never throws: unterminated literals run to end of line, unknown bytes
/// become single-character punctuation.
std::vector<Token> tokenize(std::string_view source, LexOptions options = {});

bool is_identifier_start(char c) noexcept;
bool is_identifier_char(char c) noexcept;

/// C, C++ and CUDA keywords, qualifiers and builtin type names.
bool is_keyword(std::string_view word) noexcept;

}  // namespace coverify::lex
