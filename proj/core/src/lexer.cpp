#include "coverify/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace coverify::lex {

namespace {

constexpr std::array<std::string_view, 5> kThreeCharPuncts = {
    "<<<", ">>>", "<<=", ">>=", "..."};

constexpr std::array<std::string_view, 22> kTwoCharPuncts = {
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
    "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##", ".*"};

constexpr std::array<std::string_view, 96> kKeywords = {
    "auto",       "break",        "case",         "char",
    "const",      "continue",     "default",      "do",
    "double",     "else",         "enum",         "extern",
    "float",      "for",          "goto",         "if",
    "inline",     "int",          "long",         "register",
    "restrict",   "return",       "short",        "signed",
    "sizeof",     "static",       "struct",       "switch",
    "typedef",    "union",        "unsigned",     "void",
    "volatile",   "while",        "bool",         "true",
    "false",      "nullptr",      "class",        "namespace",
    "template",   "typename",     "using",        "new",
    "delete",     "public",       "private",      "protected",
    "virtual",    "operator",     "this",         "constexpr",
    "static_cast", "reinterpret_cast", "const_cast", "dynamic_cast",
    "decltype",   "noexcept",     "throw",        "try",
    "catch",      "friend",       "mutable",      "explicit",
    "size_t",     "int8_t",       "int16_t",      "int32_t",
    "int64_t",    "uint8_t",      "uint16_t",     "uint32_t",
    "uint64_t",   "__global__",   "__device__",   "__host__",
    "__shared__", "__constant__", "__restrict__", "__restrict",
    "__forceinline__", "__syncthreads", "threadIdx", "blockIdx",
    "blockDim",   "gridDim",      "dim3",         "warpSize",
    "NULL",       "wchar_t",      "char16_t",     "char32_t",
    "alignas",    "alignof",      "static_assert", "_Bool",
};

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view p) {
  return s.size() - pos >= p.size() && s.compare(pos, p.size(), p) == 0;
}

std::size_t skip_literal(std::string_view s, std::size_t pos, char quote) {
  std::size_t i = pos + 1;
  while (i < s.size()) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      i += 2;
      continue;
    }
    if (c == quote) return i + 1;
    if (c == '\n') return i;  // unterminated
    ++i;
  }
  return i;
}

std::size_t skip_number(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  bool hex = starts_with_at(s, i, "0x") || starts_with_at(s, i, "0X");
  if (hex) i += 2;
  while (i < s.size()) {
    char c = s[i];
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
        c == '\'') {
      bool exponent = hex ? (c == 'p' || c == 'P') : (c == 'e' || c == 'E');
      ++i;
      if (exponent && i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
      continue;
    }
    break;
  }
  return i;
}

}  // namespace

bool is_identifier_start(char c) noexcept {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_identifier_char(char c) noexcept {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_keyword(std::string_view word) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view s, LexOptions options) {
  std::vector<Token> out;
  std::size_t i = 0;
  bool at_line_start = true;

  auto push = [&](TokenKind kind, std::size_t begin, std::size_t end) {
    out.push_back(Token{kind, std::string(s.substr(begin, end - begin)), begin,
                        end - begin});
  };

  while (i < s.size()) {
    char c = s[i];
    if (c == '\n') {
      at_line_start = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (starts_with_at(s, i, "//")) {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    if (starts_with_at(s, i, "/*")) {
      auto close = s.find("*/", i + 2);
      i = close == std::string_view::npos ? s.size() : close + 2;
      continue;
    }
    if (c == '#' && at_line_start && options.skip_preprocessor) {
      while (i < s.size() && s[i] != '\n') {
        if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
        ++i;
      }
      continue;
    }
    at_line_start = false;

    std::size_t begin = i;
    if (is_identifier_start(c)) {
      while (i < s.size() && is_identifier_char(s[i])) ++i;
      push(TokenKind::Identifier, begin, i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < s.size() &&
                std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      i = skip_number(s, i);
      push(TokenKind::Number, begin, i);
    } else if (c == '"') {
      i = skip_literal(s, i, '"');
      push(TokenKind::String, begin, i);
    } else if (c == '\'') {
      i = skip_literal(s, i, '\'');
      push(TokenKind::Char, begin, i);
    } else {
      std::size_t len = 1;
      for (auto p : kThreeCharPuncts) {
        if (starts_with_at(s, i, p)) {
          len = 3;
          break;
        }
      }
      if (len == 1) {
        for (auto p : kTwoCharPuncts) {
          if (starts_with_at(s, i, p)) {
            len = 2;
            break;
          }
        }
      }
      i += len;
      push(TokenKind::Punct, begin, i);
    }
  }
  return out;
}

}  // namespace coverify::lex
