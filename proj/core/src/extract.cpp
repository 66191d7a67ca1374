#include <algorithm>
#include <regex>

#include <spdlog/spdlog.h>

#include "coverify/gateway.hpp"
#include "coverify/lexer.hpp"

namespace coverify {

namespace {

std::string_view trim_view(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view payload_of(std::string_view raw) {
  for (auto [open, close] : {std::pair{"[INPUTS]", "[/INPUTS]"}, std::pair{"[CODE]", "[/CODE]"}}) {
    auto a = raw.find(open);
    if (a == std::string_view::npos) continue;
    auto body = raw.substr(a + std::char_traits<char>::length(open));
    auto b = body.find(close);
    return b == std::string_view::npos ? body : body.substr(0, b);
  }
  return raw;
}

bool is_member_access(const std::vector<lex::Token>& toks, std::size_t i) {
  return i > 0 && (toks[i - 1].is(".") || toks[i - 1].is("->") || toks[i - 1].is("::"));
}

// Index of the ')' closing the '(' at toks[open].
std::size_t matching_paren(const std::vector<lex::Token>& toks, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].is("(")) ++depth;
    if (toks[i].is(")") && --depth == 0) return i;
  }
  return toks.size();
}

std::string normalize_invocation(std::string snippet, const std::vector<std::string>& callees,
                                 int index, std::string_view raw) {
  auto toks = lex::tokenize(snippet);
  std::vector<std::size_t> wrapper_calls;
  std::vector<std::size_t> direct_calls;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (!toks[i].is_identifier() || !toks[i + 1].is("(") || is_member_access(toks, i)) continue;
    if (toks[i].is("wrapper")) {
      wrapper_calls.push_back(i);
    } else if (std::find(callees.begin(), callees.end(), toks[i].text) != callees.end()) {
      direct_calls.push_back(i);
    }
  }
  const std::string where = "input case " + std::to_string(index);
  if (wrapper_calls.size() == 1) return snippet;
  if (wrapper_calls.size() > 1)
    throw ExtractionError(where + " has " + std::to_string(wrapper_calls.size()) +
                              " harness invocations",
                          std::string(raw));
  if (direct_calls.size() != 1)
    throw ExtractionError(where + (direct_calls.empty() ? " does not call the function"
                                                        : " calls the function more than once"),
                          std::string(raw));

  std::size_t name = direct_calls.front();
  std::size_t open = name + 1;
  std::size_t close = matching_paren(toks, open);
  if (close == toks.size())
    throw ExtractionError(where + " has an unbalanced call", std::string(raw));
  bool has_args = close > open + 1;
  std::string rewritten = snippet.substr(0, toks[name].offset);
  rewritten += "wrapper(" + toks[name].text + (has_args ? ", " : "");
  rewritten += snippet.substr(toks[open].end());
  return rewritten;
}

}  // namespace

std::string extract_tagged(std::string_view text, std::string_view open_tag,
                           std::string_view close_tag) {
  auto a = text.find(open_tag);
  if (a == std::string_view::npos)
    throw ExtractionError("open tag " + std::string(open_tag) + " not found", std::string(text));
  auto start = a + open_tag.size();
  auto b = text.find(close_tag, start);
  if (b == std::string_view::npos)
    throw ExtractionError("close tag " + std::string(close_tag) + " not found after " +
                              std::string(open_tag),
                          std::string(text));
  if (text.find(open_tag, b + close_tag.size()) != std::string_view::npos)
    spdlog::debug("extract_tagged: additional {} blocks ignored", open_tag);
  return std::string(trim_view(text.substr(start, b - start)));
}

TestSuite split_test_cases(std::string_view raw, std::string function_id, int n_tests,
                           const std::vector<std::string>& callee_names) {
  if (n_tests < 1) throw std::invalid_argument("n_tests must be >= 1");
  static const std::regex marker(R"(//[ \t]*Input[ \t]+case[ \t]+(\d+)[ \t]*:)",
                                 std::regex::icase);
  std::string text(payload_of(raw));

  struct Mark {
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Mark> marks;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker);
       it != std::sregex_iterator(); ++it)
    marks.push_back({static_cast<std::size_t>(it->position()),
                     static_cast<std::size_t>(it->position() + it->length())});

  if (static_cast<int>(marks.size()) < n_tests)
    throw ExtractionError("expected " + std::to_string(n_tests) + " input case markers, found " +
                              std::to_string(marks.size()),
                          std::string(raw));
  if (static_cast<int>(marks.size()) > n_tests)
    spdlog::warn("{}: {} input cases returned, keeping the first {}", function_id, marks.size(),
                 n_tests);

  TestSuite suite;
  suite.function_id = std::move(function_id);
  for (int k = 0; k < n_tests; ++k) {
    std::size_t from = marks[k].end;
    std::size_t to = k + 1 < static_cast<int>(marks.size()) ? marks[k + 1].begin : text.size();
    std::string snippet(trim_view(std::string_view(text).substr(from, to - from)));
    if (snippet.empty())
      throw ExtractionError("input case " + std::to_string(k + 1) + " is empty", std::string(raw));
    suite.cases.push_back({k + 1, normalize_invocation(std::move(snippet), callee_names, k + 1, raw)});
  }
  return suite;
}

std::string serialize_suite(const TestSuite& suite) {
  std::string out;
  for (const auto& c : suite.cases) {
    if (!out.empty()) out += "\n\n";
    out += "//Input case " + std::to_string(c.index) + ":\n" + c.snippet;
  }
  return out;
}

}  // namespace coverify
