#include <fstream>
#include <sstream>

#include "coverify/errors.hpp"
#include "coverify/executor.hpp"
#include "json_io.hpp"

namespace coverify {

namespace {

constexpr auto kCompile = Phase::Compile;
constexpr auto kRun = Phase::Run;

}  // namespace

std::vector<ClassifierRule> ErrorClassifier::builtin_rules() {
  using T = ErrorType;
  return {
      // Type11: kernel launch syntax applied to a host function.
      {T::Type11, R"(host function call cannot be configured)", kCompile, "nvcc"},
      {T::Type11, R"(__global__ function call must be configured)", kCompile, "nvcc"},
      {T::Type11, R"(cannot launch (a )?(non-kernel|host) function)", kCompile, "clang"},

      // Type6
      {T::Type6, R"(#include expects)", kCompile, "gcc"},
      {T::Type6, R"(fatal error: [^\n]*: No such file or directory)", kCompile, "gcc"},
      {T::Type6, R"(invalid preprocessing directive)", kCompile, "gcc"},
      {T::Type6, R"(fatal error: '[^']*' file not found)", kCompile, "clang"},
      {T::Type6, R"(expected "FILENAME" or <FILENAME>)", kCompile, "clang"},
      {T::Type6, R"(cannot open source file)", kCompile, "nvcc"},
      {T::Type6, R"(unrecognized preprocessing directive)", kCompile, "nvcc"},

      // Type10
      {T::Type10, R"(jump to (case )?label)", kCompile, "gcc"},
      {T::Type10, R"(crosses initialization of)", kCompile, "gcc"},
      {T::Type10, R"(cannot jump from [^\n]* to)", kCompile, "clang"},
      {T::Type10, R"(transfer of control bypasses initialization)", kCompile, "nvcc"},

      // Type8, library name clashes before generic ambiguity.
      {T::Type8, R"(reference to '[^']*' is ambiguous)", kCompile, "gcc/clang"},
      {T::Type8, R"(conflicting declaration)", kCompile, "gcc"},
      {T::Type8, R"(conflicting types for)", kCompile, "gcc"},

      // Type2
      {T::Type2, R"(too few arguments (to function|in function call|to function call))", kCompile,
       "gcc/clang/nvcc"},
      {T::Type2, R"(too many arguments (to function|in function call|to function call))", kCompile,
       "gcc/clang/nvcc"},
      {T::Type2, R"(requires (at least |at most )?(\d+ arguments?|single argument '[^']*'|no arguments), but \d+ (arguments? )?(was|were) provided)",
       kCompile, "clang"},
      {T::Type2, R"(candidate expects \d+ arguments?, \d+ provided)", kCompile, "gcc"},

      // Type3
      {T::Type3, R"(cannot convert '[^']*' to '[^']*')", kCompile, "gcc"},
      {T::Type3, R"(invalid conversion from '[^']*' to '[^']*')", kCompile, "gcc"},
      {T::Type3, R"(no known conversion (from|for argument))", kCompile, "gcc/clang"},
      {T::Type3, R"(cannot initialize a parameter of type)", kCompile, "clang"},
      {T::Type3, R"(argument of type "[^"]*" is incompatible with parameter of type)", kCompile,
       "nvcc"},

      // Type1
      {T::Type1, R"(call of overloaded '[^']*' is ambiguous)", kCompile, "gcc"},
      {T::Type1, R"(call to '[^']*' is ambiguous)", kCompile, "clang"},
      {T::Type1, R"(more than one instance of overloaded function)", kCompile, "nvcc"},
      {T::Type1, R"(no instance of overloaded function)", kCompile, "nvcc"},
      {T::Type1, R"(no matching function for call to)", kCompile, "gcc/clang"},

      // Type8
      {T::Type8, R"(redeclaration of)", kCompile, "gcc"},
      {T::Type8, R"(redefinition of)", kCompile, "gcc/clang"},
      {T::Type8, R"(has already been (defined|declared))", kCompile, "nvcc"},
      {T::Type8, R"(previously declared here)", kCompile, "gcc"},

      // Type5
      {T::Type5, R"(identifier "[^"]*" is undefined)", kCompile, "nvcc"},
      {T::Type5, R"('[^']*' was not declared in this scope)", kCompile, "gcc"},
      {T::Type5, R"('[^']*' does not name a type)", kCompile, "gcc"},
      {T::Type5, R"('[^']*' has not been declared)", kCompile, "gcc"},
      {T::Type5, R"(use of undeclared identifier)", kCompile, "clang"},
      {T::Type5, R"(unknown type name)", kCompile, "clang"},
      {T::Type5, R"(undefined reference to)", kCompile, "ld"},

      // Type7
      {T::Type7, R"(stray '[^\n]*' in program)", kCompile, "gcc"},
      {T::Type7, R"(unrecognized token)", kCompile, "nvcc"},
      {T::Type7, R"(invalid character)", kCompile, "clang/nvcc"},
      {T::Type7, R"(unexpected character)", kCompile, "clang"},
      {T::Type7, R"(extended character [^\n]* is not valid in an identifier)", kCompile, "gcc"},
      {T::Type7, R"(non-ASCII characters are not allowed)", kCompile, "clang"},

      // Type4
      {T::Type4, R"(expected (a )?['"][;:,)\]}]['"])", kCompile, "gcc/clang/nvcc"},
      {T::Type4, R"(expected '[^']*' at end of input)", kCompile, "gcc"},
      {T::Type4, R"(expected (primary-)?expression)", kCompile, "gcc/clang"},
      {T::Type4, R"(expected an expression)", kCompile, "nvcc"},

      // Type9
      {T::Type9, R"(__shared__)", kCompile, "nvcc"},
      {T::Type9, R"(illegal memory access)", kRun, "runtime"},
      {T::Type9, R"(misaligned address)", kRun, "runtime"},
      {T::Type9, R"(invalid configuration argument)", kRun, "runtime"},
      {T::Type9, R"(too many resources requested for launch)", kRun, "runtime"},
  };
}

ErrorClassifier::ErrorClassifier() : rules_(builtin_rules()) { compile_rules(); }

ErrorClassifier::ErrorClassifier(std::vector<ClassifierRule> rules) : rules_(std::move(rules)) {
  compile_rules();
}

void ErrorClassifier::compile_rules() {
  compiled_.clear();
  for (const auto& r : rules_) {
    try {
      compiled_.push_back({r, std::regex(r.pattern, std::regex::ECMAScript | std::regex::optimize)});
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid classifier pattern '" + r.pattern + "': " + e.what());
    }
  }
}

void ErrorClassifier::prepend(std::vector<ClassifierRule> rules) {
  rules.insert(rules.end(), rules_.begin(), rules_.end());
  rules_ = std::move(rules);
  compile_rules();
}

void ErrorClassifier::prepend_rules_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read rules file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json_io::ordered_json doc;
  try {
    doc = json_io::parse(ss.str());
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError(path.string() + ": expected a JSON array of rules");
  std::vector<ClassifierRule> rules;
  for (const auto& item : doc) {
    ClassifierRule r;
    auto type = item.is_object() && item.contains("type") && item["type"].is_string()
                    ? parse_error_type(item["type"].get<std::string>())
                    : std::nullopt;
    if (!type) throw ConfigError(path.string() + ": rule without a valid \"type\"");
    if (!item.contains("pattern") || !item["pattern"].is_string())
      throw ConfigError(path.string() + ": rule without a \"pattern\"");
    r.type = *type;
    r.pattern = item["pattern"].get<std::string>();
    if (item.contains("phase")) {
      auto phase = item["phase"].is_string() ? parse_phase(item["phase"].get<std::string>()) : std::nullopt;
      if (!phase) throw ConfigError(path.string() + ": rule phase must be \"compile\" or \"run\"");
      r.phase = phase;
    }
    r.toolchain = "user";
    rules.push_back(std::move(r));
  }
  prepend(std::move(rules));
}

ErrorType ErrorClassifier::classify(std::string_view diagnostics, Phase phase) const {
  auto first_match = [&](std::string_view text) -> std::optional<ErrorType> {
    for (const auto& c : compiled_) {
      if (c.rule.phase && *c.rule.phase != phase) continue;
      if (std::regex_search(text.begin(), text.end(), c.re)) return c.rule.type;
    }
    return std::nullopt;
  };
  // The earliest diagnostic decides; later ones are usually follow-on errors.
  // A diagnostic spans its error line plus the notes and context lines after it.
  std::vector<std::string_view> groups;
  std::size_t start = 0, pos = 0;
  while (pos < diagnostics.size()) {
    auto end = diagnostics.find('\n', pos);
    if (end == std::string_view::npos) end = diagnostics.size();
    auto line = diagnostics.substr(pos, end - pos);
    bool opens = line.find("error:") != std::string_view::npos || line.find("Error:") != std::string_view::npos;
    if (opens && pos > start) {
      groups.push_back(diagnostics.substr(start, pos - start));
      start = pos;
    }
    pos = end + 1;
  }
  if (start < diagnostics.size()) groups.push_back(diagnostics.substr(start));
  for (auto g : groups)
    if (auto t = first_match(g)) return *t;
  return ErrorType::Unknown;
}

ErrorType classify_error(std::string_view diagnostics, Phase phase) {
  static const ErrorClassifier classifier;
  return classifier.classify(diagnostics, phase);
}

}  // namespace coverify
