#include "coverify/wrapgen.hpp"

#include <regex>

#include "coverify/errors.hpp"
#include "coverify/hash.hpp"
#include "coverify/lexer.hpp"

namespace coverify {

namespace {

using lex::Token;

struct Range {
  std::size_t begin;  // token index, inclusive
  std::size_t end;    // token index, exclusive
};

bool opens(const Token& t) { return t.is("(") || t.is("[") || t.is("{"); }
bool closes(const Token& t) { return t.is(")") || t.is("]") || t.is("}"); }

// Index of the token closing the bracket at toks[open], or toks.size().
std::size_t match_close(const std::vector<Token>& toks, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (opens(toks[i])) ++depth;
    if (closes(toks[i]) && --depth == 0) return i;
  }
  return toks.size();
}

std::vector<Range> split_commas(const std::vector<Token>& toks, std::size_t begin, std::size_t end) {
  std::vector<Range> out;
  if (begin >= end) return out;
  int depth = 0;
  std::size_t start = begin;
  for (std::size_t i = begin; i < end; ++i) {
    if (opens(toks[i])) ++depth;
    if (closes(toks[i])) --depth;
    if (depth == 0 && toks[i].is(",")) {
      out.push_back({start, i});
      start = i + 1;
    }
  }
  out.push_back({start, end});
  return out;
}

std::string_view text_of(std::string_view src, const std::vector<Token>& toks, Range r) {
  if (r.begin >= r.end) return {};
  return src.substr(toks[r.begin].offset, toks[r.end - 1].end() - toks[r.begin].offset);
}

bool declared_as_array(const std::vector<Token>& toks, const std::string& name) {
  for (std::size_t i = 1; i + 1 < toks.size(); ++i) {
    if (!toks[i].is(name) || !toks[i + 1].is("[")) continue;
    const auto& prev = toks[i - 1];
    if (prev.is_identifier() || prev.is("*")) return true;
  }
  return false;
}

std::string rebind_case(const std::string& snippet, int index, const Signature& entry) {
  auto toks = lex::tokenize(snippet, {.skip_preprocessor = true});
  std::optional<std::size_t> call;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].is("wrapper") && toks[i + 1].is("(")) {
      if (call) throw HarnessError("case " + std::to_string(index) + " has more than one wrapper call");
      call = i;
    }
  }
  if (!call) throw HarnessError("case " + std::to_string(index) + " has no wrapper call");

  std::size_t open = *call + 1;
  std::size_t close = match_close(toks, open);
  if (close == toks.size())
    throw HarnessError("case " + std::to_string(index) + " has an unbalanced wrapper call");
  auto args = split_commas(toks, open + 1, close);
  if (args.empty() || args[0].begin == args[0].end)
    throw HarnessError("case " + std::to_string(index) + ": wrapper call names no function");

  for (std::size_t p = 0; p < entry.params.size() && p + 1 < args.size(); ++p) {
    if (!entry.params[p].is_pointer) continue;
    Range a = args[p + 1];
    bool bare = a.end == a.begin + 1 && toks[a.begin].is_identifier();
    if (!bare || !declared_as_array(toks, toks[a.begin].text))
      throw HarnessError("case " + std::to_string(index) + ": pointer parameter '" +
                         entry.params[p].name + "' must receive a sized array declared in the case, got '" +
                         std::string(text_of(snippet, toks, a)) + "'");
  }

  std::string out = snippet.substr(0, toks[args[0].begin].offset);
  out += "coverify_entry";
  out += snippet.substr(toks[args[0].end - 1].end());
  return out;
}

std::string strip_cuda_includes(std::string_view src) {
  static const std::regex inc(
      R"((^|\n)[ \t]*#[ \t]*include[ \t]*[<"](cuda[A-Za-z0-9_]*|cuda_runtime[A-Za-z0-9_]*|device_launch_parameters|cuda_fp16|curand[A-Za-z0-9_]*|cooperative_groups)(\.h|\.hpp)?[>"][^\n]*)");
  return std::regex_replace(std::string(src), inc, "$1");
}

void indent_into(std::string& out, std::string_view text, std::string_view pad) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty()) {
      out += pad;
      out += line;
    }
    out += '\n';
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::NativeC: return "native_c";
    case Backend::Nvcc: return "nvcc";
    case Backend::CudaShim: return "cuda_shim";
  }
  return "native_c";
}

std::optional<Backend> parse_backend(std::string_view text) noexcept {
  for (auto b : {Backend::NativeC, Backend::Nvcc, Backend::CudaShim})
    if (to_string(b) == text) return b;
  if (text == "native" || text == "c") return Backend::NativeC;
  if (text == "shim") return Backend::CudaShim;
  return std::nullopt;
}

std::string HarnessUnit::digest() const {
  return sha256_hex(std::string(to_string(backend)) + "\n" + unit_source);
}

HarnessUnit emit_harness(std::string_view fn_source, const Signature& sig, const TestSuite& suite,
                         Backend backend, const std::optional<std::string>& wrapper_source) {
  if (suite.cases.empty()) throw HarnessError(suite.function_id + ": test suite is empty");
  if (sig.is_kernel && !wrapper_source)
    throw HarnessError(suite.function_id + ": kernel '" + sig.name + "' has no wrapper");
  if (sig.is_kernel && backend == Backend::NativeC)
    throw HarnessError(suite.function_id + ": kernel '" + sig.name + "' needs a CUDA backend");

  Signature entry = sig;
  if (wrapper_source) {
    try {
      entry = parse_wrapper_signature(*wrapper_source);
    } catch (const ParseError& e) {
      throw HarnessError(suite.function_id + ": wrapper does not parse: " + e.what());
    }
  }

  std::string code(fn_source);
  std::string wrapper = wrapper_source.value_or("");
  if (backend == Backend::CudaShim) {
    try {
      auto hosts = host_function_names(code + "\n" + wrapper);
      code = rewrite_kernel_launch(strip_cuda_includes(code), hosts);
      wrapper = rewrite_kernel_launch(strip_cuda_includes(wrapper), hosts);
    } catch (const ParseError& e) {
      throw HarnessError(suite.function_id + ": " + e.what());
    }
  }

  std::string out;
  out += "// coverify harness: " + suite.function_id + " (" + std::string(to_string(backend)) + ")\n";
  out += "#include \"coverify_harness.h\"\n";
  if (backend == Backend::CudaShim) out += "#include \"coverify_cuda_shim.h\"\n";
  out += "\n";
  out += code;
  if (!code.empty() && code.back() != '\n') out += '\n';
  if (!wrapper.empty()) {
    out += "\n";
    out += wrapper;
    if (wrapper.back() != '\n') out += '\n';
  }
  out += "\nint main() {\n";
  out += "  auto coverify_entry = [](auto&&... a) -> decltype(auto) { return " + entry.name +
         "(a...); };\n";
  for (std::size_t k = 0; k < suite.cases.size(); ++k) {
    int index = static_cast<int>(k) + 1;
    out += "  coverify_rt::case_begin(" + std::to_string(index) + ");\n";
    out += "  {\n";
    indent_into(out, rebind_case(suite.cases[k].snippet, index, entry), "    ");
    out += "  }\n";
    out += "  coverify_rt::case_end(" + std::to_string(index) + ");\n";
  }
  out += "  return 0;\n}\n";

  return {suite.function_id, backend, std::move(out), static_cast<int>(suite.cases.size())};
}

std::set<std::string> host_function_names(std::string_view source) {
  std::set<std::string> names;
  for (const auto& chunk : split_function_definitions(source)) {
    try {
      auto sig = parse_signature(chunk);
      if (!sig.is_kernel) names.insert(sig.name);
    } catch (const Error&) {
    }
  }
  return names;
}

std::string rewrite_kernel_launch(std::string_view source, const std::set<std::string>& host_functions) {
  auto toks = lex::tokenize(source);
  std::string out;
  std::size_t copied = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].is(">>>")) throw ParseError("'>>>' without a preceding '<<<'");
    if (!toks[i].is("<<<")) continue;
    if (i == 0 || !toks[i - 1].is_identifier())
      throw ParseError("kernel launch '<<<' is not preceded by a kernel name");
    std::size_t close = i + 1;
    while (close < toks.size() && !toks[close].is(">>>")) {
      if (toks[close].is("<<<")) break;
      ++close;
    }
    if (close == toks.size() || !toks[close].is(">>>"))
      throw ParseError("unbalanced '<<<' in kernel launch of " + toks[i - 1].text);
    auto config = split_commas(toks, i + 1, close);
    if (config.size() < 2 || config.size() > 4)
      throw ParseError("kernel launch of " + toks[i - 1].text + " needs 2 to 4 configuration arguments");
    if (close + 1 >= toks.size() || !toks[close + 1].is("("))
      throw ParseError("kernel launch of " + toks[i - 1].text + " has no argument list");
    std::size_t args_open = close + 1;
    std::size_t args_close = match_close(toks, args_open);
    if (args_close == toks.size())
      throw ParseError("unbalanced argument list in kernel launch of " + toks[i - 1].text);

    const Token& name = toks[i - 1];
    out += source.substr(copied, name.offset - copied);
    out += host_functions.count(name.text) ? "CUDA_LAUNCH_HOST(" : "CUDA_LAUNCH(";
    out += name.text + ", ";
    out += text_of(source, toks, config[0]);
    out += ", ";
    out += text_of(source, toks, config[1]);
    if (args_close > args_open + 1) {
      out += ", ";
      out += source.substr(toks[args_open].end(), toks[args_close].offset - toks[args_open].end());
    }
    out += ")";
    copied = toks[args_close].end();
    i = args_close;
  }
  out += source.substr(copied);
  return out;
}

ShimCheck shim_compatible(std::string_view kernel_source) {
  bool barrier = false, shared = false, dynamic = false, warp = false;
  for (const auto& t : lex::tokenize(kernel_source, {.skip_preprocessor = true})) {
    const auto& s = t.text;
    if (t.is("<<<")) dynamic = true;
    if (!t.is_identifier()) continue;
    if (s.rfind("__syncthreads", 0) == 0 || s == "__syncwarp" || s == "this_thread_block" ||
        s == "grid_group" || s == "cooperative_groups")
      barrier = true;
    if (s == "__shared__") shared = true;
    if (s.rfind("__shfl", 0) == 0 || s.rfind("__ballot", 0) == 0 || s == "__any_sync" ||
        s == "__all_sync" || s == "__any" || s == "__all" || s == "__activemask" ||
        s.rfind("__match_", 0) == 0 || (s.rfind("__reduce_", 0) == 0 && s.size() > 5 &&
                                        s.compare(s.size() - 5, 5, "_sync") == 0))
      warp = true;
  }
  ShimCheck check;
  if (barrier) check.reasons.push_back("barrier");
  if (shared) check.reasons.push_back("shared memory");
  if (dynamic) check.reasons.push_back("dynamic parallelism");
  if (warp) check.reasons.push_back("warp intrinsic");
  check.compatible = check.reasons.empty();
  return check;
}

}  // namespace coverify
