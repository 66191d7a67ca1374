#include "coverify/verify.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "coverify/errors.hpp"

namespace coverify {

namespace {

constexpr std::string_view kReturn = "Return value: ";
constexpr std::string_view kArgs = " Arguments after function call: (";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[' || s[i] == '(') ++depth;
    if (s[i] == ']' || s[i] == ')') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

ArgumentSnapshot parse_argument(std::string_view text) {
  ArgumentSnapshot snap;
  if (text.empty() || text.front() != '[') {
    snap.tokens.emplace_back(text);
    return snap;
  }
  snap.is_array = true;
  std::string flat;
  for (char c : text) flat += (c == '[' || c == ']') ? ',' : c;
  std::string_view rest = flat;
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    auto comma = rest.find(',', pos);
    auto item = trim(rest.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (!item.empty()) snap.tokens.emplace_back(item);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return snap;
}

std::optional<int> delimiter(std::string_view line, std::string_view head) {
  line = trim(line);
  if (line.substr(0, head.size()) != head || line.size() < head.size() + 4) return std::nullopt;
  if (line.substr(line.size() - 4) != " ===") return std::nullopt;
  auto digits = line.substr(head.size(), line.size() - head.size() - 4);
  if (digits.empty()) return std::nullopt;
  int value = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

std::optional<double> as_number(std::string_view token) {
  if (token.empty()) return std::nullopt;
  std::string s(token);
  if (s == "nan" || s == "-nan" || s == "+nan") return std::nan("");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string first_diagnostic(const ExecutionResult& r);

// Run failures: how the process ended, then the first stderr line.
std::string run_failure(const ExecutionResult& r) {
  std::string how;
  if (r.status == ExecStatus::Timeout) how = "timed out";
  else if (r.signal) how = "killed by signal " + std::to_string(*r.signal) + " (" + strsignal(*r.signal) + ")";
  else if (r.exit_code) how = "exit code " + std::to_string(*r.exit_code);
  if (r.stderr_text.find_first_not_of(" \t\r\n") == std::string::npos) return how.empty() ? "run failed" : how;
  ExecutionResult e = r;
  e.stdout_text.clear();
  auto line = first_diagnostic(e);
  return how.empty() ? line : how + ": " + line;
}

std::string first_diagnostic(const ExecutionResult& r) {
  std::string_view text = r.stderr_text.empty() ? std::string_view(r.stdout_text) : std::string_view(r.stderr_text);
  std::string_view pick;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (pick.empty() && !line.empty()) pick = line;
    if (line.find("error") != std::string_view::npos) {
      pick = line;
      break;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  std::string out(pick);
  if (out.empty()) {
    if (r.status == ExecStatus::Timeout) return "timed out";
    if (r.signal) return "killed by signal " + std::to_string(*r.signal);
    if (r.exit_code) return "exit code " + std::to_string(*r.exit_code);
  }
  if (out.size() > 300) out.resize(300);
  return out;
}

Backend backend_for(Language lang, const VerifyContext& ctx) {
  return lang == Language::C ? ctx.c_backend : ctx.cuda_backend;
}

std::optional<std::string> shim_problem(std::string_view source) {
  std::string reasons;
  for (const auto& chunk : split_function_definitions(source)) {
    Signature sig;
    try {
      sig = parse_signature(chunk);
    } catch (const Error&) {
      continue;
    }
    if (!sig.is_kernel) continue;
    for (const auto& r : shim_compatible(chunk).reasons)
      if (reasons.find(r) == std::string::npos) reasons += (reasons.empty() ? "" : ", ") + r;
  }
  if (reasons.empty()) return std::nullopt;
  return "cuda_shim cannot emulate: " + reasons;
}

struct Entry {
  std::string source;
  Signature sig;
};

// Picks the function under test in a translation.
Entry pick_entry(std::string_view source, Language target, const FunctionUnit& x) {
  std::vector<Signature> sigs;
  for (const auto& chunk : split_function_definitions(source)) {
    try {
      sigs.push_back(parse_signature(chunk));
    } catch (const UnsupportedSignature&) {
    } catch (const ParseError&) {
    }
  }
  if (sigs.empty()) throw ParseError("translation contains no function definition");
  std::string wrapper_name;
  if (x.wrapper_source) {
    try {
      wrapper_name = parse_wrapper_signature(*x.wrapper_source).name;
    } catch (const Error&) {
    }
  }
  auto named = [&](const Signature& s) {
    return s.name == x.name || (!wrapper_name.empty() && s.name == wrapper_name);
  };
  const Signature* pick = nullptr;
  auto first = [&](auto pred) {
    for (const auto& s : sigs)
      if (!pick && pred(s)) pick = &s;
  };
  if (target == Language::CUDA) {
    first([&](const Signature& s) { return s.is_kernel && named(s); });
    first([&](const Signature& s) { return s.is_kernel; });
  }
  first(named);
  if (!pick) pick = target == Language::C ? &sigs.back() : &sigs.front();
  return {std::string(source), *pick};
}

Rejection make_rejection(const std::string& fid, int candidate, Direction direction, int iteration,
                         Stage stage, std::string detail, std::optional<ErrorType> type = std::nullopt) {
  return {fid, candidate, direction, iteration, stage, std::move(detail), type};
}

// Runs one harness. On failure fills `rejection`, otherwise returns the transcript.
std::optional<CanonicalOutput> execute_side(const HarnessUnit& unit, const VerifyContext& ctx,
                                            Stage compile_stage, Stage run_stage,
                                            const Rejection& base, std::optional<Rejection>& rejection,
                                            int* completed = nullptr) {
  auto outcome = ctx.runner->execute(unit);
  auto fail = [&](Stage stage, std::string detail, std::optional<ErrorType> type) {
    Rejection r = base;
    r.stage = stage;
    r.detail = std::move(detail);
    r.error_type = type;
    rejection = std::move(r);
  };
  if (!outcome.compile.ok()) {
    fail(compile_stage, first_diagnostic(outcome.compile), outcome.compile.error_type.value_or(ErrorType::Unknown));
    return std::nullopt;
  }
  if (!outcome.run) {
    fail(run_stage, "no run recorded", ErrorType::Unknown);
    return std::nullopt;
  }
  const auto& run = *outcome.run;
  std::optional<CanonicalOutput> parsed;
  try {
    parsed = parse_output(run.stdout_text);
  } catch (const ParseError&) {
  }
  if (completed && parsed) {
    *completed = 0;
    for (const auto& c : parsed->cases)
      if (c.has_record) ++*completed;
  }
  if (!run.ok()) {
    std::string detail = run_failure(run);
    fail(run_stage, detail, run.error_type.value_or(ErrorType::Unknown));
    return std::nullopt;
  }
  if (!parsed) {
    fail(run_stage, "no case delimiters in output", ErrorType::Unknown);
    return std::nullopt;
  }
  bool records = parsed->complete && static_cast<int>(parsed->cases.size()) == unit.case_count;
  for (const auto& c : parsed->cases) records = records && c.has_record;
  if (!records) {
    fail(run_stage,
         "transcript incomplete: " + std::to_string(parsed->cases.size()) + " of " +
             std::to_string(unit.case_count) + " cases",
         ErrorType::Unknown);
    return std::nullopt;
  }
  return parsed;
}

}  // namespace

CaseRecord parse_record_line(std::string_view line) {
  line = trim(line);
  auto args_at = line.find(kArgs);
  if (line.substr(0, kReturn.size()) != kReturn || args_at == std::string_view::npos)
    throw ParseError("not a record line: " + std::string(line.substr(0, 80)));
  if (line.back() != ')') throw ParseError("record line is not closed: " + std::string(line.substr(0, 80)));
  CaseRecord rec;
  rec.has_record = true;
  rec.return_token = std::string(trim(line.substr(kReturn.size(), args_at - kReturn.size())));
  auto inner = line.substr(args_at + kArgs.size());
  inner.remove_suffix(1);
  int depth = 0;
  for (char c : inner) {
    depth += c == '[' ? 1 : c == ']' ? -1 : 0;
    if (depth < 0) break;
  }
  if (depth != 0) throw ParseError("unbalanced brackets in record line: " + std::string(line.substr(0, 80)));
  if (!trim(inner).empty())
    for (auto arg : split_top_level(inner)) rec.snapshots.push_back(parse_argument(arg));
  return rec;
}

CanonicalOutput parse_output(std::string_view text) {
  CanonicalOutput out;
  std::optional<CaseRecord> open;
  bool seen = false, broken = false;
  std::size_t pos = 0;
  while (pos < text.size() && !broken) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (auto k = delimiter(line, "=== CASE ")) {
      seen = true;
      if (open) {
        broken = true;
        break;
      }
      open = CaseRecord{};
      open->index = *k;
      continue;
    }
    if (auto k = delimiter(line, "=== END ")) {
      seen = true;
      if (!open || open->index != *k) {
        broken = true;
        break;
      }
      out.cases.push_back(std::move(*open));
      open.reset();
      continue;
    }
    if (!open) continue;

    auto at = line.rfind(kReturn);
    if (at != std::string_view::npos && !open->has_record &&
        line.find(kArgs, at) != std::string_view::npos) {
      try {
        auto rec = parse_record_line(line.substr(at));
        if (at > 0) open->other_lines.emplace_back(line.substr(0, at));
        rec.index = open->index;
        rec.other_lines = std::move(open->other_lines);
        *open = std::move(rec);
        continue;
      } catch (const ParseError&) {
      }
    }
    open->other_lines.emplace_back(line);
  }
  if (!seen) throw ParseError("output contains no case delimiters");
  out.complete = !broken && !open;
  return out;
}

bool tokens_equal(std::string_view a, std::string_view b, const NumericTolerance& tol) {
  if (a == b) return !(tol.strict_nan && as_number(a) && std::isnan(*as_number(a)));
  auto u = as_number(a), v = as_number(b);
  if (!u || !v) return false;
  if (std::isnan(*u) || std::isnan(*v)) return std::isnan(*u) && std::isnan(*v) && !tol.strict_nan;
  if (std::isinf(*u) || std::isinf(*v)) return *u == *v;
  return std::fabs(*u - *v) <= tol.abs + tol.rel * std::max(std::fabs(*u), std::fabs(*v));
}

Comparison outputs_equal(const CanonicalOutput& a, const CanonicalOutput& b, const NumericTolerance& tol) {
  if (!a.complete || !b.complete) throw std::invalid_argument("cannot compare incomplete transcripts");
  auto differ = [](std::string msg) { return Comparison{false, std::move(msg)}; };
  if (a.cases.size() != b.cases.size())
    return differ("case count " + std::to_string(a.cases.size()) + " vs " + std::to_string(b.cases.size()));
  for (std::size_t c = 0; c < a.cases.size(); ++c) {
    const auto& x = a.cases[c];
    const auto& y = b.cases[c];
    std::string where = "case " + std::to_string(c + 1);
    if (x.has_record != y.has_record) return differ(where + ": record present on one side only");
    if (!tokens_equal(x.return_token, y.return_token, tol))
      return differ(where + ", return value: " + x.return_token + " vs " + y.return_token);
    if (x.snapshots.size() != y.snapshots.size())
      return differ(where + ": argument count " + std::to_string(x.snapshots.size()) + " vs " +
                    std::to_string(y.snapshots.size()));
    for (std::size_t i = 0; i < x.snapshots.size(); ++i) {
      const auto& p = x.snapshots[i];
      const auto& q = y.snapshots[i];
      std::string arg = where + ", argument " + std::to_string(i + 1);
      if (p.is_array != q.is_array) return differ(arg + ": array vs scalar");
      if (p.tokens.size() != q.tokens.size())
        return differ(arg + ": length " + std::to_string(p.tokens.size()) + " vs " +
                      std::to_string(q.tokens.size()));
      for (std::size_t e = 0; e < p.tokens.size(); ++e)
        if (!tokens_equal(p.tokens[e], q.tokens[e], tol))
          return differ(p.is_array ? arg + ", element " + std::to_string(e + 1) + ": " + p.tokens[e] +
                                         " vs " + q.tokens[e]
                                   : arg + ": " + p.tokens[e] + " vs " + q.tokens[e]);
    }
    if (x.other_lines.size() != y.other_lines.size())
      return differ(where + ": printed " + std::to_string(x.other_lines.size()) + " vs " +
                    std::to_string(y.other_lines.size()) + " extra lines");
    for (std::size_t l = 0; l < x.other_lines.size(); ++l) {
      auto wa = words(x.other_lines[l]);
      auto wb = words(y.other_lines[l]);
      bool same = wa.size() == wb.size();
      for (std::size_t w = 0; same && w < wa.size(); ++w) same = tokens_equal(wa[w], wb[w], tol);
      if (!same) return differ(where + ", printed line " + std::to_string(l + 1) + ": '" + x.other_lines[l] +
                               "' vs '" + y.other_lines[l] + "'");
    }
  }
  return {};
}

bool check(const CanonicalOutput& x, const CanonicalOutput& y, const NumericTolerance& tol) {
  if (!x.complete || !y.complete) return false;
  return outputs_equal(x, y, tol).equal;
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::XCompile: return "x_compile";
    case Stage::XRun: return "x_run";
    case Stage::YCompile: return "y_compile";
    case Stage::YRun: return "y_run";
    case Stage::Mismatch: return "mismatch";
    case Stage::Extraction: return "extraction";
  }
  return "extraction";
}

std::optional<Stage> parse_stage(std::string_view text) noexcept {
  for (auto s : {Stage::XCompile, Stage::XRun, Stage::YCompile, Stage::YRun, Stage::Mismatch, Stage::Extraction})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

std::string VerifiedTriplet::id() const { return x.id + "#" + std::to_string(candidate_index); }

SourceRun run_source(const FunctionUnit& x, const TestSuite& suite, Direction direction,
                     const VerifyContext& ctx) {
  if (!ctx.runner) throw std::invalid_argument("verify context has no runner");
  SourceRun result;
  result.n_cases = static_cast<int>(suite.cases.size());
  Rejection base = make_rejection(x.id, -1, direction, ctx.iteration, Stage::XCompile, {});
  Backend backend = backend_for(x.language, ctx);

  if (x.language == Language::CUDA && backend == Backend::CudaShim)
    if (auto problem = shim_problem(x.source)) {
      base.detail = *problem;
      result.failure = base;
      return result;
    }

  HarnessUnit unit;
  try {
    unit = emit_harness(x.source, x.signature, suite, backend, x.wrapper_source);
  } catch (const HarnessError& e) {
    base.detail = e.what();
    result.failure = base;
    return result;
  }
  std::optional<Rejection> rejection;
  int completed = 0;
  auto transcript = execute_side(unit, ctx, Stage::XCompile, Stage::XRun, base, rejection, &completed);
  result.valid_cases = completed;
  if (rejection) {
    result.failure = std::move(rejection);
    return result;
  }
  result.valid_cases = result.n_cases;
  result.transcript = std::move(transcript);
  return result;
}

VerifyResult verify_candidate(const FunctionUnit& x, const SourceRun& source, const TranslationCandidate& y,
                              const TestSuite& suite, const VerifyContext& ctx) {
  if (!ctx.runner) throw std::invalid_argument("verify context has no runner");
  Rejection base = make_rejection(x.id, y.index, y.direction, ctx.iteration, Stage::Extraction, {});
  if (source.failure) {
    Rejection r = *source.failure;
    r.candidate_index = y.index;
    r.direction = y.direction;
    return r;
  }
  if (!y.source) {
    base.detail = y.error.empty() ? "no translation extracted" : y.error;
    return base;
  }

  Language target = target_language(y.direction);
  Entry entry;
  try {
    entry = pick_entry(*y.source, target, x);
  } catch (const ParseError& e) {
    base.detail = std::string("translation does not parse: ") + e.what();
    return base;
  }
  std::optional<std::string> wrapper;
  if (target == Language::CUDA) {
    if (!entry.sig.is_kernel) {
      base.detail = "CUDA translation defines no kernel";
      return base;
    }
    wrapper = y.wrapper;
    if (entry.sig.is_kernel && !wrapper) {
      base.detail = y.error.empty() ? "kernel '" + entry.sig.name + "' has no wrapper" : y.error;
      return base;
    }
  }

  Backend backend = backend_for(target, ctx);
  base.stage = Stage::YCompile;
  if (target == Language::CUDA && backend == Backend::CudaShim)
    if (auto problem = shim_problem(entry.source)) {
      base.detail = *problem;
      return base;
    }

  HarnessUnit unit;
  try {
    unit = emit_harness(entry.source, entry.sig, suite, backend, wrapper);
  } catch (const HarnessError& e) {
    base.detail = e.what();
    return base;
  }
  std::optional<Rejection> rejection;
  auto transcript = execute_side(unit, ctx, Stage::YCompile, Stage::YRun, base, rejection);
  if (rejection) return *rejection;

  auto cmp = outputs_equal(*source.transcript, *transcript, ctx.tolerance);
  if (!cmp.equal) {
    base.stage = Stage::Mismatch;
    base.detail = cmp.first_difference;
    return base;
  }
  VerifiedTriplet t;
  t.x = x;
  t.y = *y.source;
  t.y_wrapper = wrapper;
  t.suite = suite;
  t.x_transcript = *source.transcript;
  t.y_transcript = std::move(*transcript);
  t.direction = y.direction;
  t.iteration = ctx.iteration;
  t.candidate_index = y.index;
  return t;
}

VerifyResult verify_triplet(const FunctionUnit& x, const TranslationCandidate& y, const TestSuite& suite,
                            const VerifyContext& ctx) {
  auto source = run_source(x, suite, y.direction, ctx);
  return verify_candidate(x, source, y, suite, ctx);
}

namespace {

struct FunctionResult {
  std::vector<VerifyResult> results;
  FunctionValidity validity;
};

FunctionResult verify_function(const FunctionUnit& x, Direction direction,
                               const std::vector<TranslationCandidate>* candidates, const TestSuite* suite,
                               const VerifyContext& ctx) {
  FunctionResult fr;
  fr.validity.function_id = x.id;
  if (!suite) {
    std::string detail = "no test suite";
    if (!candidates || candidates->empty())
      fr.results.push_back(make_rejection(x.id, -1, direction, ctx.iteration, Stage::Extraction, detail));
    else
      for (const auto& y : *candidates)
        fr.results.push_back(make_rejection(x.id, y.index, direction, ctx.iteration, Stage::Extraction, detail));
    return fr;
  }
  auto source = run_source(x, *suite, direction, ctx);
  fr.validity.n_cases = source.n_cases;
  fr.validity.valid_cases = source.valid_cases;
  fr.validity.all_valid = source.all_valid();
  if (!candidates || candidates->empty()) {
    fr.results.push_back(
        make_rejection(x.id, -1, direction, ctx.iteration, Stage::Extraction, "no translation candidates"));
    return fr;
  }
  for (const auto& y : *candidates) fr.results.push_back(verify_candidate(x, source, y, *suite, ctx));
  return fr;
}

}  // namespace

CoVerifyResult co_verify_corpus(const std::vector<FunctionUnit>& corpus, Direction direction,
                                const std::map<std::string, std::vector<TranslationCandidate>>& translations,
                                const std::map<std::string, TestSuite>& suites, const VerifyContext& ctx,
                                WorkerPool* pool) {
  std::vector<const FunctionUnit*> selected;
  for (const auto& fn : corpus)
    if (fn.language == source_language(direction)) selected.push_back(&fn);

  auto job = [&](const FunctionUnit* fn) {
    auto t = translations.find(fn->id);
    auto s = suites.find(fn->id);
    return verify_function(*fn, direction, t == translations.end() ? nullptr : &t->second,
                           s == suites.end() ? nullptr : &s->second, ctx);
  };

  std::vector<FunctionResult> results;
  if (pool) {
    std::vector<std::future<FunctionResult>> futures;
    for (const auto* fn : selected) futures.push_back(pool->submit([&job, fn] { return job(fn); }));
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (const auto* fn : selected) results.push_back(job(fn));
  }

  CoVerifyResult out;
  for (auto& fr : results) {
    out.validity.push_back(fr.validity);
    for (auto& r : fr.results) {
      if (auto* t = std::get_if<VerifiedTriplet>(&r))
        out.triplets.push_back(std::move(*t));
      else
        out.rejections.push_back(std::move(std::get<Rejection>(r)));
    }
  }
  spdlog::info("co-verification ({}): {} accepted, {} rejected", to_string(direction), out.triplets.size(),
               out.rejections.size());
  return out;
}

double vt_metric(const std::vector<std::pair<int, bool>>& per_function) {
  if (per_function.empty()) throw std::invalid_argument("VT of an empty function set");
  long valid = 0;
  for (const auto& [cases, ok] : per_function)
    if (ok && cases > 0) ++valid;
  return static_cast<double>(valid) / static_cast<double>(per_function.size());
}

ErrorHistogram error_histogram(const std::vector<Rejection>& rejections) {
  std::vector<std::optional<ErrorType>> types;
  types.reserve(rejections.size());
  for (const auto& r : rejections) types.push_back(r.error_type);
  return error_histogram(types);
}

}  // namespace coverify
