#include "coverify/serialize.hpp"

#include <cmath>

#include "json_io.hpp"

namespace coverify {

namespace json_io {

ordered_json parse(std::string_view text, std::size_t line) {
  try {
    return ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
}

}  // namespace json_io

namespace {

using json_io::ordered_json;

class Reader {
 public:
  Reader(const ordered_json& doc, std::size_t line, std::string what)
      : doc_(doc), line_(line), what_(std::move(what)) {
    if (!doc_.is_object()) fail("expected a JSON object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(what_ + ": " + msg, line_); }

  const ordered_json& at(const char* key) const {
    auto it = doc_.find(key);
    if (it == doc_.end()) fail(std::string("missing '") + key + "'");
    return *it;
  }
  bool has(const char* key) const {
    auto it = doc_.find(key);
    return it != doc_.end() && !it->is_null();
  }
  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) fail(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
  }
  std::optional<std::string> opt_str(const char* key) const {
    if (!has(key)) return std::nullopt;
    return str(key);
  }
  long long integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
    return v.get<long long>();
  }
  std::optional<long long> opt_integer(const char* key) const {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }
  double number(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
    return v.get<double>();
  }
  bool boolean(const char* key) const {
    const auto& v = at(key);
    if (!v.is_boolean()) fail(std::string("'") + key + "' must be a boolean");
    return v.get<bool>();
  }
  const ordered_json& array(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array()) fail(std::string("'") + key + "' must be an array");
    return v;
  }
  Direction direction(const char* key) const {
    auto d = parse_direction(str(key));
    if (!d) fail(std::string("bad direction in '") + key + "'");
    return *d;
  }
  std::optional<ErrorType> error_type(const char* key) const {
    if (!has(key)) return std::nullopt;
    auto t = parse_error_type(str(key));
    if (!t) fail(std::string("bad error type in '") + key + "'");
    return t;
  }
  std::size_t line() const noexcept { return line_; }

 private:
  const ordered_json& doc_;
  std::size_t line_;
  std::string what_;
};

ordered_json opt(const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json unit_json(const FunctionUnit& u) {
  ordered_json j;
  j["id"] = u.id;
  j["language"] = std::string(to_string(u.language));
  j["source"] = u.source;
  if (u.wrapper_source) j["wrapper"] = *u.wrapper_source;
  if (!u.provenance.empty()) j["provenance"] = u.provenance;
  return j;
}

FunctionUnit unit_from(const ordered_json& doc, std::size_t line) {
  Reader r(doc, line, "function unit");
  auto lang = parse_language(r.str("language"));
  if (!lang) r.fail("bad language");
  try {
    return make_unit(r.str("source"), *lang, r.opt_str("wrapper"), r.opt_str("provenance").value_or(""),
                     r.str("id"));
  } catch (const ParseError& e) {
    r.fail(e.what());
  }
}

ordered_json suite_json(const TestSuite& s) {
  ordered_json j;
  j["function_id"] = s.function_id;
  auto& cases = j["cases"] = ordered_json::array();
  for (const auto& c : s.cases) cases.push_back({{"index", c.index}, {"snippet", c.snippet}});
  return j;
}

TestSuite suite_from(const ordered_json& doc, std::size_t line) {
  Reader r(doc, line, "test suite");
  TestSuite s;
  s.function_id = r.str("function_id");
  for (const auto& c : r.array("cases")) {
    Reader cr(c, line, "test case");
    s.cases.push_back({static_cast<int>(cr.integer("index")), cr.str("snippet")});
  }
  return s;
}

ordered_json canonical_json(const CanonicalOutput& out) {
  ordered_json j;
  j["complete"] = out.complete;
  auto& cases = j["cases"] = ordered_json::array();
  for (const auto& c : out.cases) {
    ordered_json cj;
    cj["index"] = c.index;
    cj["record"] = c.has_record;
    cj["return"] = c.return_token;
    auto& args = cj["arguments"] = ordered_json::array();
    for (const auto& s : c.snapshots) {
      if (s.is_array)
        args.push_back(s.tokens);
      else
        args.push_back(s.tokens.empty() ? std::string() : s.tokens.front());
    }
    if (!c.other_lines.empty()) cj["printed"] = c.other_lines;
    cases.push_back(std::move(cj));
  }
  return j;
}

CanonicalOutput canonical_from(const ordered_json& doc, std::size_t line) {
  Reader r(doc, line, "transcript");
  CanonicalOutput out;
  out.complete = r.boolean("complete");
  for (const auto& c : r.array("cases")) {
    Reader cr(c, line, "transcript case");
    CaseRecord rec;
    rec.index = static_cast<int>(cr.integer("index"));
    rec.has_record = cr.boolean("record");
    rec.return_token = cr.str("return");
    for (const auto& a : cr.array("arguments")) {
      ArgumentSnapshot s;
      if (a.is_array()) {
        s.is_array = true;
        for (const auto& t : a) {
          if (!t.is_string()) cr.fail("array elements must be strings");
          s.tokens.push_back(t.get<std::string>());
        }
      } else if (a.is_string()) {
        s.tokens.push_back(a.get<std::string>());
      } else {
        cr.fail("argument must be a string or an array");
      }
      rec.snapshots.push_back(std::move(s));
    }
    if (cr.has("printed"))
      for (const auto& l : cr.array("printed")) {
        if (!l.is_string()) cr.fail("printed lines must be strings");
        rec.other_lines.push_back(l.get<std::string>());
      }
    out.cases.push_back(std::move(rec));
  }
  return out;
}

ordered_json error_type_json(const std::optional<ErrorType>& t) {
  return t ? ordered_json(std::string(to_string(*t))) : ordered_json(nullptr);
}

}  // namespace

namespace json_io {

ordered_json to_json(const ExecutionResult& r) {
  ordered_json j;
  j["phase"] = std::string(to_string(r.phase));
  j["status"] = std::string(to_string(r.status));
  j["exit_code"] = r.exit_code ? ordered_json(*r.exit_code) : ordered_json(nullptr);
  j["signal"] = r.signal ? ordered_json(*r.signal) : ordered_json(nullptr);
  j["duration"] = std::round(r.duration * 1000.0) / 1000.0;
  j["error_type"] = error_type_json(r.error_type);
  j["output_truncated"] = r.output_truncated;
  j["stdout"] = r.stdout_text;
  j["stderr"] = r.stderr_text;
  return j;
}

ExecutionResult execution_from_json(const ordered_json& doc, std::size_t line) {
  Reader r(doc, line, "execution result");
  ExecutionResult e;
  auto phase = parse_phase(r.str("phase"));
  auto status = parse_exec_status(r.str("status"));
  if (!phase || !status) r.fail("bad phase or status");
  e.phase = *phase;
  e.status = *status;
  if (auto v = r.opt_integer("exit_code")) e.exit_code = static_cast<int>(*v);
  if (auto v = r.opt_integer("signal")) e.signal = static_cast<int>(*v);
  e.duration = r.has("duration") ? r.number("duration") : 0.0;
  e.error_type = r.error_type("error_type");
  e.output_truncated = r.has("output_truncated") && r.boolean("output_truncated");
  e.stdout_text = r.opt_str("stdout").value_or("");
  e.stderr_text = r.opt_str("stderr").value_or("");
  return e;
}

ordered_json to_json(const HarnessOutcome& o) {
  ordered_json j;
  j["compile"] = to_json(o.compile);
  j["run"] = o.run ? to_json(*o.run) : ordered_json(nullptr);
  return j;
}

HarnessOutcome outcome_from_json(const ordered_json& doc, std::size_t line) {
  Reader r(doc, line, "harness outcome");
  HarnessOutcome o;
  o.compile = execution_from_json(r.at("compile"), line);
  if (r.has("run")) o.run = execution_from_json(r.at("run"), line);
  return o;
}

ordered_json outcomes_to_json(const std::map<std::string, HarnessOutcome>& outcomes) {
  ordered_json j = ordered_json::object();
  for (const auto& [digest, o] : outcomes) j[digest] = to_json(o);
  return j;
}

std::map<std::string, HarnessOutcome> outcomes_from_json(const ordered_json& doc) {
  if (!doc.is_object()) throw ParseError("transcripts must be a JSON object keyed by digest");
  std::map<std::string, HarnessOutcome> out;
  for (const auto& [digest, o] : doc.items()) out[digest] = outcome_from_json(o);
  return out;
}

}  // namespace json_io

std::string unit_to_json(const FunctionUnit& unit) { return unit_json(unit).dump(); }

FunctionUnit unit_from_json(std::string_view text, std::size_t line) {
  return unit_from(json_io::parse(text, line), line);
}

std::string suite_to_json(const TestSuite& suite) { return suite_json(suite).dump(); }

TestSuite suite_from_json(std::string_view text, std::size_t line) {
  return suite_from(json_io::parse(text, line), line);
}

std::string candidate_to_json(const TranslationCandidate& c) {
  ordered_json j;
  j["function_id"] = c.function_id;
  j["index"] = c.index;
  j["direction"] = std::string(to_string(c.direction));
  j["source"] = opt(c.source);
  j["wrapper"] = opt(c.wrapper);
  if (!c.error.empty()) j["error"] = c.error;
  return j.dump();
}

TranslationCandidate candidate_from_json(std::string_view text, std::size_t line) {
  auto doc = json_io::parse(text, line);
  Reader r(doc, line, "translation candidate");
  TranslationCandidate c;
  c.function_id = r.str("function_id");
  c.index = static_cast<int>(r.integer("index"));
  c.direction = r.direction("direction");
  c.source = r.opt_str("source");
  c.wrapper = r.opt_str("wrapper");
  c.error = r.opt_str("error").value_or("");
  return c;
}

std::string rejection_to_json(const Rejection& rej) {
  ordered_json j;
  j["function_id"] = rej.function_id;
  j["candidate_index"] = rej.candidate_index;
  j["direction"] = std::string(to_string(rej.direction));
  j["iteration"] = rej.iteration;
  j["stage"] = std::string(to_string(rej.stage));
  j["error_type"] = error_type_json(rej.error_type);
  j["detail"] = rej.detail;
  return j.dump();
}

Rejection rejection_from_json(std::string_view text, std::size_t line) {
  auto doc = json_io::parse(text, line);
  Reader r(doc, line, "rejection");
  Rejection rej;
  rej.function_id = r.str("function_id");
  rej.candidate_index = static_cast<int>(r.integer("candidate_index"));
  rej.direction = r.direction("direction");
  rej.iteration = static_cast<int>(r.integer("iteration"));
  auto stage = parse_stage(r.str("stage"));
  if (!stage) r.fail("bad stage");
  rej.stage = *stage;
  rej.error_type = r.error_type("error_type");
  rej.detail = r.opt_str("detail").value_or("");
  return rej;
}

std::string triplet_to_json(const VerifiedTriplet& t) {
  ordered_json j;
  j["id"] = t.id();
  j["direction"] = std::string(to_string(t.direction));
  j["iteration"] = t.iteration;
  j["candidate_index"] = t.candidate_index;
  j["x"] = unit_json(t.x);
  j["y"] = t.y;
  j["y_wrapper"] = opt(t.y_wrapper);
  j["suite"] = suite_json(t.suite);
  j["x_transcript"] = canonical_json(t.x_transcript);
  j["y_transcript"] = canonical_json(t.y_transcript);
  return j.dump();
}

VerifiedTriplet triplet_from_json(std::string_view text, std::size_t line) {
  auto doc = json_io::parse(text, line);
  Reader r(doc, line, "verified triplet");
  VerifiedTriplet t;
  t.direction = r.direction("direction");
  t.iteration = static_cast<int>(r.integer("iteration"));
  t.candidate_index = static_cast<int>(r.integer("candidate_index"));
  t.x = unit_from(r.at("x"), line);
  t.y = r.str("y");
  t.y_wrapper = r.opt_str("y_wrapper");
  t.suite = suite_from(r.at("suite"), line);
  t.x_transcript = canonical_from(r.at("x_transcript"), line);
  t.y_transcript = canonical_from(r.at("y_transcript"), line);
  return t;
}

std::string outcome_to_json(const HarnessOutcome& outcome) { return json_io::to_json(outcome).dump(); }

HarnessOutcome outcome_from_json(std::string_view text, std::size_t line) {
  return json_io::outcome_from_json(json_io::parse(text, line), line);
}

std::string metrics_to_json(const MetricsReport& m) {
  ordered_json j;
  j["problems"] = m.problems;
  j["samples_per_problem"] = m.samples_per_problem;
  j["bleu"] = m.bleu;
  if (m.codebleu_ngram) j["codebleu_ngram"] = *m.codebleu_ngram;
  j["cpass"] = m.cpass;
  auto& pass = j["pass_at"] = ordered_json::object();
  for (const auto& [k, v] : m.pass_at) pass[std::to_string(k)] = v;
  j["vt"] = m.vt ? ordered_json(*m.vt) : ordered_json(nullptr);
  auto& hist = j["error_histogram"] = ordered_json::object();
  for (const auto& [type, count] : m.error_histogram) hist[std::string(to_string(type))] = count;
  auto& corr = j["pearson"] = ordered_json::object();
  for (const auto& [k, v] : m.pearson) corr[k] = v;
  j["notes"] = {{"bleu_smoothing", m.bleu_smoothing}, {"extraction_failures", m.extraction_failures}};
  return j.dump(2);
}

}  // namespace coverify
