#include <sstream>
#include <stdexcept>

#include "coverify/errors.hpp"
#include "coverify/pipeline.hpp"
#include "json_io.hpp"

namespace coverify {

using json_io::ordered_json;

long IterationReport::accepted_total() const {
  long n = 0;
  for (const auto& [d, c] : per_direction) n += c.accepted;
  return n;
}

std::string report_to_json(const IterationReport& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  auto& per = j["per_direction"] = ordered_json::object();
  for (const auto& [d, c] : r.per_direction)
    per[std::string(to_string(d))] = {
        {"functions", c.functions}, {"attempted", c.attempted}, {"accepted", c.accepted}, {"rejected", c.rejected}};
  auto& lang = j["accepted_by_language"] = ordered_json::object();
  for (auto l : {Language::C, Language::CUDA}) {
    auto it = r.accepted_by_language.find(l);
    lang[std::string(display_name(l))] = it == r.accepted_by_language.end() ? 0 : it->second;
  }
  auto& stages = j["rejections_by_stage"] = ordered_json::object();
  for (const auto& [s, n] : r.rejections_by_stage) stages[std::string(to_string(s))] = n;
  auto& hist = j["error_histogram"] = ordered_json::object();
  for (const auto& [t, n] : r.error_histogram) hist[std::string(to_string(t))] = n;
  j["vt"] = r.vt ? ordered_json(*r.vt) : ordered_json(nullptr);
  j["translate_examples"] = r.translate_examples;
  j["tester_examples"] = r.tester_examples;
  j["elapsed"] = r.elapsed;
  j["files"] = r.files;
  j["translator_model"] = r.translator_model;
  j["tester_model"] = r.tester_model;
  j["converged"] = r.converged;
  return j.dump(2);
}

IterationReport report_from_json(std::string_view text) {
  auto j = json_io::parse(text);
  IterationReport r;
  try {
    r.iteration = j.at("iteration").get<int>();
    for (const auto& [k, v] : j.at("per_direction").items()) {
      auto d = parse_direction(k);
      if (!d) throw ParseError("report: bad direction '" + k + "'");
      r.per_direction[*d] = {v.at("functions").get<long>(), v.at("attempted").get<long>(),
                             v.at("accepted").get<long>(), v.at("rejected").get<long>()};
    }
    for (const auto& [k, v] : j.at("accepted_by_language").items())
      if (auto l = parse_language(k)) r.accepted_by_language[*l] = v.get<long>();
    for (const auto& [k, v] : j.at("rejections_by_stage").items())
      if (auto s = parse_stage(k)) r.rejections_by_stage[*s] = v.get<long>();
    for (const auto& [k, v] : j.at("error_histogram").items())
      if (auto t = parse_error_type(k)) r.error_histogram[*t] = v.get<long>();
    if (!j.at("vt").is_null()) r.vt = j.at("vt").get<double>();
    r.translate_examples = j.value("translate_examples", 0L);
    r.tester_examples = j.value("tester_examples", 0L);
    r.elapsed = j.value("elapsed", 0.0);
    if (j.contains("files")) r.files = j.at("files").get<std::map<std::string, std::string>>();
    r.translator_model = j.value("translator_model", "");
    r.tester_model = j.value("tester_model", "");
    r.converged = j.value("converged", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return r;
}

bool converged(const std::vector<IterationReport>& history, const ConvergenceConfig& config) {
  if (history.empty()) throw std::invalid_argument("convergence check on an empty history");
  const auto& last = history.back();
  if (last.iteration >= config.max_iterations) return true;
  if (history.size() < 2) return false;
  double prev = static_cast<double>(history[history.size() - 2].accepted_total());
  double cur = static_cast<double>(last.accepted_total());
  if (prev <= 0.0) return cur <= 0.0;
  return (cur - prev) / prev < config.min_growth;
}

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string pct(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(2);
  ss << v * 100.0;
  return ss.str();
}

}  // namespace

std::string render_html(const std::vector<IterationReport>& history) {
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>coverify report</title>\n"
    << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin-bottom:1.5em}"
    << "td,th{border:1px solid #bbb;padding:4px 10px;text-align:right}th{background:#eee}"
    << "td:first-child,th:first-child{text-align:left}</style></head><body>\n";
  h << "<h1>Co-verification report</h1>\n";

  h << "<h2>Accepted triplets per iteration</h2>\n<table><tr><th>iteration</th><th>C</th><th>CUDA</th>"
    << "<th>attempted</th><th>rejected</th><th>VT (%)</th><th>translate ex.</th><th>tester ex.</th>"
    << "<th>converged</th></tr>\n";
  for (const auto& r : history) {
    long attempted = 0, rejected = 0;
    for (const auto& [d, c] : r.per_direction) {
      attempted += c.attempted;
      rejected += c.rejected;
    }
    auto lang = [&](Language l) {
      auto it = r.accepted_by_language.find(l);
      return it == r.accepted_by_language.end() ? 0L : it->second;
    };
    h << "<tr><td>" << r.iteration << "</td><td>" << lang(Language::C) << "</td><td>" << lang(Language::CUDA)
      << "</td><td>" << attempted << "</td><td>" << rejected << "</td><td>" << (r.vt ? pct(*r.vt) : "-")
      << "</td><td>" << r.translate_examples << "</td><td>" << r.tester_examples << "</td><td>"
      << (r.converged ? "yes" : "no") << "</td></tr>\n";
  }
  h << "</table>\n";

  if (!history.empty()) {
    const auto& r = history.back();
    h << "<h2>Iteration " << r.iteration << "</h2>\n";
    h << "<p>translator: <code>" << escape(r.translator_model) << "</code>, tester: <code>"
      << escape(r.tester_model) << "</code></p>\n";
    h << "<table><tr><th>direction</th><th>functions</th><th>attempted</th><th>accepted</th><th>rejected</th></tr>\n";
    for (const auto& [d, c] : r.per_direction)
      h << "<tr><td>" << to_string(d) << "</td><td>" << c.functions << "</td><td>" << c.attempted << "</td><td>"
        << c.accepted << "</td><td>" << c.rejected << "</td></tr>\n";
    h << "</table>\n<table><tr><th>rejection stage</th><th>count</th></tr>\n";
    for (const auto& [s, n] : r.rejections_by_stage) h << "<tr><td>" << to_string(s) << "</td><td>" << n << "</td></tr>\n";
    h << "</table>\n<table><tr><th>error type</th><th>count</th></tr>\n";
    for (const auto& [t, n] : r.error_histogram) h << "<tr><td>" << to_string(t) << "</td><td>" << n << "</td></tr>\n";
    h << "</table>\n";
  }
  h << "</body></html>\n";
  return h.str();
}

}  // namespace coverify
