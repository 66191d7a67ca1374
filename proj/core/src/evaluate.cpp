#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <regex>

#include "coverify/errors.hpp"
#include "coverify/pipeline.hpp"
#include "json_io.hpp"

namespace coverify {

namespace {

int count_markers(const std::string& text) {
  static const std::regex marker(R"(//[ \t]*Input[ \t]+case[ \t]+\d+[ \t]*:)", std::regex::icase);
  return static_cast<int>(std::distance(std::sregex_iterator(text.begin(), text.end(), marker), std::sregex_iterator()));
}

struct SampleMetrics {
  double bleu = 0.0;
  double ngram = 0.0;
  double compiled = 0.0;
  double passed = 0.0;
};

struct ProblemResult {
  SampleOutcome outcome;
  std::vector<SampleMetrics> samples;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> bleu_pairs;
  std::vector<Rejection> rejections;
  std::optional<std::pair<int, bool>> tester_validity;
};

}  // namespace

std::vector<EvalProblem> load_test_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read test set " + path.string());
  std::vector<EvalProblem> problems;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json_io::parse(line, lineno);
    try {
      EvalProblem p;
      p.id = j.at("id").get<std::string>();
      auto dir = parse_direction(j.at("direction").get<std::string>());
      if (!dir) throw ParseError("test set: bad direction", lineno);
      p.direction = *dir;
      std::optional<std::string> wrapper;
      if (j.contains("source_wrapper") && !j["source_wrapper"].is_null())
        wrapper = j["source_wrapper"].get<std::string>();
      p.source = make_unit(j.at("source").get<std::string>(), source_language(p.direction), wrapper, "test_set", p.id);
      p.reference = j.at("reference").get<std::string>();
      const auto& tests = j.at("tests");
      if (tests.is_string()) {
        auto raw = tests.get<std::string>();
        std::vector<std::string> callees{p.source.name};
        if (p.source.wrapper_source) callees.push_back(parse_wrapper_signature(*p.source.wrapper_source).name);
        p.suite = split_test_cases(raw, p.id, std::max(1, count_markers(raw)), callees);
      } else {
        p.suite.function_id = p.id;
        int k = 0;
        for (const auto& s : tests) p.suite.cases.push_back({++k, s.get<std::string>()});
        if (p.suite.cases.empty()) throw ParseError("test set: problem has no tests", lineno);
      }
      problems.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("test set: ") + e.what(), lineno);
    } catch (const ExtractionError& e) {
      throw ParseError(std::string("test set: ") + e.what(), lineno);
    } catch (const ParseError& e) {
      if (e.line()) throw;
      throw ParseError(e.what(), lineno);
    }
  }
  return problems;
}

EvaluationResult evaluate(Pipeline& pipeline, const std::vector<EvalProblem>& input,
                          const std::vector<int>& k_values, int n_samples, bool tester_vt) {
  if (k_values.empty()) throw ConfigError("evaluate: no k values given");
  int k_max = *std::max_element(k_values.begin(), k_values.end());
  if (*std::min_element(k_values.begin(), k_values.end()) < 1) throw ConfigError("evaluate: k must be >= 1");
  if (n_samples < k_max)
    throw ConfigError("evaluate: pass@" + std::to_string(k_max) + " needs at least " + std::to_string(k_max) +
                      " samples per problem, got n=" + std::to_string(n_samples));
  if (input.empty()) throw ConfigError("evaluate: test set is empty");

  std::vector<EvalProblem> problems = input;
  std::vector<FunctionUnit> sources;
  for (const auto& p : problems) sources.push_back(p.source);
  pipeline.generate_wrappers(sources);
  for (std::size_t i = 0; i < problems.size(); ++i) problems[i].source = sources[i];

  auto ctx = pipeline.verify_context();
  auto job = [&](const EvalProblem& p) {
    ProblemResult r;
    r.outcome.problem_id = p.id;
    r.outcome.n = n_samples;
    auto candidates = pipeline.translate(p.source, p.direction, n_samples);
    auto source = run_source(p.source, p.suite, p.direction, ctx);
    if (source.failure)
      spdlog::warn("{}: reference suite fails on the source program ({}: {})", p.id, to_string(source.failure->stage),
                   source.failure->detail);
    auto ref_tokens = code_tokenize(p.reference);
    for (const auto& y : candidates) {
      auto result = verify_candidate(p.source, source, y, p.suite, ctx);
      SampleMetrics m;
      if (std::holds_alternative<VerifiedTriplet>(result)) {
        m.compiled = m.passed = 1.0;
      } else {
        const auto& rej = std::get<Rejection>(result);
        m.compiled = rej.stage == Stage::YRun || rej.stage == Stage::Mismatch ? 1.0 : 0.0;
        r.rejections.push_back(rej);
      }
      auto cand_tokens = y.source ? code_tokenize(*y.source) : std::vector<std::string>{};
      if (!ref_tokens.empty()) {
        m.bleu = bleu(cand_tokens, ref_tokens);
        m.ngram = weighted_ngram_bleu(cand_tokens, ref_tokens);
        r.bleu_pairs.emplace_back(cand_tokens, ref_tokens);
      }
      r.outcome.c += static_cast<int>(m.passed);
      r.outcome.compile_ok += static_cast<int>(m.compiled);
      r.samples.push_back(m);
    }
    if (tester_vt) {
      auto suite = pipeline.generate_tests(p.source);
      if (!suite) {
        r.tester_validity = std::make_pair(0, false);
      } else {
        auto run = run_source(p.source, *suite, p.direction, ctx);
        r.tester_validity = std::make_pair(run.n_cases, run.all_valid());
      }
    }
    return r;
  };

  std::vector<std::future<ProblemResult>> futures;
  for (const auto& p : problems) futures.push_back(pipeline.pool().submit([&job, &p] { return job(p); }));

  EvaluationResult out;
  std::vector<SampleMetrics> all;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
  std::vector<std::pair<int, bool>> validity;
  for (auto& f : futures) {
    auto r = f.get();
    out.outcomes.push_back(r.outcome);
    all.insert(all.end(), r.samples.begin(), r.samples.end());
    pairs.insert(pairs.end(), r.bleu_pairs.begin(), r.bleu_pairs.end());
    out.rejections.insert(out.rejections.end(), r.rejections.begin(), r.rejections.end());
    if (r.tester_validity) validity.push_back(*r.tester_validity);
  }

  auto& m = out.metrics;
  m.problems = static_cast<int>(problems.size());
  m.samples_per_problem = n_samples;
  m.cpass = cpass(out.outcomes);
  for (int k : k_values) m.pass_at[k] = aggregate_pass_at_k(out.outcomes, k);
  if (!pairs.empty()) m.bleu = corpus_bleu(pairs);
  double ngram = 0.0;
  for (const auto& s : all) ngram += s.ngram;
  m.codebleu_ngram = all.empty() ? 0.0 : ngram / static_cast<double>(all.size());
  m.error_histogram = error_histogram(out.rejections);
  if (!validity.empty()) m.vt = vt_metric(validity);

  std::map<std::string, std::vector<double>> series;
  for (const auto& s : all) {
    series["bleu"].push_back(s.bleu);
    series["codebleu_ngram"].push_back(s.ngram);
    series["cpass"].push_back(s.compiled);
    series["pass"].push_back(s.passed);
  }
  for (auto a = series.begin(); a != series.end(); ++a)
    for (auto b = std::next(a); b != series.end(); ++b) {
      try {
        m.pearson[a->first + "~" + b->first] = pearson(a->second, b->second);
      } catch (const std::invalid_argument&) {
      }
    }
  return out;
}

}  // namespace coverify
