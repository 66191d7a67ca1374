#include <gtest/gtest.h>

#include <functional>

#include "coverify/corpus.hpp"
#include "coverify/errors.hpp"
#include "coverify/verify.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace coverify;

namespace {

std::string framed(const std::vector<std::string>& records) {
  std::string out;
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto i = std::to_string(k + 1);
    out += "=== CASE " + i + " ===\n" + records[k] + "\n=== END " + i + " ===\n";
  }
  return out;
}

class FakeRunner final : public HarnessRunner {
 public:
  using Fn = std::function<HarnessOutcome(const HarnessUnit&)>;
  explicit FakeRunner(Fn fn) : fn_(std::move(fn)) {}
  HarnessOutcome execute(const HarnessUnit& unit) override {
    ++calls;
    return fn_(unit);
  }
  std::string describe() const override { return "fake"; }
  std::atomic<int> calls{0};

 private:
  Fn fn_;
};

HarnessOutcome ran(std::string stdout_text, ExecStatus status = ExecStatus::Ok) {
  HarnessOutcome o;
  o.compile.status = ExecStatus::Ok;
  ExecutionResult r;
  r.phase = Phase::Run;
  r.status = status;
  r.stdout_text = std::move(stdout_text);
  r.exit_code = status == ExecStatus::Ok ? 0 : 1;
  o.run = r;
  return o;
}

HarnessOutcome compile_error(std::string diag, ErrorType t) {
  HarnessOutcome o;
  o.compile.status = ExecStatus::CompileError;
  o.compile.stderr_text = std::move(diag);
  o.compile.error_type = t;
  o.compile.exit_code = 1;
  return o;
}

std::string records(int n, const std::string& value = "1") {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("Return value: void Arguments after function call: ([ " + value + " ], 1)");
  return framed(v);
}

TestSuite five_cases(const std::string& id) {
  TestSuite s;
  s.function_id = id;
  for (int k = 1; k <= 5; ++k) s.cases.push_back({k, "float v" + std::to_string(k) + "[] = {1};\nwrapper(f, v" + std::to_string(k) + ", 1);"});
  return s;
}

const char* kC = "void f(float *v, int n) { for (int i = 0; i < n; i++) v[i] += 1; }";
const char* kCuda = "__global__ void f_k(float *v, int n) { int i = threadIdx.x; if (i < n) v[i] += 1; }";
const char* kWrap = "void f_run(float *v, int n) { f_k<<<1, n>>>(v, n); }";

TranslationCandidate cuda_candidate(const std::string& id, int index = 0) {
  return {id, index, Direction::C_to_CUDA, std::string(kCuda), std::string(kWrap), ""};
}

}  // namespace

TEST(ParseOutput, DelimitedCasesAndOtherLines) {
  auto out = parse_output(
      "=== CASE 1 ===\nhello from f\nReturn value: 3 Arguments after function call: (1, [ 1, 2 ])\n=== END 1 ===\n"
      "=== CASE 2 ===\nReturn value: void Arguments after function call: ()\n=== END 2 ===\n");
  EXPECT_TRUE(out.complete);
  ASSERT_EQ(out.cases.size(), 2u);
  EXPECT_EQ(out.cases[0].return_token, "3");
  EXPECT_EQ(out.cases[0].other_lines, std::vector<std::string>{"hello from f"});
  ASSERT_EQ(out.cases[0].snapshots.size(), 2u);
  EXPECT_FALSE(out.cases[0].snapshots[0].is_array);
  EXPECT_EQ(out.cases[0].snapshots[1].tokens, (std::vector<std::string>{"1", "2"}));
  EXPECT_TRUE(out.cases[1].snapshots.empty());
  EXPECT_EQ(out.cases[1].return_token, "void");
}

TEST(ParseOutput, UnclosedCaseMarksIncomplete) {
  auto out = parse_output("=== CASE 1 ===\nReturn value: 1 Arguments after function call: (1)\n=== END 1 ===\n=== CASE 2 ===\n");
  EXPECT_FALSE(out.complete);
  EXPECT_EQ(out.cases.size(), 1u);
  EXPECT_THROW(parse_output("Segmentation fault\n"), ParseError);
  EXPECT_THROW(parse_output(""), ParseError);
}

TEST(ParseRecordLine, ShapeErrors) {
  EXPECT_NO_THROW(parse_record_line("Return value: -1.12221e+23 Arguments after function call: ([ inf ], 1)"));
  EXPECT_THROW(parse_record_line("Return value: 1"), ParseError);
  EXPECT_THROW(parse_record_line("Return value: 1 Arguments after function call: ([ 1, 2 )"), ParseError);
}

TEST(TokensEqual, ToleranceRules) {
  EXPECT_TRUE(tokens_equal("2.33333", "2.333331"));
  EXPECT_TRUE(tokens_equal("1e-7", "0"));
  EXPECT_FALSE(tokens_equal("0.5", "0"));
  EXPECT_TRUE(tokens_equal("100000", "100001", {1e-6, 1e-4}));
  EXPECT_FALSE(tokens_equal("100000", "100020", {1e-6, 1e-4}));
  EXPECT_TRUE(tokens_equal("inf", "inf"));
  EXPECT_FALSE(tokens_equal("inf", "-inf"));
  EXPECT_FALSE(tokens_equal("-1.12221e+23", "inf"));
  EXPECT_TRUE(tokens_equal("nan", "-nan"));
  EXPECT_FALSE(tokens_equal("nan", "nan", {1e-6, 1e-4, true}));
  EXPECT_TRUE(tokens_equal("void", "void"));
  EXPECT_FALSE(tokens_equal("ptr", "obj"));
}

TEST(OutputsEqual, CaseStudyTranscriptVerdicts) {
  auto cases = nlohmann::json::parse(coverify::testing::read_file(coverify::testing::fixture_dir() / "transcripts/case_studies.json"));
  ASSERT_EQ(cases.size(), 6u);
  int matched = 0;
  for (const auto& c : cases) {
    auto x = parse_output(framed({c["source"].get<std::string>()}));
    bool accept;
    if (c["target"].is_null()) {
      auto diag = c["target_compile_error"].get<std::string>();
      EXPECT_EQ(classify_error(diag, Phase::Compile), ErrorType::Type5);
      accept = false;
    } else {
      auto y = parse_output(framed({c["target"].get<std::string>()}));
      auto cmp = outputs_equal(x, y);
      accept = cmp.equal;
      EXPECT_EQ(check(x, y), accept);
      if (c.contains("difference"))
        EXPECT_NE(cmp.first_difference.find(c["difference"].get<std::string>()), std::string::npos) << cmp.first_difference;
    }
    if ((c["verdict"] == "accept") == accept) ++matched;
  }
  EXPECT_EQ(matched, 6);
}

TEST(OutputsEqual, CaseCountAndIncompleteInputs) {
  auto one = parse_output(records(1));
  auto two = parse_output(records(2));
  EXPECT_FALSE(check(one, two));
  EXPECT_FALSE(outputs_equal(one, two).equal);
  auto partial = parse_output(records(1) + "=== CASE 2 ===\n");
  EXPECT_THROW(outputs_equal(partial, partial), std::invalid_argument);
  EXPECT_FALSE(check(partial, partial));
  auto printed = parse_output(framed({"extra\nReturn value: void Arguments after function call: ([ 1 ], 1)"}));
  EXPECT_FALSE(check(one, printed));
}

TEST(VtMetric, ConjunctionSemantics) {
  EXPECT_EQ(vt_metric({{5, false}}), 0.0);
  EXPECT_EQ(vt_metric({{5, false}, {5, true}}), 0.5);
  EXPECT_EQ(vt_metric({{5, true}, {5, true}}), 1.0);
  EXPECT_THROW(vt_metric({}), std::invalid_argument);
}

TEST(VerifyCandidate, StagesFromRunnerOutcomes) {
  auto x = make_unit(kC, Language::C, std::nullopt, "", "fx");
  auto suite = five_cases("fx");
  auto make_ctx = [](HarnessRunner& r) {
    VerifyContext ctx;
    ctx.runner = &r;
    return ctx;
  };
  struct Expect {
    HarnessOutcome y;
    std::optional<Stage> stage;
    std::optional<ErrorType> type;
  };
  std::vector<Expect> table{
      {ran(records(5)), std::nullopt, std::nullopt},
      {ran(records(5, "2")), Stage::Mismatch, std::nullopt},
      {compile_error("error: 'T' does not name a type", ErrorType::Type5), Stage::YCompile, ErrorType::Type5},
      {ran(records(2) + "=== CASE 3 ===\n", ExecStatus::RuntimeError), Stage::YRun, ErrorType::Unknown},
      {ran(records(2) + "=== CASE 3 ===\n", ExecStatus::Timeout), Stage::YRun, ErrorType::Unknown},
  };
  for (const auto& t : table) {
    FakeRunner r([&](const HarnessUnit& u) { return u.backend == Backend::NativeC ? ran(records(5)) : t.y; });
    auto ctx = make_ctx(r);
    auto result = verify_triplet(x, cuda_candidate("fx"), suite, ctx);
    if (!t.stage) {
      ASSERT_TRUE(std::holds_alternative<VerifiedTriplet>(result));
      const auto& tr = std::get<VerifiedTriplet>(result);
      EXPECT_EQ(tr.id(), "fx#0");
      EXPECT_EQ(tr.x_transcript, tr.y_transcript);
      EXPECT_EQ(tr.y_wrapper, std::string(kWrap));
    } else {
      ASSERT_TRUE(std::holds_alternative<Rejection>(result));
      const auto& rej = std::get<Rejection>(result);
      EXPECT_EQ(rej.stage, *t.stage) << rej.detail;
      EXPECT_EQ(rej.error_type, t.type);
      EXPECT_FALSE(rej.detail.empty());
    }
  }
}

TEST(VerifyCandidate, SourceFailuresAndMissingTranslation) {
  auto x = make_unit(kC, Language::C, std::nullopt, "", "fx");
  auto suite = five_cases("fx");
  FakeRunner crash([](const HarnessUnit& u) {
    return u.backend == Backend::NativeC ? ran(records(4) + "=== CASE 5 ===\n", ExecStatus::RuntimeError) : ran(records(5));
  });
  VerifyContext ctx;
  ctx.runner = &crash;
  auto source = run_source(x, suite, Direction::C_to_CUDA, ctx);
  EXPECT_FALSE(source.all_valid());
  EXPECT_EQ(source.valid_cases, 4);
  EXPECT_EQ(source.n_cases, 5);
  auto r = verify_candidate(x, source, cuda_candidate("fx", 2), suite, ctx);
  ASSERT_TRUE(std::holds_alternative<Rejection>(r));
  EXPECT_EQ(std::get<Rejection>(r).stage, Stage::XRun);
  EXPECT_EQ(std::get<Rejection>(r).candidate_index, 2);

  FakeRunner fine([](const HarnessUnit&) { return ran(records(5)); });
  ctx.runner = &fine;
  TranslationCandidate empty{"fx", 1, Direction::C_to_CUDA, std::nullopt, std::nullopt, "no [CUDA] block"};
  auto e = verify_triplet(x, empty, suite, ctx);
  ASSERT_TRUE(std::holds_alternative<Rejection>(e));
  EXPECT_EQ(std::get<Rejection>(e).stage, Stage::Extraction);
  EXPECT_EQ(std::get<Rejection>(e).detail, "no [CUDA] block");
}

TEST(VerifyCandidate, AcceptanceIsReproducible) {
  auto x = make_unit(kC, Language::C, std::nullopt, "", "fx");
  auto suite = five_cases("fx");
  FakeRunner r([](const HarnessUnit&) { return ran(records(5)); });
  VerifyContext ctx;
  ctx.runner = &r;
  auto first = verify_triplet(x, cuda_candidate("fx"), suite, ctx);
  ASSERT_TRUE(std::holds_alternative<VerifiedTriplet>(first));
  const auto& t = std::get<VerifiedTriplet>(first);
  TranslationCandidate again{t.x.id, t.candidate_index, t.direction, t.y, t.y_wrapper, ""};
  auto second = verify_triplet(t.x, again, t.suite, ctx);
  ASSERT_TRUE(std::holds_alternative<VerifiedTriplet>(second));
  EXPECT_EQ(std::get<VerifiedTriplet>(second), t);
}

TEST(CoVerifyCorpus, VtIgnoresTranslatedSide) {
  auto a = make_unit(kC, Language::C, std::nullopt, "", "fa");
  auto b = make_unit("void g(float *v, int n) { for (int i = 0; i < n; i++) v[i] *= 2; }", Language::C, std::nullopt, "", "fb");
  std::vector<FunctionUnit> corpus{a, b};
  std::map<std::string, TestSuite> suites{{"fa", five_cases("fa")}, {"fb", five_cases("fb")}};
  for (auto& c : suites["fb"].cases) {
    auto p = c.snippet.find("wrapper(f");
    c.snippet.replace(p, 9, "wrapper(g");
  }
  std::map<std::string, std::vector<TranslationCandidate>> translations{
      {"fa", {cuda_candidate("fa", 0), cuda_candidate("fa", 1)}},
      {"fb", {{"fb", 0, Direction::C_to_CUDA, std::string("__global__ void g_k(float *v, int n) { v[0] *= 2; }"),
               std::string("void g_run(float *v, int n) { g_k<<<1, 1>>>(v, n); }"), ""}}}};

  std::vector<HarnessOutcome> y_sides{ran(records(5)), ran(records(5, "9")),
                                      compile_error("error: expected ';' before '}' token", ErrorType::Type4),
                                      ran("", ExecStatus::Timeout)};
  std::optional<std::vector<FunctionValidity>> reference;
  for (const auto& y : y_sides) {
    FakeRunner r([&](const HarnessUnit& u) {
      if (u.backend != Backend::NativeC) return y;
      // fa's source program dies in its fifth case; fb runs clean.
      return u.function_id == "fa" ? ran(records(4) + "=== CASE 5 ===\n", ExecStatus::RuntimeError) : ran(records(5));
    });
    VerifyContext ctx;
    ctx.runner = &r;
    WorkerPool pool(3);
    auto res = co_verify_corpus(corpus, Direction::C_to_CUDA, translations, suites, ctx, &pool);
    ASSERT_EQ(res.validity.size(), 2u);
    EXPECT_EQ(res.validity[0].valid_cases, 4);
    EXPECT_FALSE(res.validity[0].all_valid);
    EXPECT_TRUE(res.validity[1].all_valid);
    std::vector<std::pair<int, bool>> per;
    for (const auto& v : res.validity) per.emplace_back(v.n_cases, v.all_valid);
    EXPECT_EQ(vt_metric(per), 0.5);
    if (!reference) reference = res.validity;
    EXPECT_EQ(res.validity, *reference);
    EXPECT_EQ(res.triplets.size() + res.rejections.size(), 3u);
    // The source program runs once per function.
    EXPECT_EQ(r.calls.load(), 2 + 1);
  }
}

TEST(CoVerifyCorpus, MissingSuiteOrCandidatesAreExtractionRejections) {
  auto a = make_unit(kC, Language::C, std::nullopt, "", "fa");
  FakeRunner r([](const HarnessUnit&) { return ran(records(5)); });
  VerifyContext ctx;
  ctx.runner = &r;
  // Without a suite each candidate is rejected under its own index.
  auto res = co_verify_corpus({a}, Direction::C_to_CUDA, {{"fa", {cuda_candidate("fa")}}}, {}, ctx);
  ASSERT_EQ(res.rejections.size(), 1u);
  EXPECT_EQ(res.rejections[0].stage, Stage::Extraction);
  EXPECT_EQ(res.rejections[0].candidate_index, 0);
  auto none = co_verify_corpus({a}, Direction::C_to_CUDA, {}, {{"fa", five_cases("fa")}}, ctx);
  ASSERT_EQ(none.rejections.size(), 1u);
  EXPECT_EQ(none.rejections[0].stage, Stage::Extraction);
  EXPECT_EQ(none.rejections[0].candidate_index, -1);
}

TEST(ErrorHistogram, FromRejections) {
  std::vector<Rejection> rs(3);
  rs[0].error_type = ErrorType::Type5;
  rs[1].error_type = ErrorType::Type5;
  auto h = error_histogram(rs);
  EXPECT_EQ(h.at(ErrorType::Type5), 2);
  EXPECT_EQ(h.at(ErrorType::Unknown), 1);
}
