#include <gtest/gtest.h>

#include "coverify/config.hpp"
#include "coverify/corpus.hpp"
#include "coverify/errors.hpp"
#include "coverify/pipeline.hpp"
#include "coverify/serialize.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace coverify;
using coverify::testing::TempDir;

TEST(Config, DefaultsFromEmptyDocument) {
  auto cfg = parse_config("", "/base");
  EXPECT_EQ(cfg.iteration, 1);
  EXPECT_EQ(cfg.n_tests, 5);
  EXPECT_EQ(cfg.directions.size(), 2u);
  EXPECT_EQ(cfg.cuda_backend, Backend::CudaShim);
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/base/out"));
  EXPECT_TRUE(cfg.compile_specs.count(Backend::NativeC));
  EXPECT_DOUBLE_EQ(cfg.convergence.min_growth, 0.05);
  EXPECT_EQ(cfg.convergence.max_iterations, 4);
  EXPECT_EQ(cfg.limits.run_timeout, 60.0);
}

TEST(Config, ReadsNestedSectionsAndResolvesPaths) {
  auto cfg = parse_config(R"(
output_dir: results
corpus: data/corpus.jsonl
iteration: 2
directions: [CUDA_to_C]
n_translation_samples: 3
seed: 42
endpoints:
  translator: {model: t1, base_url: "http://localhost:8000/v1", temperature: 0.2, top_k: 40, prompt_mode: one_shot}
  tester: {model: t2}
backends:
  cuda: {backend: nvcc, compiler: /opt/cuda/bin/nvcc}
tolerance: {abs: 1e-5, rel: 1e-3}
timeouts: {compile: 30, run: 5}
convergence: {min_growth: 0.1, max_iterations: 6}
evaluate: {test_set: ts.jsonl, k: [1, 5], n_samples: 10}
)", "/cfg");
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/cfg/results"));
  EXPECT_EQ(cfg.corpus, std::filesystem::path("/cfg/data/corpus.jsonl"));
  EXPECT_EQ(cfg.iteration, 2);
  EXPECT_EQ(cfg.directions, std::vector<Direction>{Direction::CUDA_to_C});
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.translator.model_name, "t1");
  EXPECT_EQ(cfg.translator.top_k, 40);
  EXPECT_EQ(cfg.translator.prompt_mode, PromptMode::OneShot);
  EXPECT_EQ(cfg.wrapper_endpoint().model_name, "t2");
  EXPECT_EQ(cfg.cuda_backend, Backend::Nvcc);
  EXPECT_EQ(cfg.compile_specs.at(Backend::Nvcc).compiler_path, "/opt/cuda/bin/nvcc");
  EXPECT_EQ(cfg.compile_specs.at(Backend::Nvcc).compile_timeout, 30.0);
  EXPECT_EQ(cfg.limits.run_timeout, 5.0);
  EXPECT_DOUBLE_EQ(cfg.tolerance.abs, 1e-5);
  EXPECT_EQ(cfg.evaluate.k_values, (std::vector<int>{1, 5}));
  EXPECT_EQ(cfg.evaluate.test_set, std::filesystem::path("/cfg/ts.jsonl"));
  EXPECT_EQ(cfg.iteration_dir(2), std::filesystem::path("/cfg/results/iter_2"));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("bogus_key: 1"), ConfigError);
  EXPECT_THROW(parse_config("endpoints: {translator: {model: x, colour: red}}"), ConfigError);
  EXPECT_THROW(parse_config("n_tests: 0"), ConfigError);
  EXPECT_THROW(parse_config("n_tests: many"), ConfigError);
  EXPECT_THROW(parse_config("directions: [C_to_Fortran]"), ConfigError);
  EXPECT_THROW(parse_config("convergence: {min_growth: 1.0}"), ConfigError);
  EXPECT_THROW(parse_config("backends: {cuda: {backend: native_c}}"), ConfigError);
  EXPECT_THROW(parse_config("endpoints: {translator: {model: x, top_p: 2}}"), ConfigError);
  EXPECT_THROW(parse_config("evaluate: {k: [0]}"), ConfigError);
  EXPECT_THROW(parse_config("[unterminated"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/coverify.yaml"), ConfigError);
}

TEST(Config, LoadsToyFixture) {
  auto dir = coverify::testing::fixture_dir() / "toy";
  auto cfg = load_config(dir / "config.yaml");
  EXPECT_EQ(cfg.corpus, dir / "corpus.jsonl");
  EXPECT_EQ(cfg.mock.responses, dir / "mock.json");
  EXPECT_EQ(cfg.mock.transcripts, dir / "transcripts.json");
  EXPECT_EQ(cfg.workers, 4);
}

namespace {

VerifiedTriplet sample_triplet() {
  VerifiedTriplet t;
  t.x = make_unit("void f(int *a) { a[0] = 1; }", Language::C, std::nullopt, "p", "fx");
  t.y = "__global__ void f_k(int *a) { a[0] = 1; }";
  t.y_wrapper = "void f_run(int *a) { f_k<<<1, 1>>>(a); }";
  t.suite = {"fx", {{1, "int a[1];\nwrapper(f, a);"}}};
  t.x_transcript = parse_output("=== CASE 1 ===\nReturn value: void Arguments after function call: ([ 1 ])\n=== END 1 ===\n");
  t.y_transcript = t.x_transcript;
  t.direction = Direction::C_to_CUDA;
  t.iteration = 3;
  t.candidate_index = 2;
  return t;
}

}  // namespace

TEST(Serialize, RoundTrips) {
  auto t = sample_triplet();
  EXPECT_EQ(unit_from_json(unit_to_json(t.x)), t.x);
  EXPECT_EQ(suite_from_json(suite_to_json(t.suite)), t.suite);
  EXPECT_EQ(triplet_from_json(triplet_to_json(t)), t);
  EXPECT_EQ(t.id(), "fx#2");

  TranslationCandidate c{"fx", 4, Direction::CUDA_to_C, std::nullopt, std::nullopt, "no [C] block"};
  EXPECT_EQ(candidate_from_json(candidate_to_json(c)), c);
  Rejection r{"fx", 1, Direction::C_to_CUDA, 2, Stage::YCompile, "'T' does not name a type", ErrorType::Type5};
  EXPECT_EQ(rejection_from_json(rejection_to_json(r)), r);
  r.error_type.reset();
  EXPECT_EQ(rejection_from_json(rejection_to_json(r)), r);

  HarnessOutcome o;
  o.compile.status = ExecStatus::Ok;
  o.compile.duration = 0.25;
  ExecutionResult run;
  run.phase = Phase::Run;
  run.status = ExecStatus::RuntimeError;
  run.signal = 11;
  run.stdout_text = "=== CASE 1 ===\n";
  o.run = run;
  auto back = outcome_from_json(outcome_to_json(o));
  EXPECT_EQ(back.run->signal, 11);
  EXPECT_EQ(back.run->stdout_text, run.stdout_text);
  EXPECT_EQ(back.compile.duration, 0.25);

  TrainingExample ex{Task::Translate, "prompt", "target", Direction::CUDA_to_C, 1, "fx#0"};
  EXPECT_EQ(training_from_json(training_to_json(ex)), ex);
  auto j = nlohmann::json::parse(training_to_json(ex));
  for (const char* key : {"task", "prompt", "target", "direction", "iteration", "origin"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Serialize, EncodingsAreSingleLine) {
  auto t = sample_triplet();
  EXPECT_EQ(triplet_to_json(t).find('\n'), std::string::npos);
  EXPECT_EQ(unit_to_json(t.x).find('\n'), std::string::npos);
}

TEST(Serialize, DecodeErrorsCarryLine) {
  try {
    rejection_from_json("{\"function_id\": 3}", 7);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
  EXPECT_THROW(unit_from_json("not json", 1), ParseError);
}

TEST(Serialize, JsonlHelpers) {
  TempDir dir;
  std::vector<Rejection> rs{{"a", 0, Direction::C_to_CUDA, 1, Stage::Mismatch, "d", std::nullopt},
                            {"b", -1, Direction::CUDA_to_C, 1, Stage::Extraction, "e", std::nullopt}};
  write_jsonl(dir / "sub/r.jsonl", rs, rejection_to_json);
  EXPECT_EQ(read_jsonl(dir / "sub/r.jsonl", rejection_from_json), rs);
  EXPECT_THROW(read_jsonl(dir / "none.jsonl", rejection_from_json), IoError);
}

TEST(Serialize, MetricsReportFields) {
  MetricsReport m;
  m.pass_at = {{1, 0.5}, {5, 0.75}};
  m.codebleu_ngram = 0.4;
  auto j = nlohmann::json::parse(metrics_to_json(m));
  EXPECT_EQ(j["notes"]["bleu_smoothing"], "add-one on zero-count orders >= 2");
  EXPECT_TRUE(j.contains("cpass"));
  EXPECT_TRUE(j.contains("codebleu_ngram"));
  EXPECT_TRUE(j.contains("error_histogram"));
  EXPECT_EQ(j["error_histogram"].size(), static_cast<std::size_t>(kErrorTypeCount));
}

TEST(Report, JsonRoundTripAndConvergence) {
  IterationReport r;
  r.iteration = 2;
  r.per_direction[Direction::C_to_CUDA] = {10, 12, 8, 4};
  r.accepted_by_language[Language::C] = 8;
  r.rejections_by_stage[Stage::Mismatch] = 4;
  r.error_histogram[ErrorType::Type5] = 2;
  r.vt = 0.75;
  r.translator_model = "t";
  auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.per_direction, r.per_direction);
  EXPECT_EQ(back.vt, r.vt);
  EXPECT_EQ(back.error_histogram, r.error_histogram);
  EXPECT_EQ(back.accepted_total(), 8);

  ConvergenceConfig cc;
  auto with = [](int it, long accepted) {
    IterationReport x;
    x.iteration = it;
    x.per_direction[Direction::C_to_CUDA].accepted = accepted;
    return x;
  };
  EXPECT_TRUE(converged({with(1, 100), with(2, 102)}, cc));
  EXPECT_FALSE(converged({with(1, 100), with(2, 150)}, cc));
  EXPECT_FALSE(converged({with(1, 100)}, cc));
  EXPECT_TRUE(converged({with(3, 100), with(4, 200)}, cc));
  EXPECT_THROW(converged({}, cc), std::invalid_argument);

  auto html = render_html({with(1, 3), r});
  EXPECT_NE(html.find("<table>"), std::string::npos);
  EXPECT_NE(html.find("C_to_CUDA"), std::string::npos);
}
