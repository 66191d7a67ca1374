#include <gtest/gtest.h>

#include <cmath>

#include "coverify/errors.hpp"
#include "coverify/pipeline.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace coverify;
using namespace coverify::testing;

namespace {

const char* kSource = "void add_100(int numElements, int *data) {\n    for (int idx = 0; idx < numElements; idx++) {\n        data[idx] += 100;\n    }\n}\n";
const char* kReference =
    "__global__ void add_100(int numElements, int *data) {\n    int idx = blockIdx.x * blockDim.x + threadIdx.x;\n"
    "    if (idx < numElements) {\n        data[idx] += 100;\n    }\n}";
const char* kWrong =
    "__global__ void add_100(int numElements, int *data) {\n    int idx = blockIdx.x * blockDim.x + threadIdx.x;\n"
    "    if (idx < numElements) {\n        data[idx] += 99;\n    }\n}";
const char* kBroken = "__global__ void add_100(int numElements, int *data) {\n    data[0] += 100 +;\n}";
const char* kWrapper =
    "void add_100_invoke(int numElements, int *data) {\n  int *d;\n  cudaMalloc((void**)&d, numElements * sizeof(int));\n"
    "  cudaMemcpy(d, data, numElements * sizeof(int), cudaMemcpyHostToDevice);\n  add_100<<<numElements, 1>>>(numElements, d);\n"
    "  cudaMemcpy(data, d, numElements * sizeof(int), cudaMemcpyDeviceToHost);\n  cudaFree(d);\n}";
const char* kTests =
    "//Input case 1:\nint data1[] = {0};\nadd_100(1, data1);\n\n//Input case 2:\nint data2[] = {-100};\nadd_100(1, data2);\n\n"
    "//Input case 3:\nint data3[] = {1, 2, 3};\nadd_100(3, data3);\n\n//Input case 4:\nint data4[] = {INT_MAX - 100};\n"
    "add_100(1, data4);\n\n//Input case 5:\nint data5[] = {-50, 0, 50};\nadd_100(3, data5);\n";

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!have_compiler()) GTEST_SKIP() << "g++ not available";
    nlohmann::json rec{{"id", "p1"}, {"direction", "C_to_CUDA"}, {"source", kSource}, {"reference", kReference}, {"tests", kTests}};
    write_file(dir_ / "test_set.jsonl", rec.dump() + "\n");
  }

  Pipeline make(const std::vector<std::string>& translations) {
    nlohmann::json responses;
    std::vector<std::string> wrapped;
    for (const auto& t : translations) wrapped.push_back("[CUDA]\n" + t + "\n[/CUDA]");
    responses["translate/p1"] = wrapped;
    responses["gen_wrapper/add_100"] = "[CODE]\n" + std::string(kWrapper) + "\n[/CODE]";
    responses["gen_tests/p1"] = "[INPUTS]\n" + std::string(kTests) + "[/INPUTS]";
    write_file(dir_ / "mock.json", nlohmann::json{{"responses", responses}}.dump());
    auto cfg = parse_config("mock: {responses: mock.json}\nworkers: 2\nseed: 3\n", dir_.path());
    cfg.scratch_root = dir_ / "scratch";
    return Pipeline(cfg, make_services(cfg, true));
  }

  std::vector<EvalProblem> problems() { return load_test_set(dir_ / "test_set.jsonl"); }

  TempDir dir_;
};

}  // namespace

TEST_F(EvaluateTest, VerbatimReferencePassesEverything) {
  auto p = make({kReference});
  auto r = evaluate(p, problems(), {1}, 2, true);
  EXPECT_DOUBLE_EQ(r.metrics.pass_at.at(1), 1.0);
  EXPECT_DOUBLE_EQ(r.metrics.cpass, 1.0);
  EXPECT_NEAR(r.metrics.bleu, 1.0, 1e-12);
  ASSERT_TRUE(r.metrics.codebleu_ngram);
  EXPECT_NEAR(*r.metrics.codebleu_ngram, 1.0, 1e-12);
  ASSERT_TRUE(r.metrics.vt);
  EXPECT_DOUBLE_EQ(*r.metrics.vt, 1.0);
  EXPECT_TRUE(r.rejections.empty());
  EXPECT_EQ(r.metrics.problems, 1);
  EXPECT_EQ(r.metrics.samples_per_problem, 2);
}

TEST_F(EvaluateTest, NonCompilingTranslations) {
  auto p = make({kBroken});
  auto r = evaluate(p, problems(), {1, 2}, 2);
  EXPECT_EQ(r.metrics.cpass, 0.0);
  EXPECT_EQ(r.metrics.pass_at.at(1), 0.0);
  EXPECT_EQ(r.metrics.pass_at.at(2), 0.0);
  ASSERT_EQ(r.rejections.size(), 2u);
  for (const auto& rej : r.rejections) EXPECT_EQ(rej.stage, Stage::YCompile);
  long total = 0;
  for (const auto& [t, n] : r.metrics.error_histogram) total += n;
  EXPECT_EQ(total, 2);
}

TEST_F(EvaluateTest, ThreeOfTenPass) {
  std::vector<std::string> ts(10, kWrong);
  ts[0] = ts[4] = ts[7] = kReference;
  auto p = make(ts);
  auto r = evaluate(p, problems(), {1, 5}, 10);
  ASSERT_EQ(r.outcomes.size(), 1u);
  EXPECT_EQ(r.outcomes[0].c, 3);
  EXPECT_EQ(r.outcomes[0].compile_ok, 10);
  EXPECT_NEAR(r.metrics.pass_at.at(1), 0.3, 1e-12);
  EXPECT_NEAR(r.metrics.pass_at.at(5), 1.0 - 21.0 / 252.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.metrics.cpass, 1.0);
  EXPECT_EQ(r.rejections.size(), 7u);
  // Passing samples are the verbatim ones, so pass and BLEU move together.
  ASSERT_TRUE(r.metrics.pearson.count("bleu~pass"));
  EXPECT_GT(r.metrics.pearson.at("bleu~pass"), 0.99);
  EXPECT_FALSE(r.metrics.pearson.count("cpass~pass"));  // constant cpass vector
}

TEST_F(EvaluateTest, KGreaterThanNIsRefused) {
  auto p = make({kReference});
  EXPECT_THROW(evaluate(p, problems(), {5}, 2), ConfigError);
  EXPECT_THROW(evaluate(p, problems(), {}, 2), ConfigError);
  EXPECT_THROW(evaluate(p, {}, {1}, 1), ConfigError);
}

TEST(LoadTestSet, FormatsAndErrors) {
  TempDir dir;
  nlohmann::json listed{{"id", "q"}, {"direction", "CUDA_to_C"},
                        {"source", "__global__ void k(int *a) { a[0] = 1; }"},
                        {"source_wrapper", "void k_run(int *a) { k<<<1, 1>>>(a); }"},
                        {"reference", "void k_cpu(int *a) { a[0] = 1; }"},
                        {"tests", {"int a1[1];\nwrapper(k_run, a1);", "int a2[1];\nwrapper(k_run, a2);"}}};
  write_file(dir / "ok.jsonl", listed.dump() + "\n\n");
  auto ps = load_test_set(dir / "ok.jsonl");
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].suite.cases.size(), 2u);
  EXPECT_EQ(ps[0].source.language, Language::CUDA);
  EXPECT_TRUE(ps[0].source.wrapper_source);

  write_file(dir / "bad.jsonl", listed.dump() + "\n{\"id\": \"x\"}\n");
  try {
    load_test_set(dir / "bad.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_test_set(dir / "missing.jsonl"), IoError);
}
