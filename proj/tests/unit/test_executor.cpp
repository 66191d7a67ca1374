#include <gtest/gtest.h>

#include <csignal>
#include <cstdlib>

#include "coverify/corpus.hpp"
#include "coverify/errors.hpp"
#include "coverify/executor.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace coverify;
using coverify::testing::TempDir;

namespace {

TestSuite suite_of(std::vector<std::string> snippets) {
  TestSuite s;
  s.function_id = "t";
  int k = 0;
  for (auto& snip : snippets) s.cases.push_back({++k, std::move(snip)});
  return s;
}

HarnessUnit native(const std::string& src, std::vector<std::string> cases) {
  return emit_harness(src, parse_signature(src), suite_of(std::move(cases)), Backend::NativeC);
}

class ExecutorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!coverify::testing::have_compiler()) GTEST_SKIP() << "g++ not available";
  }

  ProcessRunner runner(RunLimits limits = {}, bool keep = false) {
    std::map<Backend, CompileSpec> specs{
        {Backend::NativeC, default_compile_spec(Backend::NativeC, default_runtime_dir())},
        {Backend::CudaShim, default_compile_spec(Backend::CudaShim, default_runtime_dir())}};
    return ProcessRunner(specs, limits, scratch_.path(), keep);
  }

  TempDir scratch_;
};

}  // namespace

TEST(RunProcess, ExitCodesAndStreams) {
  ProcessOptions o;
  o.argv = {"/bin/sh", "-c", "echo out; echo err >&2; exit 3"};
  auto r = run_process(o);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_FALSE(r.signal);
  EXPECT_EQ(r.stdout_text, "out\n");
  EXPECT_EQ(r.stderr_text, "err\n");
  EXPECT_FALSE(r.timed_out);
}

TEST(RunProcess, TimeoutKillsProcessGroup) {
  ProcessOptions o;
  o.argv = {"/bin/sh", "-c", "sleep 30 & sleep 30; echo never"};
  o.timeout = 0.5;
  auto r = run_process(o);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(r.duration, 5.0);
  EXPECT_EQ(r.stdout_text, "");
}

TEST(RunProcess, OutputCapTruncates) {
  ProcessOptions o;
  o.argv = {"/bin/sh", "-c", "yes coverify"};
  o.max_output = 4096;
  o.timeout = 10;
  auto r = run_process(o);
  EXPECT_TRUE(r.output_truncated);
  EXPECT_LE(r.stdout_text.size(), 4096u);
  EXPECT_LT(r.duration, 5.0);
}

TEST(RunProcess, ScrubsSecretsFromEnvironment) {
  ::setenv("COVERIFY_API_KEY", "hidden", 1);
  ::setenv("COVERIFY_PLAIN", "visible", 1);
  ::setenv("COVERIFY_EXTRA", "dropped", 1);
  ProcessOptions o;
  o.argv = {"/bin/sh", "-c", "echo \"[$COVERIFY_API_KEY][$COVERIFY_PLAIN][$COVERIFY_EXTRA]\""};
  o.scrub_env = {"COVERIFY_EXTRA"};
  EXPECT_EQ(run_process(o).stdout_text, "[][visible][]\n");
}

TEST(RunProcess, MissingProgramIsConfigError) {
  ProcessOptions o;
  o.argv = {"/nonexistent/coverify-compiler"};
  EXPECT_THROW(run_process(o), ConfigError);
}

TEST_F(ExecutorTest, ScalarFunctionRecord) {
  auto r = runner();
  auto out = r.execute(native("int add(int a, int b) { return a + b; }", {"int a = 2;\nwrapper(add, a, 3);"}));
  ASSERT_TRUE(out.ok()) << out.compile.stderr_text;
  EXPECT_EQ(out.run->stdout_text, "=== CASE 1 ===\nReturn value: 5 Arguments after function call: (2, 3)\n=== END 1 ===\n");
  EXPECT_EQ(out.compile.phase, Phase::Compile);
  EXPECT_EQ(out.run->phase, Phase::Run);
  EXPECT_EQ(out.run->exit_code, 0);
}

TEST_F(ExecutorTest, ArraysPrintAfterCall) {
  auto r = runner();
  auto out = r.execute(native("void add_100(int numElements, int *data) { for (int idx = 0; idx < numElements; idx++) data[idx] += 100; }",
                              {"int data1[] = {0, -100, 1, 2, 3};\nwrapper(add_100, 5, data1);"}));
  ASSERT_TRUE(out.ok()) << out.compile.stderr_text;
  EXPECT_NE(out.run->stdout_text.find("Return value: void Arguments after function call: (5, [ 100, 0, 101, 102, 103 ])"),
            std::string::npos);
}

TEST_F(ExecutorTest, CompileErrorIsClassified) {
  auto r = runner();
  auto out = r.execute(native("int f(int a) { return a + n_elements; }", {"wrapper(f, 1);"}));
  EXPECT_EQ(out.compile.status, ExecStatus::CompileError);
  EXPECT_FALSE(out.run);
  EXPECT_EQ(out.compile.error_type, ErrorType::Type5);
  EXPECT_NE(out.compile.stderr_text.find("harness.cpp:"), std::string::npos);
  EXPECT_EQ(out.compile.stderr_text.find(scratch_.path().string()), std::string::npos);
}

TEST_F(ExecutorTest, CrashKeepsPartialOutput) {
  auto r = runner();
  auto out = r.execute(native("int divide(int a, int b) { return a / b; }",
                              {"wrapper(divide, 6, 3);", "int z = 0;\nwrapper(divide, 1, z);"}));
  ASSERT_TRUE(out.compile.ok()) << out.compile.stderr_text;
  ASSERT_TRUE(out.run);
  EXPECT_EQ(out.run->status, ExecStatus::RuntimeError);
  EXPECT_EQ(out.run->signal, SIGFPE);
  EXPECT_NE(out.run->stdout_text.find("Return value: 2"), std::string::npos);
  EXPECT_NE(out.run->stdout_text.find("=== CASE 2 ==="), std::string::npos);
  EXPECT_TRUE(out.run->runtime_failure());
}

TEST_F(ExecutorTest, OutOfBoundsWriteIsRuntimeErrorOrCompletes) {
  // Heap writes far past an array end: the harness either crashes or runs; it must not hang.
  auto r = runner();
  auto out = r.execute(native("void smash(int *a, int n) { for (int i = 0; i < n; i++) a[i * 4096] = i; }",
                              {"int a[4];\nwrapper(smash, a, 1 << 20);"}));
  ASSERT_TRUE(out.compile.ok());
  EXPECT_NE(out.run->status, ExecStatus::Timeout);
  EXPECT_EQ(out.run->status, ExecStatus::RuntimeError);
}

TEST_F(ExecutorTest, RunTimeout) {
  RunLimits limits;
  limits.run_timeout = 1.0;
  auto r = runner(limits);
  auto out = r.execute(native("int spin(int a) { volatile int x = a; while (x >= 0) { x = a; } return x; }", {"wrapper(spin, 1);"}));
  ASSERT_TRUE(out.compile.ok());
  EXPECT_EQ(out.run->status, ExecStatus::Timeout);
  EXPECT_GE(out.run->duration, 0.9);
  EXPECT_LT(out.run->duration, 5.0);
  EXPECT_TRUE(out.run->runtime_failure());
}

TEST_F(ExecutorTest, ScratchIsRemovedUnlessKept) {
  auto r = runner();
  r.execute(native("int id(int a) { return a; }", {"wrapper(id, 1);"}));
  EXPECT_TRUE(std::filesystem::is_empty(scratch_.path()));
  auto kept = runner({}, true);
  kept.execute(native("int id(int a) { return a; }", {"wrapper(id, 1);"}));
  EXPECT_FALSE(std::filesystem::is_empty(scratch_.path()));
}

TEST_F(ExecutorTest, ShimBackendRunsKernels) {
  const char* kernel = "__global__ void inc(int *a, int n) { int i = blockIdx.x * blockDim.x + threadIdx.x; if (i < n) a[i] += 1; }";
  const char* wrap = "void inc_invoke(int *a, int n) {\n  int *d;\n  cudaMalloc((void**)&d, n * sizeof(int));\n"
                     "  cudaMemcpy(d, a, n * sizeof(int), cudaMemcpyHostToDevice);\n  inc<<<2, 2>>>(d, n);\n"
                     "  cudaMemcpy(a, d, n * sizeof(int), cudaMemcpyDeviceToHost);\n  cudaFree(d);\n}\n";
  auto unit = emit_harness(kernel, parse_signature(kernel), suite_of({"int v[] = {1, 2, 3};\nwrapper(inc, v, 3);"}),
                           Backend::CudaShim, std::string(wrap));
  auto out = runner().execute(unit);
  ASSERT_TRUE(out.ok()) << out.compile.stderr_text;
  EXPECT_NE(out.run->stdout_text.find("([ 2, 3, 4 ], 3)"), std::string::npos);
}

TEST_F(ExecutorTest, HostFunctionLaunchIsType11) {
  const char* kernel = "__global__ void inc(int *a, int n) { a[0] += n; }";
  const char* wrap = "void helper(int *a, int n) { a[0] = n; }\n"
                     "void inc_invoke(int *a, int n) {\n  helper<<<1, 1>>>(a, n);\n}\n";
  auto unit = emit_harness(kernel, parse_signature(kernel), suite_of({"int v[] = {1};\nwrapper(inc, v, 1);"}),
                           Backend::CudaShim, std::string(wrap));
  auto out = runner().execute(unit);
  EXPECT_EQ(out.compile.status, ExecStatus::CompileError);
  EXPECT_EQ(out.compile.error_type, ErrorType::Type11);
}

TEST_F(ExecutorTest, MissingToolchainIsConfigError) {
  std::map<Backend, CompileSpec> specs{{Backend::Nvcc, {Backend::Nvcc, "/nonexistent/nvcc", {}, {}, 10}}};
  ProcessRunner r(specs, {}, scratch_.path());
  EXPECT_THROW(r.check_toolchain(Backend::Nvcc), ConfigError);
  EXPECT_THROW(r.check_toolchain(Backend::NativeC), ConfigError);
}

TEST_F(ExecutorTest, RecordingThenReplay) {
  auto inner = std::make_shared<ProcessRunner>(runner());
  RecordingRunner rec(inner);
  auto a = native("int sq(int a) { return a * a; }", {"wrapper(sq, 7);"});
  auto b = native("int bad(int a) { return a + ; }", {"wrapper(bad, 7);"});
  auto out_a = rec.execute(a);
  auto out_b = rec.execute(b);
  auto file = scratch_ / "transcripts.json";
  rec.save(file);

  ReplayRunner replay(file);
  EXPECT_EQ(replay.size(), 2u);
  auto again = replay.execute(a);
  EXPECT_EQ(again.run->stdout_text, out_a.run->stdout_text);
  EXPECT_EQ(replay.execute(b).compile.error_type, out_b.compile.error_type);
  EXPECT_THROW(replay.execute(native("int other(int a) { return a; }", {"wrapper(other, 1);"})), ConfigError);
  EXPECT_THROW(ReplayRunner(scratch_ / "missing.json"), ConfigError);
}

TEST(WorkerPool, RunsEverythingAndKeepsResults) {
  WorkerPool pool(4);
  EXPECT_EQ(pool.size(), 4);
  std::vector<std::future<int>> fs;
  for (int i = 0; i < 100; ++i) fs.push_back(pool.submit([i] { return i * i; }));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(fs[i].get(), i * i);
  auto err = pool.submit([]() -> int { throw std::runtime_error("boom"); });
  EXPECT_THROW(err.get(), std::runtime_error);
}

TEST(Classifier, DiagnosticFixtureCorpus) {
  auto dir = coverify::testing::fixture_dir() / "diagnostics";
  auto index = nlohmann::json::parse(coverify::testing::read_file(dir / "index.json"));
  ASSERT_GE(index.size(), 30u);
  std::set<std::string> types;
  for (const auto& e : index) {
    auto text = coverify::testing::read_file(dir / e["file"].get<std::string>());
    auto phase = *parse_phase(e["phase"].get<std::string>());
    auto want = *parse_error_type(e["type"].get<std::string>());
    EXPECT_EQ(classify_error(text, phase), want) << e["file"];
    types.insert(e["type"].get<std::string>());
  }
  EXPECT_EQ(types.size(), 11u);
}

TEST(Classifier, SpecificStrings) {
  EXPECT_EQ(classify_error("boxes.cu(1): error: identifier \"T\" is undefined", Phase::Compile), ErrorType::Type5);
  EXPECT_EQ(classify_error("error: too few arguments to function 'void f(int, int, int)'", Phase::Compile), ErrorType::Type2);
  EXPECT_EQ(classify_error("error: a host function call cannot be configured", Phase::Compile), ErrorType::Type11);
  EXPECT_EQ(classify_error("something nobody has seen", Phase::Compile), ErrorType::Unknown);
  // Runtime-only rules do not fire on compile diagnostics.
  EXPECT_EQ(classify_error("illegal memory access", Phase::Compile), ErrorType::Unknown);
  EXPECT_EQ(classify_error("CUDA error: an illegal memory access was encountered", Phase::Run), ErrorType::Type9);
}

TEST(Classifier, EarliestDiagnosticLineWins) {
  std::string text =
      "h.cpp:3:1: error: 'T' has not been declared\n"
      "h.cpp:9:5: error: cannot convert 'int*' to 'double*'\n";
  EXPECT_EQ(classify_error(text, Phase::Compile), ErrorType::Type5);
}

TEST(Classifier, RulesFilePrepends) {
  TempDir dir;
  coverify::testing::write_file(dir / "rules.json", R"([{"type": "Type7", "pattern": "custom oddity", "phase": "compile"}])");
  ErrorClassifier c;
  auto n = c.rules().size();
  c.prepend_rules_file(dir / "rules.json");
  EXPECT_EQ(c.rules().size(), n + 1);
  EXPECT_EQ(c.classify("error: custom oddity here", Phase::Compile), ErrorType::Type7);
  coverify::testing::write_file(dir / "bad.json", R"([{"type": "Type7", "pattern": "("}])");
  EXPECT_THROW(c.prepend_rules_file(dir / "bad.json"), ConfigError);
  coverify::testing::write_file(dir / "obj.json", R"({"type": "Type7"})");
  EXPECT_THROW(c.prepend_rules_file(dir / "obj.json"), ConfigError);
}
