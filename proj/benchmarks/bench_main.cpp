#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "coverify/corpus.hpp"
#include "coverify/metrics.hpp"
#include "coverify/verify.hpp"
#include "coverify/wrapgen.hpp"

using namespace coverify;

namespace {

const char* kGemm =
    "__global__ void device_gemm(double * __restrict__ A, double * __restrict__ B, double * __restrict__ C, double alpha, double beta, int M, int N, int K, bool A_T = false, bool B_T = false) {\n"
    "    int j = blockIdx.x * blockDim.x + threadIdx.x;\n    int i = blockIdx.y * blockDim.y + threadIdx.y;\n"
    "    if ((i < M) && (j < N)) {\n        double temp = 0;\n        for (int k = 0; k < K; k++) {\n"
    "            double left = A_T ? A[k + i * K] : A[i + k * M];\n            double right = B_T ? B[j + k * N] : B[k + j * K];\n"
    "            temp += left * right;\n        }\n        C[i + j * M] = alpha * temp + beta * C[i + j * M];\n    }\n}\n";

std::string many_records(int n) {
  std::string s;
  for (int k = 1; k <= n; ++k) {
    auto i = std::to_string(k);
    s += "=== CASE " + i + " ===\nReturn value: void Arguments after function call: ([ 0.5, 0.7, 0.6, 0.8, 1, 0.9, "
         "0.3, 0.2, 0.4 ], [ 1, 0.8, 0.9, 0.7, 1, 0.6, 0.4, 0.3, 0.5 ], 1, 3, 3)\n=== END " + i + " ===\n";
  }
  return s;
}

}  // namespace

static void BM_PassAtK(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  for (auto _ : state)
    for (int c = 0; c <= n; c += 7) benchmark::DoNotOptimize(pass_at_k(n, c, n / 2));
}
BENCHMARK(BM_PassAtK)->Arg(20)->Arg(200);

static void BM_Bleu(benchmark::State& state) {
  auto ref = code_tokenize(kGemm);
  auto cand = ref;
  std::swap(cand[10], cand[20]);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(cand, ref));
}
BENCHMARK(BM_Bleu);

static void BM_ParseOutput(benchmark::State& state) {
  auto text = many_records(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parse_output(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ParseOutput)->Arg(5)->Arg(500);

static void BM_Normalize(benchmark::State& state) {
  std::string src = kGemm;
  for (auto _ : state) benchmark::DoNotOptimize(normalize(src));
}
BENCHMARK(BM_Normalize);

static void BM_RewriteKernelLaunch(benchmark::State& state) {
  std::string wrapper =
      "void run(double *A, double *B, double *C, int M, int N, int K) {\n  dim3 block(16, 16);\n"
      "  dim3 grid((N + 15) / 16, (M + 15) / 16);\n  device_gemm<<<grid, block, 0, 0>>>(A, B, C, 1.0, 0.0, M, N, K);\n"
      "  /* k<<<1, 1>>>(x) */\n  device_gemm<<<1, 1>>>(A, B, C, 1.0, 0.0, M, N, K);\n}\n";
  for (auto _ : state) benchmark::DoNotOptimize(rewrite_kernel_launch(wrapper));
}
BENCHMARK(BM_RewriteKernelLaunch);
BENCHMARK_MAIN();
