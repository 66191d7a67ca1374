#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coverify/corpus.hpp"
#include "coverify/gateway.hpp"

namespace coverify {

enum class Backend { NativeC, Nvcc, CudaShim };

std::string_view to_string(Backend backend) noexcept;
std::optional<Backend> parse_backend(std::string_view text) noexcept;

struct HarnessUnit {
  std::string function_id;
  Backend backend = Backend::NativeC;
  std::string unit_source;
  int case_count = 0;

  /// SHA-256 over backend and unit source; keys recorded transcripts.
  std::string digest() const;
};

/// Complete translation unit running every case of `suite` through
/// `wrapper(...)` between `=== CASE k ===` / `=== END k ===` lines.
/// The first argument of each `wrapper(` call is rebound to the function
/// under test (or to the host wrapper of a kernel), so suites written for
/// the source function also drive its translation. Throws HarnessError on
/// an empty suite, a kernel without wrapper, a kernel on the native_c
/// backend, or a pointer argument that is not a sized array declared in the
/// case.
HarnessUnit emit_harness(std::string_view fn_source, const Signature& sig, const TestSuite& suite,
                         Backend backend,
                         const std::optional<std::string>& wrapper_source = std::nullopt);

/// Rewrites `k<<<G, B[, S, T]>>>(args)` into `CUDA_LAUNCH(k, G, B, args)`.
/// Shared-memory size and stream arguments are dropped. Launches of names in
/// `host_functions` become `CUDA_LAUNCH_HOST`, which fails to compile. Text
/// inside comments and literals is left alone. Throws ParseError on an
/// unmatched `<<<` or `>>>`.
std::string rewrite_kernel_launch(std::string_view source,
                                  const std::set<std::string>& host_functions = {});

/// Names of the non-kernel functions defined in `source`.
std::set<std::string> host_function_names(std::string_view source);

struct ShimCheck {
  bool compatible = true;
  /// Any of "barrier", "shared memory", "dynamic parallelism",
  /// "warp intrinsic", in that order.
  std::vector<std::string> reasons;
};

ShimCheck shim_compatible(std::string_view kernel_source);

}  // namespace coverify
