#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coverify/executor.hpp"
#include "coverify/gateway.hpp"
#include "coverify/types.hpp"
#include "coverify/verify.hpp"
#include "coverify/wrapgen.hpp"

namespace coverify {

struct ConvergenceConfig {
  double min_growth = 0.05;
  int max_iterations = 4;
};

struct ExportConfig {
  int cap_per_function = 1;
  bool split_by_direction = false;
};

struct EvaluateConfig {
  std::filesystem::path test_set;
  std::vector<int> k_values{1};
  int n_samples = 1;
  bool tester_vt = false;
};

struct MockConfig {
  std::filesystem::path responses;
  /// Recorded harness outcomes; when present the mock path needs no compiler.
  std::filesystem::path transcripts;
};

/// Everything one run needs. Relative paths are resolved against the
/// directory of the config file.
struct PipelineConfig {
  std::filesystem::path output_dir = "out";
  std::filesystem::path scratch_root;
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> prompts_dir;
  int iteration = 1;
  std::vector<Direction> directions{Direction::C_to_CUDA, Direction::CUDA_to_C};
  int n_translation_samples = 1;
  int n_tests = 5;
  std::uint64_t seed = 0;
  int workers = 4;
  bool keep_scratch = false;

  ModelEndpoint translator;
  ModelEndpoint tester;
  /// Used for kernel wrappers; defaults to the tester endpoint.
  std::optional<ModelEndpoint> wrapper;
  MockConfig mock;

  Backend c_backend = Backend::NativeC;
  Backend cuda_backend = Backend::CudaShim;
  std::map<Backend, CompileSpec> compile_specs;
  std::filesystem::path runtime_include_dir;
  RunLimits limits;
  NumericTolerance tolerance;
  std::optional<std::filesystem::path> rules_file;

  ConvergenceConfig convergence;
  ExportConfig export_options;
  EvaluateConfig evaluate;

  const ModelEndpoint& wrapper_endpoint() const noexcept { return wrapper ? *wrapper : tester; }
  std::filesystem::path iteration_dir(int iteration) const;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Sets the CUDA backend and rebuilds its compile spec when missing.
  void set_cuda_backend(Backend backend);
};

/// Parses a YAML config document. Throws ConfigError.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads and parses a YAML config file. Throws ConfigError.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace coverify
