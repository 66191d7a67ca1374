#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "coverify/corpus.hpp"
#include "coverify/executor.hpp"
#include "coverify/gateway.hpp"
#include "coverify/metrics.hpp"
#include "coverify/wrapgen.hpp"

namespace coverify {

struct NumericTolerance {
  double abs = 1e-6;
  double rel = 1e-4;
  /// When set, nan never equals nan.
  bool strict_nan = false;
};

struct ArgumentSnapshot {
  bool is_array = false;
  std::vector<std::string> tokens;

  bool operator==(const ArgumentSnapshot&) const = default;
};

struct CaseRecord {
  int index = 0;
  std::string return_token;
  std::vector<ArgumentSnapshot> snapshots;
  /// Lines the function printed itself, in order.
  std::vector<std::string> other_lines;
  bool has_record = false;

  bool operator==(const CaseRecord&) const = default;
};

struct CanonicalOutput {
  std::vector<CaseRecord> cases;
  /// Every opened case was closed.
  bool complete = false;

  bool operator==(const CanonicalOutput&) const = default;
};

/// Parses harness stdout. A case opened but never closed is dropped and
/// marks the output incomplete. Throws ParseError when no case delimiter
/// occurs at all.
CanonicalOutput parse_output(std::string_view stdout_text);

/// Parses one "Return value: ... Arguments after function call: (...)" line.
/// Throws ParseError when the line does not have that shape.
CaseRecord parse_record_line(std::string_view line);

/// Token equality: numbers within |u-v| <= abs + rel * max(|u|,|v|), inf only
/// equal to itself, nan equal to nan unless strict; other tokens exactly.
bool tokens_equal(std::string_view a, std::string_view b, const NumericTolerance& tol = {});

struct Comparison {
  bool equal = true;
  /// Empty when equal, e.g. "case 2, argument 2, element 1: -1.12221e+23 vs inf".
  std::string first_difference;
};

/// Throws std::invalid_argument when either side is incomplete.
Comparison outputs_equal(const CanonicalOutput& a, const CanonicalOutput& b,
                         const NumericTolerance& tol = {});

/// Check(x, y): both complete, same number of cases, every case equal.
bool check(const CanonicalOutput& x, const CanonicalOutput& y, const NumericTolerance& tol = {});

enum class Stage { XCompile, XRun, YCompile, YRun, Mismatch, Extraction };

std::string_view to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view text) noexcept;

/// One sampled translation of a function.
struct TranslationCandidate {
  std::string function_id;
  int index = 0;
  Direction direction = Direction::C_to_CUDA;
  std::optional<std::string> source;
  /// Host wrapper for a translated kernel.
  std::optional<std::string> wrapper;
  /// Why source or wrapper is missing.
  std::string error;

  bool operator==(const TranslationCandidate&) const = default;
};

struct Rejection {
  std::string function_id;
  int candidate_index = -1;  // -1 when no candidate exists
  Direction direction = Direction::C_to_CUDA;
  int iteration = 1;
  Stage stage = Stage::Extraction;
  std::string detail;
  std::optional<ErrorType> error_type;

  bool operator==(const Rejection&) const = default;
};

struct VerifiedTriplet {
  FunctionUnit x;
  std::string y;
  std::optional<std::string> y_wrapper;
  TestSuite suite;
  CanonicalOutput x_transcript;
  CanonicalOutput y_transcript;
  Direction direction = Direction::C_to_CUDA;
  int iteration = 1;
  int candidate_index = 0;

  /// "<x id>#<candidate index>".
  std::string id() const;
  bool operator==(const VerifiedTriplet&) const = default;
};

using VerifyResult = std::variant<VerifiedTriplet, Rejection>;

struct VerifyContext {
  HarnessRunner* runner = nullptr;
  Backend c_backend = Backend::NativeC;
  Backend cuda_backend = Backend::CudaShim;
  NumericTolerance tolerance;
  int iteration = 1;
};

/// Outcome of running a test suite against the source function.
struct SourceRun {
  std::optional<Rejection> failure;  // stage x_compile or x_run
  std::optional<CanonicalOutput> transcript;
  int n_cases = 0;
  int valid_cases = 0;

  bool all_valid() const noexcept { return !failure && valid_cases == n_cases && n_cases > 0; }
};

/// Compiles and runs the x harness once. Validity of a case means it
/// completed on the source program.
SourceRun run_source(const FunctionUnit& x, const TestSuite& suite, Direction direction,
                     const VerifyContext& ctx);

/// Verifies y against an already executed source run.
VerifyResult verify_candidate(const FunctionUnit& x, const SourceRun& source,
                              const TranslationCandidate& y, const TestSuite& suite,
                              const VerifyContext& ctx);

/// run_source followed by verify_candidate.
VerifyResult verify_triplet(const FunctionUnit& x, const TranslationCandidate& y,
                            const TestSuite& suite, const VerifyContext& ctx);

struct FunctionValidity {
  std::string function_id;
  int n_cases = 0;
  int valid_cases = 0;
  bool all_valid = false;

  bool operator==(const FunctionValidity&) const = default;
};

struct CoVerifyResult {
  std::vector<VerifiedTriplet> triplets;
  std::vector<Rejection> rejections;
  std::vector<FunctionValidity> validity;
};

/// Verifies every candidate of every function. Functions without a suite or
/// without candidates yield an extraction rejection. The source program runs
/// once per function. Output order follows `corpus` and candidate index,
/// independent of scheduling.
CoVerifyResult co_verify_corpus(const std::vector<FunctionUnit>& corpus, Direction direction,
                                const std::map<std::string, std::vector<TranslationCandidate>>& translations,
                                const std::map<std::string, TestSuite>& suites,
                                const VerifyContext& ctx, WorkerPool* pool = nullptr);

/// Fraction of functions whose every case ran on the source program.
/// Entries are (case count, all valid). Throws on empty input.
double vt_metric(const std::vector<std::pair<int, bool>>& per_function);

/// Histogram of rejection error types; rejections without one count as
/// unknown.
ErrorHistogram error_histogram(const std::vector<Rejection>& rejections);

}  // namespace coverify
