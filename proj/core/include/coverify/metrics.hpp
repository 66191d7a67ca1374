#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coverify {

/// Appendix-style error taxonomy for failed compiles and runs.
enum class ErrorType {
  Type1,   // function overload resolution
  Type2,   // insufficient arguments
  Type3,   // argument type mismatch
  Type4,   // syntax error: missing symbol
  Type5,   // undefined identifier
  Type6,   // preprocessor directive error
  Type7,   // unrecognized token
  Type8,   // duplicate declaration or standard library conflict
  Type9,   // logical sequence, block index or shared memory error
  Type10,  // control flow bypasses variable initialization
  Type11,  // host function launched as a kernel
  Unknown,
};

inline constexpr int kErrorTypeCount = 12;

std::string_view to_string(ErrorType type) noexcept;
std::optional<ErrorType> parse_error_type(std::string_view text) noexcept;

/// Per-problem sampling outcome.
struct SampleOutcome {
  std::string problem_id;
  int n = 0;           // samples drawn
  int c = 0;           // samples passing the functional check
  int compile_ok = 0;  // samples that compiled
};

/// Unbiased pass@k estimate 1 - C(n-c, k) / C(n, k), evaluated as
/// 1 - prod_{i=n-c+1..n} (1 - k/i). Throws std::invalid_argument unless
/// 1 <= k <= n and 0 <= c <= n.
double pass_at_k(int n, int c, int k);

/// Unweighted mean of per-problem pass@k. Throws if any outcome has n < k.
double aggregate_pass_at_k(const std::vector<SampleOutcome>& outcomes, int k);

/// Sum of compile_ok over sum of n. Throws on empty input.
double cpass(const std::vector<SampleOutcome>& outcomes);

/// Lexer tokens for BLEU: identifiers, numerals, literals and operators.
std::vector<std::string> code_tokenize(std::string_view source);

/// Sentence BLEU with uniform weights over orders 1..max_n and a brevity
/// penalty. Orders >= 2 with zero matches are smoothed add-one:
/// (0 + 1) / (total + 1). Empty candidate scores 0. Throws on an empty
/// reference.
double bleu(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference, int max_n = 4);

/// Corpus BLEU: n-gram statistics summed over all pairs before combining.
double corpus_bleu(const std::vector<std::pair<std::vector<std::string>,
                                               std::vector<std::string>>>& pairs,
                   int max_n = 4);

/// BLEU whose unigram precision counts keyword tokens `keyword_weight`
/// times as much as other tokens (the n-gram component of CodeBLEU).
double weighted_ngram_bleu(const std::vector<std::string>& candidate,
                           const std::vector<std::string>& reference,
                           double keyword_weight = 4.0, int max_n = 4);

/// Pearson sample correlation. Throws on length mismatch, fewer than two
/// points, or a constant vector.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

using ErrorHistogram = std::map<ErrorType, long>;

/// Zero-initialised histogram with every type present.
ErrorHistogram empty_histogram();

/// Counts types; absent types count as Unknown.
ErrorHistogram error_histogram(const std::vector<std::optional<ErrorType>>& types);

struct MetricsReport {
  double bleu = 0.0;
  std::optional<double> codebleu_ngram;
  double cpass = 0.0;
  std::map<int, double> pass_at;
  std::optional<double> vt;
  ErrorHistogram error_histogram = empty_histogram();
  /// Keyed "metric_a~metric_b"; pairs with a constant vector are omitted.
  std::map<std::string, double> pearson;
  int problems = 0;
  int samples_per_problem = 0;
  std::string bleu_smoothing = "add-one on zero-count orders >= 2";
  std::string extraction_failures = "counted as non-passing samples";
};

}  // namespace coverify
