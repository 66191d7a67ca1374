#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coverify/config.hpp"
#include "coverify/corpus.hpp"
#include "coverify/executor.hpp"
#include "coverify/gateway.hpp"
#include "coverify/metrics.hpp"
#include "coverify/verify.hpp"

namespace coverify {

struct TrainingExample {
  Task task = Task::Translate;
  std::string prompt;
  std::string target;
  std::optional<Direction> direction;
  int iteration = 1;
  /// Id of the triplet the example came from.
  std::string origin;

  bool operator==(const TrainingExample&) const = default;
};

std::string training_to_json(const TrainingExample& example);
TrainingExample training_from_json(std::string_view text, std::size_t line = 0);

struct TrainingSets {
  std::vector<TrainingExample> translator;
  std::vector<TrainingExample> tester;
};

/// Back-translation pairs: a translate example with prompt from y, target x
/// and the reversed direction, plus a gen_tests example with prompt from y and
/// the serialized suite as target. At most `cap_per_function` triplets per
/// (function, direction) are used, first accepted first.
TrainingSets export_training_data(const std::vector<VerifiedTriplet>& triplets,
                                  const PromptLibrary& prompts = {}, int cap_per_function = 1);

/// Writes translator.jsonl / tester.jsonl into `dir` (or one file per
/// direction for translate examples). Returns the paths written.
std::vector<std::filesystem::path> write_training_files(const TrainingSets& sets,
                                                        const std::filesystem::path& dir,
                                                        bool split_by_direction = false);

struct DirectionCounts {
  long functions = 0;
  long attempted = 0;  // candidates, or one per function without any
  long accepted = 0;
  long rejected = 0;

  bool operator==(const DirectionCounts&) const = default;
};

struct IterationReport {
  int iteration = 1;
  std::map<Direction, DirectionCounts> per_direction;
  /// Accepted triplets by the language of x.
  std::map<Language, long> accepted_by_language;
  std::map<Stage, long> rejections_by_stage;
  ErrorHistogram error_histogram = empty_histogram();
  std::optional<double> vt;
  long translate_examples = 0;
  long tester_examples = 0;
  double elapsed = 0.0;  // seconds
  std::map<std::string, std::string> files;
  std::string translator_model;
  std::string tester_model;
  bool converged = false;

  long accepted_total() const;
};

std::string report_to_json(const IterationReport& report);
IterationReport report_from_json(std::string_view text);

/// Static HTML summary of one or more iterations.
std::string render_html(const std::vector<IterationReport>& history);

/// True when the last iteration reached `max_iterations` or grew the
/// accepted count by less than `min_growth` over the one before. Throws
/// std::invalid_argument on an empty history.
bool converged(const std::vector<IterationReport>& history, const ConvergenceConfig& config);

/// Chat endpoints and the harness runner a pipeline talks to.
struct Services {
  std::shared_ptr<ChatEndpoint> translator;
  std::shared_ptr<ChatEndpoint> tester;
  std::shared_ptr<ChatEndpoint> wrapper;
  std::shared_ptr<HarnessRunner> runner;
  std::shared_ptr<const ErrorClassifier> classifier;
};

/// Builds endpoints and runner from the config. With `mock`, every endpoint
/// serves `mock.responses` and recorded transcripts replace the compilers
/// when configured. `record_transcripts` wraps the process runner so its
/// outcomes can be saved for later replay.
Services make_services(const PipelineConfig& config, bool mock, bool record_transcripts = false);

/// Per (function, direction) result as kept in the completion log.
struct FunctionRecord {
  std::string function_id;
  Direction direction = Direction::C_to_CUDA;
  std::optional<TestSuite> suite;
  std::vector<TranslationCandidate> candidates;
  FunctionValidity validity;
  std::vector<VerifiedTriplet> triplets;
  std::vector<Rejection> rejections;
};

std::string record_to_json(const FunctionRecord& record);
FunctionRecord record_from_json(std::string_view text, std::size_t line = 0);

struct IterationResult {
  std::vector<VerifiedTriplet> s_i;
  std::vector<Rejection> rejections;
  std::vector<FunctionValidity> validity;
  TrainingSets training;
  IterationReport report;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, Services services);
  ~Pipeline();

  const PipelineConfig& config() const noexcept { return config_; }

  std::vector<FunctionUnit> load_corpus() const;

  /// Requests wrappers for CUDA kernels that have none. Units whose wrapper
  /// cannot be obtained keep none. Returns the number added.
  int generate_wrappers(std::vector<FunctionUnit>& corpus);

  /// `n_samples` defaults to the configured sample count. Target kernels get
  /// a wrapper from the wrapper endpoint.
  std::vector<TranslationCandidate> translate(const FunctionUnit& fn, Direction direction,
                                              std::optional<int> n_samples = std::nullopt);
  std::optional<TestSuite> generate_tests(const FunctionUnit& fn, std::string* error = nullptr);

  /// Translates, tests and co-verifies one function.
  FunctionRecord process(const FunctionUnit& fn, Direction direction);

  /// Runs every (function, direction) pair of the configured iteration,
  /// resuming from its completion log, and writes all iteration artifacts.
  IterationResult run_iteration(const std::vector<FunctionUnit>& corpus);

  VerifyContext verify_context() const;
  Gateway& translator() { return *translator_; }
  Gateway& tester() { return *tester_; }
  Gateway& wrapper_gateway() { return *wrapper_; }
  WorkerPool& pool() { return *pool_; }

 private:
  PipelineConfig config_;
  Services services_;
  PromptLibrary prompts_;
  std::unique_ptr<Gateway> translator_;
  std::unique_ptr<Gateway> tester_;
  std::unique_ptr<Gateway> wrapper_;
  std::unique_ptr<WorkerPool> pool_;
};

/// One problem of a paired test set.
struct EvalProblem {
  std::string id;
  Direction direction = Direction::C_to_CUDA;
  FunctionUnit source;
  std::string reference;
  TestSuite suite;
};

/// Reads JSON Lines records {id, direction, source, source_wrapper?,
/// reference, tests} where tests is marker-separated test text or a list
/// of snippets.
std::vector<EvalProblem> load_test_set(const std::filesystem::path& path);

struct EvaluationResult {
  MetricsReport metrics;
  std::vector<SampleOutcome> outcomes;
  std::vector<Rejection> rejections;
};

/// Samples `n_samples` translations per problem, checks each against the
/// reference suite and computes CPass, Pass@k, BLEU, the n-gram CodeBLEU
/// component, the error histogram and the Pearson grid over per-sample
/// metrics. Throws ConfigError when n_samples < max(k_values).
EvaluationResult evaluate(Pipeline& pipeline, const std::vector<EvalProblem>& problems,
                          const std::vector<int>& k_values, int n_samples, bool tester_vt = false);

}  // namespace coverify
