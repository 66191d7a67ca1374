#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "coverify/metrics.hpp"
#include "coverify/wrapgen.hpp"

namespace coverify {

enum class Phase { Compile, Run };
enum class ExecStatus { Ok, CompileError, RuntimeError, Timeout };

std::string_view to_string(Phase phase) noexcept;
std::string_view to_string(ExecStatus status) noexcept;
std::optional<Phase> parse_phase(std::string_view text) noexcept;
std::optional<ExecStatus> parse_exec_status(std::string_view text) noexcept;

struct CompileSpec {
  Backend backend = Backend::NativeC;
  std::string compiler_path = "g++";
  std::vector<std::string> flags;
  std::vector<std::filesystem::path> include_dirs;
  double compile_timeout = 120.0;  // seconds
};

/// g++ (or nvcc) with the runtime header directory on the include path.
CompileSpec default_compile_spec(Backend backend, const std::filesystem::path& runtime_dir);

/// Directory holding coverify_harness.h: the source tree when built from it,
/// else the installed location.
std::filesystem::path default_runtime_dir();

struct ExecutionResult {
  Phase phase = Phase::Compile;
  ExecStatus status = ExecStatus::Ok;
  std::string stdout_text;
  std::string stderr_text;
  std::optional<int> exit_code;
  std::optional<int> signal;
  double duration = 0.0;  // seconds
  std::optional<ErrorType> error_type;
  bool output_truncated = false;

  bool ok() const noexcept { return status == ExecStatus::Ok; }
  /// Timeouts count as runtime errors in paper-facing metrics.
  bool runtime_failure() const noexcept {
    return status == ExecStatus::RuntimeError || status == ExecStatus::Timeout;
  }
};

struct ProcessOptions {
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  double timeout = 60.0;  // seconds
  std::optional<std::uint64_t> address_space_limit;
  std::size_t max_output = 16u << 20;
  /// Variables removed from the child environment in addition to names
  /// containing KEY, TOKEN, SECRET or PASSWORD.
  std::vector<std::string> scrub_env;
};

struct ProcessResult {
  std::optional<int> exit_code;
  std::optional<int> signal;
  bool timed_out = false;
  bool output_truncated = false;
  std::string stdout_text;
  std::string stderr_text;
  double duration = 0.0;
};

/// fork/exec in its own process group; the group is killed on timeout or
/// when either stream exceeds `max_output`. Throws ConfigError when the
/// program cannot be executed at all.
ProcessResult run_process(const ProcessOptions& options);

struct ClassifierRule {
  ErrorType type = ErrorType::Unknown;
  std::string pattern;
  std::optional<Phase> phase;  // unset: both phases
  std::string toolchain;       // informational: gcc, clang, nvcc, runtime
};

/// Maps diagnostics to the error taxonomy. The first rule (in table order)
/// whose pattern occurs anywhere in the text wins; no match gives Unknown.
class ErrorClassifier {
 public:
  ErrorClassifier();  // built-in table
  explicit ErrorClassifier(std::vector<ClassifierRule> rules);

  /// Reads [{"type": "Type5", "pattern": "...", "phase": "compile"}] and
  /// puts those rules ahead of the current table.
  void prepend_rules_file(const std::filesystem::path& path);
  void prepend(std::vector<ClassifierRule> rules);

  ErrorType classify(std::string_view diagnostics, Phase phase) const;
  const std::vector<ClassifierRule>& rules() const noexcept { return rules_; }

  static std::vector<ClassifierRule> builtin_rules();

 private:
  struct Compiled {
    ClassifierRule rule;
    std::regex re;
  };
  void compile_rules();

  std::vector<ClassifierRule> rules_;
  std::vector<Compiled> compiled_;
};

/// classify with the built-in table.
ErrorType classify_error(std::string_view diagnostics, Phase phase);

struct RunLimits {
  double run_timeout = 60.0;
  std::uint64_t address_space = 4ull << 30;
  std::size_t max_output = 16u << 20;
  std::vector<std::string> scrub_env;
};

struct HarnessOutcome {
  ExecutionResult compile;
  std::optional<ExecutionResult> run;  // absent when compile failed

  bool ok() const noexcept { return compile.ok() && run && run->ok(); }
};

class HarnessRunner {
 public:
  virtual ~HarnessRunner() = default;
  /// Compiles and, if that succeeded, runs one harness. Must be safe to call
  /// concurrently.
  virtual HarnessOutcome execute(const HarnessUnit& unit) = 0;
  virtual std::string describe() const = 0;
};

/// Compiles and runs harnesses with real toolchains, one fresh scratch
/// directory per job.
class ProcessRunner final : public HarnessRunner {
 public:
  ProcessRunner(std::map<Backend, CompileSpec> specs, RunLimits limits,
                std::filesystem::path scratch_root, bool keep_scratch = false,
                std::shared_ptr<const ErrorClassifier> classifier = nullptr);

  /// Compiles `unit` inside `scratch`; on success sets `artifact`.
  ExecutionResult compile(const HarnessUnit& unit, const std::filesystem::path& scratch,
                          std::filesystem::path& artifact) const;
  ExecutionResult run(const std::filesystem::path& artifact, double timeout) const;

  HarnessOutcome execute(const HarnessUnit& unit) override;
  std::string describe() const override { return "process"; }

  /// Throws ConfigError unless the compiler for `backend` can be executed.
  void check_toolchain(Backend backend) const;

 private:
  std::map<Backend, CompileSpec> specs_;
  RunLimits limits_;
  std::filesystem::path scratch_root_;
  bool keep_scratch_;
  std::shared_ptr<const ErrorClassifier> classifier_;
};

/// Serves outcomes recorded earlier, keyed by HarnessUnit::digest(). Lets the
/// full pipeline run without any compiler. Unknown units raise ConfigError.
class ReplayRunner final : public HarnessRunner {
 public:
  explicit ReplayRunner(const std::filesystem::path& transcripts);
  explicit ReplayRunner(std::map<std::string, HarnessOutcome> outcomes);

  HarnessOutcome execute(const HarnessUnit& unit) override;
  std::string describe() const override { return "replay"; }
  std::size_t size() const noexcept { return outcomes_.size(); }

 private:
  std::map<std::string, HarnessOutcome> outcomes_;
};

/// Forwards to another runner and keeps every outcome for later replay.
class RecordingRunner final : public HarnessRunner {
 public:
  explicit RecordingRunner(std::shared_ptr<HarnessRunner> inner);

  HarnessOutcome execute(const HarnessUnit& unit) override;
  std::string describe() const override { return "recording(" + inner_->describe() + ")"; }

  /// Writes the transcript file ReplayRunner reads, merging with any
  /// outcomes already present in it.
  void save(const std::filesystem::path& path) const;

 private:
  std::shared_ptr<HarnessRunner> inner_;
  mutable std::mutex mu_;
  std::map<std::string, HarnessOutcome> outcomes_;
};

/// Fixed-size thread pool. Tasks run in submission order across workers.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  template <class F>
  auto submit(F fn) -> std::future<decltype(fn())> {
    using R = decltype(fn());
    auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
    auto fut = task->get_future();
    {
      std::lock_guard lock(mu_);
      queue_.push_back([task] { (*task)(); });
    }
    cv_.notify_one();
    return fut;
  }

  int size() const noexcept { return static_cast<int>(threads_.size()); }

 private:
  void loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

}  // namespace coverify
