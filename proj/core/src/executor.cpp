#include "coverify/executor.hpp"

#include <spdlog/spdlog.h>
#include <stdlib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "coverify/errors.hpp"
#include "json_io.hpp"

#ifndef COVERIFY_DEFAULT_RUNTIME_DIR
#define COVERIFY_DEFAULT_RUNTIME_DIR ""
#endif
#ifndef COVERIFY_INSTALLED_RUNTIME_DIR
#define COVERIFY_INSTALLED_RUNTIME_DIR "/usr/local/include/coverify/runtime"
#endif

namespace coverify {

namespace fs = std::filesystem;

std::string_view to_string(Phase phase) noexcept {
  return phase == Phase::Compile ? "compile" : "run";
}

std::string_view to_string(ExecStatus status) noexcept {
  switch (status) {
    case ExecStatus::Ok: return "ok";
    case ExecStatus::CompileError: return "compile_error";
    case ExecStatus::RuntimeError: return "runtime_error";
    case ExecStatus::Timeout: return "timeout";
  }
  return "ok";
}

std::optional<Phase> parse_phase(std::string_view text) noexcept {
  if (text == "compile") return Phase::Compile;
  if (text == "run") return Phase::Run;
  return std::nullopt;
}

std::optional<ExecStatus> parse_exec_status(std::string_view text) noexcept {
  for (auto s : {ExecStatus::Ok, ExecStatus::CompileError, ExecStatus::RuntimeError, ExecStatus::Timeout})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

CompileSpec default_compile_spec(Backend backend, const fs::path& runtime_dir) {
  CompileSpec spec;
  spec.backend = backend;
  if (backend == Backend::Nvcc) {
    spec.compiler_path = "nvcc";
    spec.flags = {"-std=c++17", "-O0", "-w"};
  } else {
    spec.compiler_path = "g++";
    spec.flags = {"-std=c++17", "-O0", "-w"};
  }
  spec.include_dirs = {runtime_dir};
  return spec;
}

fs::path default_runtime_dir() {
  if (const char* env = std::getenv("COVERIFY_RUNTIME_DIR"); env && *env) return env;
  fs::path source_tree = COVERIFY_DEFAULT_RUNTIME_DIR;
  std::error_code ec;
  if (!source_tree.empty() && fs::exists(source_tree / "coverify_harness.h", ec)) return source_tree;
  return COVERIFY_INSTALLED_RUNTIME_DIR;
}

namespace {

class ScratchDir {
 public:
  ScratchDir(const fs::path& root, bool keep) : keep_(keep) {
    fs::create_directories(root);
    std::string templ = (root / "job-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw IoError("cannot create scratch directory under " + root.string());
    path_ = templ;
  }
  ~ScratchDir() {
    if (keep_) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
  bool keep_;
};

}  // namespace

ProcessRunner::ProcessRunner(std::map<Backend, CompileSpec> specs, RunLimits limits,
                             fs::path scratch_root, bool keep_scratch,
                             std::shared_ptr<const ErrorClassifier> classifier)
    : specs_(std::move(specs)),
      limits_(std::move(limits)),
      scratch_root_(std::move(scratch_root)),
      keep_scratch_(keep_scratch),
      classifier_(classifier ? std::move(classifier) : std::make_shared<const ErrorClassifier>()) {}

ExecutionResult ProcessRunner::compile(const HarnessUnit& unit, const fs::path& scratch,
                                       fs::path& artifact) const {
  auto it = specs_.find(unit.backend);
  if (it == specs_.end())
    throw ConfigError("no compiler configured for backend " + std::string(to_string(unit.backend)));
  const CompileSpec& spec = it->second;

  fs::path source = scratch / (unit.backend == Backend::Nvcc ? "harness.cu" : "harness.cpp");
  {
    std::ofstream out(source, std::ios::binary);
    out << unit.unit_source;
    if (!out) throw IoError("cannot write " + source.string());
  }
  fs::path prog = scratch / "prog";

  ProcessOptions opts;
  opts.argv.push_back(spec.compiler_path);
  opts.argv.insert(opts.argv.end(), spec.flags.begin(), spec.flags.end());
  for (const auto& dir : spec.include_dirs) opts.argv.push_back("-I" + dir.string());
  opts.argv.push_back(source.filename().string());
  opts.argv.push_back("-o");
  opts.argv.push_back(prog.filename().string());
  opts.cwd = scratch;
  opts.timeout = spec.compile_timeout;
  opts.max_output = limits_.max_output;
  opts.scrub_env = limits_.scrub_env;

  auto pr = run_process(opts);
  ExecutionResult r;
  r.phase = Phase::Compile;
  r.stdout_text = std::move(pr.stdout_text);
  r.stderr_text = std::move(pr.stderr_text);
  r.exit_code = pr.exit_code;
  r.signal = pr.signal;
  r.duration = pr.duration;
  r.output_truncated = pr.output_truncated;
  if (pr.timed_out) {
    r.status = ExecStatus::Timeout;
    r.error_type = ErrorType::Unknown;
  } else if (pr.exit_code != 0 || pr.signal) {
    r.status = ExecStatus::CompileError;
    r.error_type = classifier_->classify(r.stderr_text + "\n" + r.stdout_text, Phase::Compile);
  } else {
    r.status = ExecStatus::Ok;
    artifact = prog;
  }
  return r;
}

ExecutionResult ProcessRunner::run(const fs::path& artifact, double timeout) const {
  ProcessOptions opts;
  opts.argv = {artifact.string()};
  opts.cwd = artifact.parent_path();
  opts.timeout = timeout;
  opts.address_space_limit = limits_.address_space;
  opts.max_output = limits_.max_output;
  opts.scrub_env = limits_.scrub_env;

  auto pr = run_process(opts);
  ExecutionResult r;
  r.phase = Phase::Run;
  r.stdout_text = std::move(pr.stdout_text);
  r.stderr_text = std::move(pr.stderr_text);
  r.exit_code = pr.exit_code;
  r.signal = pr.signal;
  r.duration = pr.duration;
  r.output_truncated = pr.output_truncated;
  if (pr.timed_out) {
    r.status = ExecStatus::Timeout;
    r.error_type = ErrorType::Unknown;
  } else if (pr.output_truncated) {
    r.status = ExecStatus::RuntimeError;
    r.error_type = ErrorType::Unknown;
    r.stderr_text += "\noutput limit exceeded";
  } else if (pr.signal || pr.exit_code != 0) {
    r.status = ExecStatus::RuntimeError;
    r.error_type = classifier_->classify(r.stderr_text, Phase::Run);
  } else {
    r.status = ExecStatus::Ok;
  }
  return r;
}

HarnessOutcome ProcessRunner::execute(const HarnessUnit& unit) {
  ScratchDir scratch(scratch_root_, keep_scratch_);
  if (keep_scratch_) spdlog::debug("{}: scratch kept at {}", unit.function_id, scratch.path().string());
  HarnessOutcome outcome;
  fs::path artifact;
  outcome.compile = compile(unit, scratch.path(), artifact);
  if (outcome.compile.ok()) outcome.run = run(artifact, limits_.run_timeout);
  return outcome;
}

void ProcessRunner::check_toolchain(Backend backend) const {
  auto it = specs_.find(backend);
  if (it == specs_.end())
    throw ConfigError("no compiler configured for backend " + std::string(to_string(backend)));
  ProcessOptions opts;
  opts.argv = {it->second.compiler_path, "--version"};
  opts.timeout = 30;
  auto pr = run_process(opts);
  if (pr.exit_code != 0)
    throw ConfigError("compiler '" + it->second.compiler_path + "' for backend " +
                      std::string(to_string(backend)) + " is not usable");
}

namespace {

std::map<std::string, HarnessOutcome> load_transcripts(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read transcripts: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json_io::outcomes_from_json(json_io::parse(ss.str()));
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

ReplayRunner::ReplayRunner(const fs::path& transcripts) : outcomes_(load_transcripts(transcripts)) {}

ReplayRunner::ReplayRunner(std::map<std::string, HarnessOutcome> outcomes)
    : outcomes_(std::move(outcomes)) {}

HarnessOutcome ReplayRunner::execute(const HarnessUnit& unit) {
  auto it = outcomes_.find(unit.digest());
  if (it == outcomes_.end())
    throw ConfigError("no recorded outcome for harness of " + unit.function_id + " (" +
                      std::string(to_string(unit.backend)) + ", digest " + unit.digest().substr(0, 12) + ")");
  return it->second;
}

RecordingRunner::RecordingRunner(std::shared_ptr<HarnessRunner> inner) : inner_(std::move(inner)) {}

HarnessOutcome RecordingRunner::execute(const HarnessUnit& unit) {
  auto outcome = inner_->execute(unit);
  std::lock_guard lock(mu_);
  outcomes_[unit.digest()] = outcome;
  return outcome;
}

void RecordingRunner::save(const fs::path& path) const {
  std::map<std::string, HarnessOutcome> merged;
  std::error_code ec;
  if (fs::exists(path, ec)) merged = load_transcripts(path);
  {
    std::lock_guard lock(mu_);
    for (const auto& [k, v] : outcomes_) merged[k] = v;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << json_io::outcomes_to_json(merged).dump(1) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

WorkerPool::WorkerPool(int workers) {
  if (workers < 1) throw std::invalid_argument("worker count must be at least 1");
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::loop() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    job();
  }
}

}  // namespace coverify
