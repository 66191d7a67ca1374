#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "coverify/corpus.hpp"
#include "coverify/errors.hpp"
#include "coverify/types.hpp"

namespace coverify {

enum class Task { Translate, GenTests, GenWrapper };
enum class PromptMode { TaskPrompt, OneShot };

std::string_view to_string(Task task) noexcept;
std::string_view to_string(PromptMode mode) noexcept;
std::optional<PromptMode> parse_prompt_mode(std::string_view text) noexcept;

/// Connection and sampling settings for one chat-completions endpoint.
struct ModelEndpoint {
  std::string base_url;
  std::string model_name;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 2048;
  double request_timeout = 120.0;  // seconds
  int max_retries = 3;
  int concurrency_limit = 4;
  /// Environment variable holding the bearer token; empty for none.
  std::string api_key_env;
  /// Trained endpoints take task prompts, generic ones the one-shot variants.
  PromptMode prompt_mode = PromptMode::TaskPrompt;
  std::chrono::milliseconds retry_base_delay{500};
  std::chrono::milliseconds retry_max_delay{8000};

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct PromptTemplate {
  Task task = Task::Translate;
  PromptMode mode = PromptMode::TaskPrompt;
  std::optional<Direction> direction;
  /// System message; empty means none is sent.
  std::string system;
  /// User message. Placeholders: {source_code}, {source_lang},
  /// {target_lang}, {n_tests}.
  std::string body;

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Routing metadata that travels with a request. Ignored by HTTP endpoints;
/// the mock endpoint uses it to find canned responses.
struct RequestContext {
  Task task = Task::Translate;
  std::string function_id;
  std::string function_name;
  int sample_index = 0;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 2048;
  RequestContext context;

  /// JSON body in the chat-completions shape.
  std::string body_json() const;
  /// SHA-256 over model and messages; sample-independent.
  std::string hash() const;
};

struct HttpReply {
  int status = 0;  // 0 for transport failures
  std::string body;
};

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  virtual HttpReply post(const ChatRequest& request) = 0;
  virtual std::string describe() const = 0;
};

/// POSTs to {base_url}/chat/completions.
class HttpChatEndpoint final : public ChatEndpoint {
 public:
  explicit HttpChatEndpoint(ModelEndpoint config);
  HttpReply post(const ChatRequest& request) override;
  std::string describe() const override;

 private:
  ModelEndpoint config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string bearer_;
};

/// Deterministic offline endpoint. Responses are looked up by, in order:
/// the request hash, "<task>/<function_id>", "<task>/<function_name>", then
/// the default response. A key may hold several responses; sample i gets
/// entry i modulo their count. Unknown requests get HTTP 404.
class MockEndpoint final : public ChatEndpoint {
 public:
  MockEndpoint() = default;

  /// Reads {"responses": {key: text | [text...]}, "default": text}.
  static std::shared_ptr<MockEndpoint> from_file(const std::filesystem::path& path);

  void add(std::string key, std::vector<std::string> responses);
  void set_default(std::string response);
  /// Statuses returned (without a body) by the next calls, before normal
  /// service resumes. Lets tests drive the retry path.
  void script_statuses(std::vector<int> statuses);

  HttpReply post(const ChatRequest& request) override;
  std::string describe() const override { return "mock"; }

  std::size_t calls() const;
  /// Every response text actually served, in call order.
  std::vector<std::string> served() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::optional<std::string> default_;
  std::vector<int> scripted_;
  std::size_t calls_ = 0;
  std::vector<std::string> served_;
};

struct TestCase {
  int index = 1;
  std::string snippet;

  bool operator==(const TestCase&) const = default;
};

struct TestSuite {
  std::string function_id;
  std::vector<TestCase> cases;

  bool operator==(const TestSuite&) const = default;
};

/// One translation sample. `source` is empty when extraction failed; then
/// `error` says why and the sample counts as non-passing downstream.
struct Candidate {
  int sample_index = 0;
  std::optional<std::string> source;
  std::string raw;
  std::string error;

  bool ok() const noexcept { return source.has_value(); }
};

struct RetryEvent {
  int attempt = 0;  // 1-based attempt that failed
  int status = 0;
  std::string reason;
  std::chrono::milliseconds delay{0};
};

/// Payload between the first `open_tag` and the next `close_tag`, trimmed.
/// Throws ExtractionError when either tag is missing.
std::string extract_tagged(std::string_view text, std::string_view open_tag,
                           std::string_view close_tag);

/// Splits raw tester output on "//Input case n:" markers. Cases are taken in
/// order of appearance and reindexed 1..n. Each case must hold exactly one
/// harness invocation; a bare call to one of `callee_names` is rewritten into
/// `wrapper(name, ...)`. Throws ExtractionError (carrying `raw`) when fewer
/// than `n_tests` markers are present or a case has no unique invocation.
TestSuite split_test_cases(std::string_view raw, std::string function_id, int n_tests,
                           const std::vector<std::string>& callee_names);

/// Inverse of split_test_cases: "//Input case k:" followed by each snippet.
std::string serialize_suite(const TestSuite& suite);

/// Built-in prompts plus optional overrides read from a directory.
class PromptLibrary {
 public:
  PromptLibrary();

  /// Files named `<task>.<mode>[.<direction>].{system,user}.txt` replace the
  /// corresponding built-in text, e.g. `translate.one_shot.C_to_CUDA.user.txt`.
  void load_overrides(const std::filesystem::path& dir);

  const PromptTemplate& get(Task task, PromptMode mode,
                            std::optional<Direction> direction = std::nullopt) const;

  /// Rendered chat messages for a unit. `n_tests` is only used by gen_tests.
  std::vector<ChatMessage> render(Task task, PromptMode mode, const FunctionUnit& fn,
                                  std::optional<Direction> direction = std::nullopt,
                                  int n_tests = 5) const;

 private:
  std::vector<PromptTemplate> templates_;
};

class InterfaceMismatch : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};

/// Obtains translations, test suites and kernel wrappers from one endpoint.
/// Safe to call from several threads; at most `concurrency_limit` requests
/// are in flight at once.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatEndpoint> endpoint, ModelEndpoint config,
          PromptLibrary prompts = {}, std::uint64_t seed = 0);

  /// Exactly `n_samples` candidates in sample order. Throws EndpointError
  /// when the endpoint fails past the retry budget and ExtractionError when
  /// no sample could be extracted.
  std::vector<Candidate> request_translation(const FunctionUnit& fn, Direction direction,
                                             int n_samples);

  TestSuite request_tests(const FunctionUnit& fn, int n_tests = 5);

  /// Asks for a host wrapper of a kernel, checks that its parameter names
  /// and order match the kernel, and stores it into `fn.wrapper_source`.
  std::string request_cuda_wrapper(FunctionUnit& fn);

  std::vector<RetryEvent> retry_events() const;
  const ModelEndpoint& config() const noexcept { return config_; }
  const PromptLibrary& prompts() const noexcept { return prompts_; }

 private:
  std::string complete(ChatRequest request);
  ChatRequest make_request(std::vector<ChatMessage> messages, RequestContext ctx) const;

  std::shared_ptr<ChatEndpoint> endpoint_;
  ModelEndpoint config_;
  PromptLibrary prompts_;
  std::counting_semaphore<> in_flight_;
  mutable std::mutex mu_;
  std::vector<RetryEvent> events_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
};

}  // namespace coverify
