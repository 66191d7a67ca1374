#include <fstream>
#include <sstream>

#include "coverify/gateway.hpp"
#include "coverify/hash.hpp"
#include "json_io.hpp"

namespace coverify {

using json_io::ordered_json;

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::Translate: return "translate";
    case Task::GenTests: return "gen_tests";
    case Task::GenWrapper: return "gen_wrapper";
  }
  return "translate";
}

std::string_view to_string(PromptMode mode) noexcept {
  return mode == PromptMode::OneShot ? "one_shot" : "task_prompt";
}

std::optional<PromptMode> parse_prompt_mode(std::string_view text) noexcept {
  if (text == "one_shot" || text == "one-shot") return PromptMode::OneShot;
  if (text == "task_prompt" || text == "task-prompt" || text == "task") return PromptMode::TaskPrompt;
  return std::nullopt;
}

void ModelEndpoint::validate() const {
  if (model_name.empty()) throw ConfigError("endpoint model_name is empty");
  if (!(temperature >= 0)) throw ConfigError("endpoint temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) throw ConfigError("endpoint top_p must be in (0, 1]");
  if (top_k && *top_k < 1) throw ConfigError("endpoint top_k must be >= 1");
  if (concurrency_limit < 1) throw ConfigError("endpoint concurrency_limit must be >= 1");
  if (max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
  if (max_tokens < 1) throw ConfigError("endpoint max_tokens must be >= 1");
  if (!(request_timeout > 0)) throw ConfigError("endpoint request_timeout must be > 0");
}

std::string ChatRequest::body_json() const {
  ordered_json body;
  body["model"] = model;
  auto& msgs = body["messages"] = ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = temperature;
  body["top_p"] = top_p;
  body["max_tokens"] = max_tokens;
  if (top_k) body["top_k"] = *top_k;
  return body.dump();
}

std::string ChatRequest::hash() const {
  ordered_json key;
  key["model"] = model;
  auto& msgs = key["messages"] = ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return sha256_hex(key.dump());
}

namespace {

std::string completion_body(const std::string& content) {
  ordered_json reply;
  reply["object"] = "chat.completion";
  reply["choices"] = ordered_json::array(
      {{{"index", 0},
        {"message", {{"role", "assistant"}, {"content", content}}},
        {"finish_reason", "stop"}}});
  return reply.dump();
}

}  // namespace

std::shared_ptr<MockEndpoint> MockEndpoint::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read mock responses: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto doc = json_io::parse(ss.str());
  if (!doc.is_object() || !doc.contains("responses") || !doc["responses"].is_object())
    throw ConfigError(path.string() + ": expected an object with a \"responses\" object");

  auto mock = std::make_shared<MockEndpoint>();
  for (const auto& [key, value] : doc["responses"].items()) {
    std::vector<std::string> texts;
    if (value.is_string()) {
      texts.push_back(value.get<std::string>());
    } else if (value.is_array() && !value.empty()) {
      for (const auto& v : value) {
        if (!v.is_string()) throw ConfigError(path.string() + ": response '" + key + "' is not text");
        texts.push_back(v.get<std::string>());
      }
    } else {
      throw ConfigError(path.string() + ": response '" + key + "' must be text or a list of text");
    }
    mock->add(key, std::move(texts));
  }
  if (doc.contains("default")) {
    if (!doc["default"].is_string()) throw ConfigError(path.string() + ": default must be text");
    mock->set_default(doc["default"].get<std::string>());
  }
  return mock;
}

void MockEndpoint::add(std::string key, std::vector<std::string> responses) {
  std::lock_guard lock(mu_);
  responses_[std::move(key)] = std::move(responses);
}

void MockEndpoint::set_default(std::string response) {
  std::lock_guard lock(mu_);
  default_ = std::move(response);
}

void MockEndpoint::script_statuses(std::vector<int> statuses) {
  std::lock_guard lock(mu_);
  scripted_.insert(scripted_.end(), statuses.begin(), statuses.end());
}

HttpReply MockEndpoint::post(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (!scripted_.empty()) {
    int status = scripted_.front();
    scripted_.erase(scripted_.begin());
    if (status != 200) return {status, ""};
  }
  const auto& ctx = request.context;
  const std::string task(to_string(ctx.task));
  const std::vector<std::string> keys = {request.hash(), task + "/" + ctx.function_id,
                                         task + "/" + ctx.function_name};
  for (const auto& key : keys) {
    auto it = responses_.find(key);
    if (it == responses_.end()) continue;
    const auto& list = it->second;
    const auto& text = list[static_cast<std::size_t>(ctx.sample_index) % list.size()];
    served_.push_back(text);
    return {200, completion_body(text)};
  }
  if (default_) {
    served_.push_back(*default_);
    return {200, completion_body(*default_)};
  }
  return {404, R"({"error":{"message":"no canned response"}})"};
}

std::size_t MockEndpoint::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<std::string> MockEndpoint::served() const {
  std::lock_guard lock(mu_);
  return served_;
}

}  // namespace coverify
