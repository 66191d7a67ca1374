#include <cmath>
#include <cstdlib>
#include <regex>

#include "httplib.h"

#include "coverify/gateway.hpp"

namespace coverify {

HttpChatEndpoint::HttpChatEndpoint(ModelEndpoint config) : config_(std::move(config)) {
  config_.validate();
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  std::string base = config_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  if (!std::regex_match(base, m, url))
    throw ConfigError("endpoint base_url is not an http(s) URL: " + config_.base_url);
  scheme_host_port_ = m[1];
  path_prefix_ = m[2];
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    bearer_ = key;
  }
}

HttpReply HttpChatEndpoint::post(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  auto secs = static_cast<time_t>(std::ceil(config_.request_timeout));
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  if (!bearer_.empty()) client.set_bearer_token_auth(bearer_);
  auto res = client.Post(path_prefix_ + "/chat/completions", request.body_json(), "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

std::string HttpChatEndpoint::describe() const {
  return config_.model_name + "@" + scheme_host_port_ + path_prefix_;
}

}  // namespace coverify
