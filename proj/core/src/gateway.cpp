#include <algorithm>
#include <atomic>
#include <future>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "coverify/gateway.hpp"
#include "json_io.hpp"

namespace coverify {

namespace {

bool retriable(int status) {
  return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

std::string reply_content(const std::string& body) {
  try {
    auto doc = json_io::parse(body);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw EndpointError("reply content is not text");
    return content.get<std::string>();
  } catch (const ParseError& e) {
    throw EndpointError(std::string("malformed endpoint reply: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("malformed endpoint reply: ") + e.what());
  }
}

// Runs fn(i) for i in [0, n) on up to `width` threads; the first exception
// wins and is rethrown after all workers finish.
template <class Fn>
void parallel_for(int n, int width, Fn fn) {
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::future<void>> workers;
  for (int w = 1; w < std::min(n, width); ++w) workers.push_back(std::async(std::launch::async, work));
  work();
  for (auto& f : workers) f.get();
  if (first) std::rethrow_exception(first);
}

}  // namespace

Gateway::Gateway(std::shared_ptr<ChatEndpoint> endpoint, ModelEndpoint config,
                 PromptLibrary prompts, std::uint64_t seed)
    : endpoint_(std::move(endpoint)),
      config_(std::move(config)),
      prompts_(std::move(prompts)),
      in_flight_(std::max(1, config_.concurrency_limit)),
      seed_(seed) {
  config_.validate();
  if (!endpoint_) throw ConfigError("gateway needs an endpoint");
}

ChatRequest Gateway::make_request(std::vector<ChatMessage> messages, RequestContext ctx) const {
  ChatRequest req;
  req.model = config_.model_name;
  req.messages = std::move(messages);
  req.temperature = config_.temperature;
  req.top_p = config_.top_p;
  req.top_k = config_.top_k;
  req.max_tokens = config_.max_tokens;
  req.context = std::move(ctx);
  return req;
}

std::string Gateway::complete(ChatRequest request) {
  const int attempts = config_.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    HttpReply reply;
    {
      in_flight_.acquire();
      try {
        reply = endpoint_->post(request);
      } catch (...) {
        in_flight_.release();
        throw;
      }
      in_flight_.release();
    }
    if (reply.status == 200) return reply_content(reply.body);

    std::string what = request.context.function_id + " " + std::string(to_string(request.context.task)) +
                       " sample " + std::to_string(request.context.sample_index) + ": HTTP " +
                       std::to_string(reply.status);
    if (!retriable(reply.status) || attempt >= attempts) {
      if (retriable(reply.status))
        what += " after " + std::to_string(attempts) + " attempts";
      throw EndpointError(what + (reply.body.empty() ? "" : " " + reply.body.substr(0, 200)));
    }

    std::chrono::milliseconds delay;
    {
      std::lock_guard lock(mu_);
      std::mt19937_64 rng(seed_ + 0x9e3779b97f4a7c15ULL * ++draws_);
      std::uniform_real_distribution<double> jitter(0.5, 1.0);
      double base = static_cast<double>(config_.retry_base_delay.count()) * std::ldexp(1.0, attempt - 1);
      base = std::min(base, static_cast<double>(config_.retry_max_delay.count()));
      delay = std::chrono::milliseconds(static_cast<long>(base * jitter(rng)));
      events_.push_back({attempt, reply.status, what, delay});
    }
    spdlog::warn("{}; retrying in {} ms", what, delay.count());
    std::this_thread::sleep_for(delay);
  }
}

std::vector<Candidate> Gateway::request_translation(const FunctionUnit& fn, Direction direction,
                                                    int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (source_language(direction) != fn.language)
    throw std::invalid_argument("direction " + std::string(to_string(direction)) +
                                " does not start from the language of " + fn.id);
  auto messages = prompts_.render(Task::Translate, config_.prompt_mode, fn, direction);
  const std::string target(display_name(target_language(direction)));

  std::vector<Candidate> out(n_samples);
  parallel_for(n_samples, config_.concurrency_limit, [&](int i) {
    auto req = make_request(messages, {Task::Translate, fn.id, fn.name, i});
    Candidate c;
    c.sample_index = i;
    c.raw = complete(std::move(req));
    try {
      c.source = extract_tagged(c.raw, "[" + target + "]", "[/" + target + "]");
    } catch (const ExtractionError&) {
      try {
        c.source = extract_tagged(c.raw, "[CODE]", "[/CODE]");
      } catch (const ExtractionError& e) {
        c.error = e.what();
      }
    }
    out[i] = std::move(c);
  });

  if (std::none_of(out.begin(), out.end(), [](const Candidate& c) { return c.ok(); }))
    throw ExtractionError(fn.id + ": no translation sample could be extracted (" +
                              out.front().error + ")",
                          out.front().raw);
  return out;
}

TestSuite Gateway::request_tests(const FunctionUnit& fn, int n_tests) {
  if (n_tests < 1) throw std::invalid_argument("n_tests must be >= 1");
  auto messages = prompts_.render(Task::GenTests, config_.prompt_mode, fn, std::nullopt, n_tests);
  auto raw = complete(make_request(std::move(messages), {Task::GenTests, fn.id, fn.name, 0}));
  std::vector<std::string> callees = {fn.name};
  if (fn.wrapper_source) {
    try {
      callees.push_back(parse_wrapper_signature(*fn.wrapper_source).name);
    } catch (const ParseError&) {
    }
  }
  return split_test_cases(raw, fn.id, n_tests, callees);
}

std::string Gateway::request_cuda_wrapper(FunctionUnit& fn) {
  if (fn.language != Language::CUDA || !fn.signature.is_kernel)
    throw std::invalid_argument(fn.id + " is not a CUDA kernel");
  auto messages = prompts_.render(Task::GenWrapper, config_.prompt_mode, fn);
  auto raw = complete(make_request(std::move(messages), {Task::GenWrapper, fn.id, fn.name, 0}));
  auto code = extract_tagged(raw, "[CODE]", "[/CODE]");

  Signature sig;
  try {
    sig = parse_wrapper_signature(code);
  } catch (const ParseError& e) {
    throw ExtractionError(fn.id + ": wrapper does not parse: " + e.what(), raw);
  }
  auto names = [](const Signature& s) {
    std::vector<std::string> v;
    for (const auto& p : s.params) v.push_back(p.name);
    return v;
  };
  if (names(sig) != names(fn.signature)) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return "(" + s + ")";
    };
    throw InterfaceMismatch(fn.id + ": wrapper " + sig.name + join(names(sig)) +
                                " does not match kernel " + fn.name + join(names(fn.signature)),
                            raw);
  }

  // Drop kernel copies repeated in the reply.
  std::string wrapper;
  for (const auto& chunk : split_function_definitions(code)) {
    try {
      auto s = parse_signature(chunk);
      if (s.is_kernel && s.name == fn.name) continue;
    } catch (const ParseError&) {
    }
    if (!wrapper.empty()) wrapper += "\n\n";
    wrapper += chunk;
  }
  while (!wrapper.empty() && (wrapper.front() == '\n' || wrapper.front() == ' '))
    wrapper.erase(wrapper.begin());
  fn.wrapper_source = wrapper;
  return wrapper;
}

std::vector<RetryEvent> Gateway::retry_events() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace coverify
