#include "backforth/gateway.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "backforth/corpus.hpp"
#include "backforth/log.hpp"

namespace backforth {

namespace {

using nlohmann::json;

std::string endpoint_key(const EndpointConfig& e) {
  return e.base_url + "|" + e.model_name;
}

// A retryable reply is a transport failure, a 5xx, or a body the completion
// parser cannot read. 4xx is the caller's bug or quota; retrying won't help.
bool retryable_status(int status) { return status == 0 || status >= 500; }

struct ParsedCompletion {
  bool ok = false;
  std::string text;
  std::string error;
};

ParsedCompletion parse_completion_body(const std::string& body, bool chat_format) {
  ParsedCompletion out;
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    out.error = "response body is not a JSON object";
    return out;
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    out.error = "response body has no choices";
    return out;
  }
  const json& first = doc["choices"][0];
  if (chat_format) {
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
      out.error = "first choice has no message content";
      return out;
    }
    out.ok = true;
    out.text = first["message"]["content"].get<std::string>();
    return out;
  }
  if (!first.is_object() || !first.contains("text") || !first["text"].is_string()) {
    out.error = "first choice has no text field";
    return out;
  }
  out.ok = true;
  out.text = first["text"].get<std::string>();
  return out;
}

}  // namespace

// --- HTTP transport ---------------------------------------------------------

namespace {

class HttpCompletionTransport final : public CompletionTransport {
 public:
  TransportReply post(const EndpointConfig& endpoint, const std::string& payload) override {
    httplib::Client client(endpoint.base_url);
    const auto seconds = static_cast<time_t>(endpoint.timeout_seconds);
    const auto usec = static_cast<time_t>(
        (endpoint.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
    client.set_write_timeout(seconds, usec);

    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }

    auto res = client.Post(endpoint.completion_path, headers, payload, "application/json");
    TransportReply reply;
    if (!res) {
      reply.status = 0;
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  }
};

}  // namespace

std::shared_ptr<CompletionTransport> make_http_transport() {
  return std::make_shared<HttpCompletionTransport>();
}

// Used by the "remote" token estimator in corpus.cpp.
std::uint64_t remote_token_count(const std::string& url, const std::string& text) {
  httplib::Client client(url);
  client.set_read_timeout(60, 0);
  json payload = {{"text", text}};
  auto res = client.Post("/tokenize", payload.dump(), "application/json");
  if (!res || res->status != 200) {
    throw std::runtime_error("remote tokenizer call failed: " +
                             (res ? "HTTP " + std::to_string(res->status)
                                  : httplib::to_string(res.error())));
  }
  json doc = json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("count") || !doc["count"].is_number_unsigned()) {
    throw std::runtime_error("remote tokenizer returned an unreadable body");
  }
  return doc["count"].get<std::uint64_t>();
}

// --- Gateway ----------------------------------------------------------------

// Runtime-sized counting semaphore; one per endpoint, shared by every caller.
class InferenceGateway::Limiter {
 public:
  explicit Limiter(std::uint32_t slots) : slots_(slots == 0 ? 1 : slots) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_use_ < slots_; });
    ++in_use_;
  }

  void release() {
    {
      std::lock_guard lock(mutex_);
      --in_use_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint32_t slots_;
  std::uint32_t in_use_ = 0;
};

InferenceGateway::InferenceGateway(std::shared_ptr<CompletionTransport> transport)
    : transport_(std::move(transport)),
      sleep_([](std::uint64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }) {}

void InferenceGateway::set_sleep_hook(std::function<void(std::uint64_t)> hook) {
  sleep_ = std::move(hook);
}

std::shared_ptr<InferenceGateway::Limiter> InferenceGateway::limiter_for(
    const EndpointConfig& endpoint) {
  std::lock_guard lock(mutex_);
  auto& slot = limiters_[endpoint_key(endpoint)];
  if (!slot) slot = std::make_shared<Limiter>(endpoint.max_concurrency);
  return slot;
}

std::uint64_t InferenceGateway::backoff_delay_ms(const EndpointConfig& endpoint,
                                                 std::uint32_t attempt) {
  // Exponential with full jitter: uniform in [0, min(cap, base * 2^attempt)].
  std::uint64_t ceiling = endpoint.backoff_base_ms;
  for (std::uint32_t i = 0; i < attempt && ceiling < endpoint.backoff_cap_ms; ++i) ceiling *= 2;
  ceiling = std::min(ceiling, endpoint.backoff_cap_ms);
  if (ceiling == 0) return 0;
  std::lock_guard lock(mutex_);
  return detail::bounded_uniform(jitter_rng_, ceiling + 1);
}

LlmResult InferenceGateway::complete(const LlmRequest& request, const EndpointConfig& endpoint) {
  LlmResult result;
  result.request_id = request.request_id;
  const auto started = std::chrono::steady_clock::now();

  if (request.prompt.empty()) {
    result.failed = true;
    result.failure_reason = "empty prompt";
    return result;
  }

  json payload = {{"model", endpoint.model_name},
                  {"temperature", request.params.temperature},
                  {"top_p", request.params.top_p},
                  {"max_tokens", request.params.max_new_tokens}};
  if (endpoint.chat_format) {
    payload["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
  } else {
    payload["prompt"] = request.prompt;
  }
  const std::string body = payload.dump();

  auto limiter = limiter_for(endpoint);
  std::string last_error;

  for (std::uint32_t attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) sleep_(backoff_delay_ms(endpoint, attempt - 1));
    ++result.attempts;

    limiter->acquire();
    TransportReply reply = transport_->post(endpoint, body);
    limiter->release();

    if (reply.status == 200) {
      ParsedCompletion parsed = parse_completion_body(reply.body, endpoint.chat_format);
      if (parsed.ok) {
        result.completion = std::move(parsed.text);
        result.failed = false;
        result.latency_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started)
                .count());
        return result;
      }
      last_error = parsed.error;  // malformed body counts as retryable
      continue;
    }

    if (reply.status == 0) {
      last_error = "transport: " + reply.error;
      continue;
    }
    if (retryable_status(reply.status)) {
      last_error = "HTTP " + std::to_string(reply.status);
      continue;
    }

    // 4xx: terminal.
    result.failed = true;
    result.failure_reason = "HTTP " + std::to_string(reply.status);
    result.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started)
            .count());
    return result;
  }

  result.failed = true;
  result.failure_reason = "retries exhausted: " + last_error;
  result.latency_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                            started)
          .count());
  return result;
}

std::vector<LlmResult> InferenceGateway::complete_batch(const std::vector<LlmRequest>& requests,
                                                        const EndpointConfig& endpoint) {
  std::vector<LlmResult> results(requests.size());
  if (requests.empty()) return results;

  const std::size_t workers =
      std::min<std::size_t>(requests.size(), std::max<std::uint32_t>(endpoint.max_concurrency, 1));
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      results[i] = complete(requests[i], endpoint);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace backforth
