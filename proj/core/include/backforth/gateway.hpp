#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace backforth {

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.9;
  std::uint32_t max_new_tokens = 1024;
};

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;        // bearer credential read from this env var, if set
  double timeout_seconds = 60.0;
  std::uint32_t max_retries = 3;
  std::uint32_t max_concurrency = 8;
  std::string completion_path = "/v1/completions";
  // For endpoints that only speak the chat shape: the whole prompt goes out
  // verbatim as a single user message.
  bool chat_format = false;
  std::uint64_t backoff_base_ms = 1000;
  std::uint64_t backoff_cap_ms = 60000;
};

struct LlmRequest {
  std::string request_id;  // caller-assigned, unique per batch
  std::string prompt;      // non-empty; sent verbatim
  SamplingParams params;
};

/// Failures are values: a failed result carries the reason, never an exception,
/// so one bad record cannot abort a long batch run.
struct LlmResult {
  std::string request_id;
  std::string completion;
  std::uint32_t attempts = 0;
  std::uint64_t latency_ms = 0;
  bool failed = false;
  std::string failure_reason;
};

struct TransportReply {
  int status = 0;      // HTTP status; 0 means transport-level failure
  std::string body;
  std::string error;   // description when status == 0
};

/// One completion exchange with an endpoint. `payload` is the JSON request body.
class CompletionTransport {
 public:
  virtual ~CompletionTransport() = default;
  virtual TransportReply post(const EndpointConfig& endpoint, const std::string& payload) = 0;
};

std::shared_ptr<CompletionTransport> make_http_transport();

/// Uniform client for completion endpoints: bounded concurrency per endpoint,
/// retries with exponential backoff and full jitter on transport/5xx/timeout
/// failures (4xx is terminal), byte-exact prompt/completion pass-through.
class InferenceGateway {
 public:
  explicit InferenceGateway(std::shared_ptr<CompletionTransport> transport);

  LlmResult complete(const LlmRequest& request, const EndpointConfig& endpoint);

  /// Results come back in request order; at most endpoint.max_concurrency
  /// requests are in flight at any instant.
  std::vector<LlmResult> complete_batch(const std::vector<LlmRequest>& requests,
                                        const EndpointConfig& endpoint);

  /// Test hook: replaces the real backoff sleep.
  void set_sleep_hook(std::function<void(std::uint64_t)> hook);

 private:
  class Limiter;
  std::shared_ptr<Limiter> limiter_for(const EndpointConfig& endpoint);
  std::uint64_t backoff_delay_ms(const EndpointConfig& endpoint, std::uint32_t attempt);

  std::shared_ptr<CompletionTransport> transport_;
  std::function<void(std::uint64_t)> sleep_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Limiter>> limiters_;
  std::mt19937_64 jitter_rng_{std::random_device{}()};
};

}  // namespace backforth
