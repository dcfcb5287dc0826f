#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backforth/gateway.hpp"

namespace backforth {

/// One scripted behavior: fires when every `contains` substring occurs in the
/// prompt. A rule either answers with `completion` or fails with `fail_status`
/// (0 = transport-level error). `times` > 0 consumes the rule after that many
/// uses; -1 means unlimited. `raw_body` overrides the response body verbatim,
/// for malformed-reply tests.
struct MockRule {
  std::vector<std::string> contains;
  std::optional<std::string> completion;
  int fail_status = 500;
  std::string raw_body;
  int times = -1;
};

/// In-process test double for a completion endpoint, scripted by ordered
/// (prompt-pattern -> completion | failure) rules. First matching live rule
/// wins. Also records enough to assert on call counts, prompt pass-through,
/// and peak in-flight concurrency.
class MockCompletionTransport final : public CompletionTransport {
 public:
  MockCompletionTransport() = default;

  static std::shared_ptr<MockCompletionTransport> from_file(const std::string& fixture_path);
  static std::shared_ptr<MockCompletionTransport> from_json(const nlohmann::json& fixture);

  void add_rule(MockRule rule);

  TransportReply post(const EndpointConfig& endpoint, const std::string& payload) override;

  std::uint64_t call_count() const { return calls_.load(); }
  int peak_in_flight() const { return peak_.load(); }
  std::vector<std::string> prompts() const;

  /// Holds each call open, so concurrent calls overlap measurably.
  void set_delay_ms(std::uint64_t ms) { delay_ms_ = ms; }

 private:
  mutable std::mutex mutex_;
  std::vector<MockRule> rules_;
  std::vector<std::string> seen_prompts_;
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::uint64_t delay_ms_ = 0;
};

}  // namespace backforth
