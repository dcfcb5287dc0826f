#include "backforth/mock_transport.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace backforth {

using nlohmann::json;

std::shared_ptr<MockCompletionTransport> MockCompletionTransport::from_file(
    const std::string& fixture_path) {
  std::ifstream in(fixture_path);
  if (!in.is_open()) throw std::runtime_error("cannot open mock fixture: " + fixture_path);
  json fixture;
  in >> fixture;
  return from_json(fixture);
}

std::shared_ptr<MockCompletionTransport> MockCompletionTransport::from_json(const json& fixture) {
  auto mock = std::make_shared<MockCompletionTransport>();
  if (!fixture.is_object() || !fixture.contains("rules") || !fixture["rules"].is_array()) {
    throw std::runtime_error("mock fixture must be an object with a rules array");
  }
  for (const json& entry : fixture["rules"]) {
    MockRule rule;
    if (entry.contains("contains")) {
      for (const json& s : entry["contains"]) rule.contains.push_back(s.get<std::string>());
    }
    if (entry.contains("completion")) rule.completion = entry["completion"].get<std::string>();
    if (entry.contains("fail_status")) rule.fail_status = entry["fail_status"].get<int>();
    if (entry.contains("raw_body")) rule.raw_body = entry["raw_body"].get<std::string>();
    if (entry.contains("times")) rule.times = entry["times"].get<int>();
    mock->add_rule(std::move(rule));
  }
  return mock;
}

void MockCompletionTransport::add_rule(MockRule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
}

std::vector<std::string> MockCompletionTransport::prompts() const {
  std::lock_guard lock(mutex_);
  return seen_prompts_;
}

TransportReply MockCompletionTransport::post(const EndpointConfig&, const std::string& payload) {
  calls_.fetch_add(1);
  const int now = in_flight_.fetch_add(1) + 1;
  int prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }

  if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));

  std::string prompt;
  bool chat_shape = false;
  json body = json::parse(payload, nullptr, false);
  if (!body.is_discarded() && body.is_object()) {
    if (body.contains("prompt") && body["prompt"].is_string()) {
      prompt = body["prompt"].get<std::string>();
    } else if (body.contains("messages") && body["messages"].is_array() &&
               !body["messages"].empty() && body["messages"][0].contains("content")) {
      prompt = body["messages"][0]["content"].get<std::string>();
      chat_shape = true;
    }
  }

  TransportReply reply;
  {
    std::lock_guard lock(mutex_);
    seen_prompts_.push_back(prompt);

    MockRule* matched = nullptr;
    for (MockRule& rule : rules_) {
      if (rule.times == 0) continue;
      bool all = true;
      for (const std::string& needle : rule.contains) {
        if (prompt.find(needle) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) {
        matched = &rule;
        break;
      }
    }

    if (matched == nullptr) {
      reply.status = 400;
      reply.body = R"({"error":"no mock rule matched"})";
    } else {
      if (matched->times > 0) --matched->times;
      if (!matched->raw_body.empty()) {
        reply.status = 200;
        reply.body = matched->raw_body;
      } else if (matched->completion.has_value()) {
        reply.status = 200;
        reply.body =
            chat_shape
                ? json{{"choices",
                        json::array({{{"message", {{"role", "assistant"},
                                                   {"content", *matched->completion}}}}})}}
                      .dump()
                : json{{"choices", json::array({{{"text", *matched->completion}}})}}.dump();
      } else if (matched->fail_status == 0) {
        reply.status = 0;
        reply.error = "scripted transport failure";
      } else {
        reply.status = matched->fail_status;
        reply.body = R"({"error":"scripted failure"})";
      }
    }
  }

  in_flight_.fetch_sub(1);
  return reply;
}

}  // namespace backforth
