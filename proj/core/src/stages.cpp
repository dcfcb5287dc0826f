#include "backforth/stages.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace backforth {

namespace {

constexpr std::array<const char*, 7> kStatusNames = {
    "ingested",  "backtranslated", "scored",    "filtered_out",
    "rewritten", "rewrite_failed", "distilled",
};

}  // namespace

std::string to_string(PairStatus status) {
  return kStatusNames[static_cast<std::size_t>(status)];
}

PairStatus pair_status_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (name == kStatusNames[i]) return static_cast<PairStatus>(i);
  }
  throw std::invalid_argument("unknown pair status: " + name);
}

CandidatePair make_candidate(const Document& doc) {
  CandidatePair pair;
  pair.doc_id = doc.id;
  pair.doc_source = doc.source;
  pair.token_estimate = doc.token_estimate;
  pair.response_initial = doc.text;
  pair.status = PairStatus::ingested;
  return pair;
}

std::string trim_copy(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

// --- Prompt templates --------------------------------------------------------

const std::string& default_backtranslation_template() {
  static const std::string body =
      "[INST] Below is a candidate answer to a question or instruction from an user. "
      "Write the most likely question to which the text below would be a great answer.\n"
      "\n"
      "<response>\n"
      "\n"
      "Answer in the style of an AI Assistant. [/INST]";
  return body;
}

const std::string& default_scoring_template() {
  static const std::string body =
      "[INST] Below is an instruction and a candidate response. Evaluate whether the "
      "response is a high-quality, relevant and complete answer to the instruction, "
      "using an additive 5-point scale: award one point each for relevance, "
      "completeness, accuracy, clarity, and answering in the voice of a helpful AI "
      "Assistant.\n"
      "\n"
      "Instruction: <instruction>\n"
      "\n"
      "Response: <response>\n"
      "\n"
      "Briefly justify your evaluation. Conclude with the line: Score: <1-5> [/INST]";
  return body;
}

const std::string& default_rewrite_template() {
  static const std::string body =
      "[INST] Given the draft response to the provided question below, rewrite the "
      "draft to improve it, so it is a high quality response to the given question.\n"
      "\n"
      "Draft Response: <response>\n"
      "\n"
      "Question: <instruction>\n"
      "\n"
      "Given the above question, rewrite the draft response to be an improvement over "
      "the draft response. It should be as similar as possible, copying text where "
      "possible, while making the flow more clear, useful, relevant and providing a "
      "direct answer to the question. It should be written to be impeccably tailored "
      "to the user\xE2\x80\x99s question as if written by an AI Assistant, without "
      "extraneous information, reflecting expert knowledge, and demonstrating a "
      "high-quality, engaging, and insightful answer. Try not to add new facts that "
      "are not already in the draft response. Return the rewritten response between "
      "[RES] and [/RES]. [/INST]";
  return body;
}

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)) {}

PromptTemplate PromptTemplate::from_file(const std::string& name, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("cannot open template file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string body = buffer.str();
  // A trailing newline is an editor artifact, not prompt content.
  if (!body.empty() && body.back() == '\n') body.pop_back();
  return PromptTemplate(name, std::move(body));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  static const std::array<std::string, 2> known = {"response", "instruction"};
  for (const std::string& name : known) {
    const std::string token = "<" + name + ">";
    if (body_.find(token) != std::string::npos && values.find(name) == values.end()) {
      throw std::invalid_argument("template '" + name_ + "': placeholder " + token +
                                  " is unfilled");
    }
  }

  std::string out;
  out.reserve(body_.size());
  std::size_t pos = 0;
  while (pos < body_.size()) {
    std::size_t best = std::string::npos;
    std::size_t best_len = 0;
    const std::string* best_value = nullptr;
    for (const auto& [key, value] : values) {
      const std::string token = "<" + key + ">";
      const std::size_t found = body_.find(token, pos);
      if (found != std::string::npos && found < best) {
        best = found;
        best_len = token.size();
        best_value = &value;
      }
    }
    if (best == std::string::npos) {
      out.append(body_, pos, std::string::npos);
      break;
    }
    out.append(body_, pos, best - pos);
    out.append(*best_value);
    pos = best + best_len;
  }
  return out;
}

StageTemplates StageTemplates::defaults() {
  return StageTemplates{
      PromptTemplate("backtranslation", default_backtranslation_template()),
      PromptTemplate("scoring", default_scoring_template()),
      PromptTemplate("rewrite", default_rewrite_template()),
  };
}

std::string build_backtranslation_prompt(const std::string& response_text,
                                         const PromptTemplate& tmpl) {
  if (response_text.empty()) throw std::invalid_argument("response text is empty");
  return tmpl.render({{"response", response_text}});
}

std::string build_backtranslation_prompt(const std::string& response_text) {
  return build_backtranslation_prompt(
      response_text, PromptTemplate("backtranslation", default_backtranslation_template()));
}

std::string build_scoring_prompt(const std::string& instruction, const std::string& response,
                                 const PromptTemplate& tmpl) {
  if (instruction.empty()) throw std::invalid_argument("instruction is empty");
  if (response.empty()) throw std::invalid_argument("response is empty");
  return tmpl.render({{"instruction", instruction}, {"response", response}});
}

std::string build_scoring_prompt(const std::string& instruction, const std::string& response) {
  return build_scoring_prompt(instruction, response,
                              PromptTemplate("scoring", default_scoring_template()));
}

std::string build_rewrite_prompt(const std::string& instruction,
                                 const std::string& draft_response,
                                 const PromptTemplate& tmpl) {
  if (instruction.empty()) throw std::invalid_argument("instruction is empty");
  if (draft_response.empty()) throw std::invalid_argument("draft response is empty");
  return tmpl.render({{"instruction", instruction}, {"response", draft_response}});
}

std::string build_rewrite_prompt(const std::string& instruction,
                                 const std::string& draft_response) {
  return build_rewrite_prompt(instruction, draft_response,
                              PromptTemplate("rewrite", default_rewrite_template()));
}

// --- Completion parsing ------------------------------------------------------

std::optional<int> extract_score(const std::string& completion) {
  static const std::regex e1(R"(score[[:space:][:punct:]]*([1-5]))", std::regex::icase);
  static const std::regex e2(R"(([1-5])[[:space:]]*(/5|out of 5))");
  std::smatch m;
  if (std::regex_search(completion, m, e1)) return m[1].str()[0] - '0';
  if (std::regex_search(completion, m, e2)) return m[1].str()[0] - '0';
  const std::string t = trim_copy(completion);
  if (!t.empty() && t[0] >= '1' && t[0] <= '5' &&
      (t.size() == 1 || !std::isalnum(static_cast<unsigned char>(t[1])))) {
    return t[0] - '0';
  }
  return std::nullopt;
}

std::optional<std::string> extract_rewrite(const std::string& completion) {
  static const std::string open = "[RES]";
  static const std::string close = "[/RES]";
  const std::size_t begin = completion.find(open);
  if (begin == std::string::npos) return std::nullopt;
  const std::size_t content = begin + open.size();
  const std::size_t end = completion.find(close, content);
  if (end == std::string::npos) return trim_copy(completion.substr(content));
  return trim_copy(completion.substr(content, end - content));
}

// --- Stage request/apply pairs -----------------------------------------------

namespace {

CandidatePair flag_failed(CandidatePair pair, const LlmResult& result) {
  pair.failed = true;
  pair.failure_reason = result.failure_reason;
  return pair;
}

CandidatePair clear_failure(CandidatePair pair) {
  pair.failed = false;
  pair.failure_reason.clear();
  return pair;
}

}  // namespace

LlmRequest make_backtranslation_request(const CandidatePair& pair, const SamplingParams& params,
                                        const PromptTemplate& tmpl) {
  LlmRequest req;
  req.request_id = pair.doc_id;
  req.prompt = build_backtranslation_prompt(pair.response_initial, tmpl);
  req.params = params;
  return req;
}

CandidatePair apply_backtranslation(CandidatePair pair, const LlmResult& result) {
  if (result.failed) return flag_failed(std::move(pair), result);
  std::string instruction = trim_copy(result.completion);
  if (instruction.empty()) {
    pair.failed = true;
    pair.failure_reason = "blank instruction completion";
    return pair;
  }
  pair = clear_failure(std::move(pair));
  pair.instruction = std::move(instruction);
  pair.status = PairStatus::backtranslated;
  return pair;
}

LlmRequest make_scoring_request(const CandidatePair& pair, const SamplingParams& params,
                                const PromptTemplate& tmpl) {
  if (!pair.instruction.has_value())
    throw std::invalid_argument("pair " + pair.doc_id + " has no instruction to score");
  LlmRequest req;
  req.request_id = pair.doc_id;
  req.prompt = build_scoring_prompt(*pair.instruction, pair.response_initial, tmpl);
  req.params = params;
  return req;
}

CandidatePair apply_scoring(CandidatePair pair, const LlmResult& result) {
  if (result.failed) return flag_failed(std::move(pair), result);
  pair = clear_failure(std::move(pair));
  pair.score_raw = result.completion;  // verbatim, so validity statistics stay computable
  pair.score = extract_score(result.completion);
  pair.status = PairStatus::scored;
  return pair;
}

LlmRequest make_rewrite_request(const CandidatePair& pair, const SamplingParams& params,
                                const PromptTemplate& tmpl) {
  if (!pair.instruction.has_value())
    throw std::invalid_argument("pair " + pair.doc_id + " has no instruction to rewrite for");
  LlmRequest req;
  req.request_id = pair.doc_id;
  req.prompt = build_rewrite_prompt(*pair.instruction, pair.response_initial, tmpl);
  req.params = params;
  return req;
}

RewriteApply apply_rewrite(CandidatePair pair, const LlmResult& result, bool final_attempt) {
  if (result.failed) return {flag_failed(std::move(pair), result), false};
  std::optional<std::string> rewritten = extract_rewrite(result.completion);
  if (!rewritten.has_value() || rewritten->empty()) {
    if (!final_attempt) return {std::move(pair), true};
    pair = clear_failure(std::move(pair));
    pair.status = PairStatus::rewrite_failed;
    return {std::move(pair), false};
  }
  pair = clear_failure(std::move(pair));
  pair.response_rewritten = std::move(*rewritten);
  pair.status = PairStatus::rewritten;
  return {std::move(pair), false};
}

LlmRequest make_distill_request(const CandidatePair& pair, const SamplingParams& params) {
  if (!pair.instruction.has_value())
    throw std::invalid_argument("pair " + pair.doc_id + " has no instruction to distill from");
  LlmRequest req;
  req.request_id = pair.doc_id;
  req.prompt = *pair.instruction;  // the bare instruction, no draft
  req.params = params;
  return req;
}

CandidatePair apply_distill(CandidatePair pair, const LlmResult& result) {
  if (result.failed) return flag_failed(std::move(pair), result);
  std::string answer = trim_copy(result.completion);
  if (answer.empty()) {
    pair.failed = true;
    pair.failure_reason = "blank distill completion";
    return pair;
  }
  pair = clear_failure(std::move(pair));
  pair.response_distilled = std::move(answer);
  pair.status = PairStatus::distilled;
  return pair;
}

// --- Single-pair drivers -----------------------------------------------------

CandidatePair generate_instruction(const CandidatePair& pair, InferenceGateway& gateway,
                                   const EndpointConfig& endpoint, const SamplingParams& params,
                                   const PromptTemplate& tmpl) {
  if (pair.status != PairStatus::ingested) return pair;  // already carries an instruction
  const LlmRequest req = make_backtranslation_request(pair, params, tmpl);
  return apply_backtranslation(pair, gateway.complete(req, endpoint));
}

CandidatePair score_pair(const CandidatePair& pair, InferenceGateway& gateway,
                         const EndpointConfig& endpoint, const SamplingParams& params,
                         const PromptTemplate& tmpl) {
  if (pair.status == PairStatus::ingested)
    throw std::invalid_argument("pair " + pair.doc_id + " has not been backtranslated");
  if (pair.status != PairStatus::backtranslated) return pair;  // already scored or beyond
  const LlmRequest req = make_scoring_request(pair, params, tmpl);
  return apply_scoring(pair, gateway.complete(req, endpoint));
}

CandidatePair rewrite_response(const CandidatePair& pair, InferenceGateway& gateway,
                               const EndpointConfig& endpoint, const SamplingParams& params,
                               const PromptTemplate& tmpl) {
  if (pair.status == PairStatus::filtered_out)
    throw std::invalid_argument("pair " + pair.doc_id + " was filtered out");
  if (pair.status == PairStatus::ingested)
    throw std::invalid_argument("pair " + pair.doc_id + " has not been backtranslated");
  if (pair.status != PairStatus::scored && pair.status != PairStatus::backtranslated)
    return pair;  // already rewritten, rewrite_failed, or distilled

  const LlmRequest req = make_rewrite_request(pair, params, tmpl);
  RewriteApply first = apply_rewrite(pair, gateway.complete(req, endpoint), false);
  if (!first.retry_extraction) return first.pair;
  // One retry when the completion lacked usable [RES] markers.
  return apply_rewrite(std::move(first.pair), gateway.complete(req, endpoint), true).pair;
}

CandidatePair distill_response(const CandidatePair& pair, InferenceGateway& gateway,
                               const EndpointConfig& endpoint, const SamplingParams& params) {
  if (!pair.instruction.has_value())
    throw std::invalid_argument("pair " + pair.doc_id + " has no instruction");
  if (pair.response_distilled.has_value()) return pair;
  const LlmRequest req = make_distill_request(pair, params);
  return apply_distill(pair, gateway.complete(req, endpoint));
}

}  // namespace backforth
