#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "backforth/corpus.hpp"
#include "backforth/gateway.hpp"

namespace backforth {

enum class PairStatus {
  ingested,
  backtranslated,
  scored,
  filtered_out,
  rewritten,
  rewrite_failed,
  distilled,
};

std::string to_string(PairStatus status);
PairStatus pair_status_from_string(const std::string& name);

/// The evolving record for one document as it moves through the pipeline:
/// generated instruction, model-assigned score, rewritten/distilled responses.
struct CandidatePair {
  std::string doc_id;
  std::string doc_source;
  std::uint64_t token_estimate = 0;
  std::optional<std::string> instruction;
  std::string response_initial;
  std::optional<int> score;                      // 1..5 when present
  std::optional<std::string> score_raw;          // verbatim scoring completion
  std::optional<std::string> response_rewritten;
  std::optional<std::string> response_distilled;
  PairStatus status = PairStatus::ingested;
  bool failed = false;          // the last stage attempt failed; retried on resume
  std::string failure_reason;

  bool operator==(const CandidatePair&) const = default;
};

CandidatePair make_candidate(const Document& doc);

std::string trim_copy(std::string_view s);

/// A prompt body with named placeholders (<response>, <instruction>). Rendering
/// substitutes values in a single left-to-right pass, so placeholder-looking
/// text inside a value is never re-expanded. A placeholder present in the body
/// but missing from the values is an error.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string body);
  static PromptTemplate from_file(const std::string& name, const std::string& path);

  std::string render(const std::map<std::string, std::string>& values) const;

  const std::string& name() const { return name_; }
  const std::string& body() const { return body_; }

 private:
  std::string name_;
  std::string body_;
};

const std::string& default_backtranslation_template();
const std::string& default_scoring_template();
const std::string& default_rewrite_template();

struct StageTemplates {
  PromptTemplate backtranslation;
  PromptTemplate scoring;
  PromptTemplate rewrite;

  static StageTemplates defaults();
};

std::string build_backtranslation_prompt(const std::string& response_text,
                                         const PromptTemplate& tmpl);
std::string build_backtranslation_prompt(const std::string& response_text);

std::string build_scoring_prompt(const std::string& instruction, const std::string& response,
                                 const PromptTemplate& tmpl);
std::string build_scoring_prompt(const std::string& instruction, const std::string& response);

std::string build_rewrite_prompt(const std::string& instruction,
                                 const std::string& draft_response, const PromptTemplate& tmpl);
std::string build_rewrite_prompt(const std::string& instruction,
                                 const std::string& draft_response);

/// Extraction rules applied in fixed order, first match wins:
///   E1  "score" (any case), optional punctuation/space, then a digit 1-5
///   E2  a digit 1-5, optional space, then "/5" or "out of 5"
///   E3  the trimmed completion begins with a standalone digit 1-5
/// No match -> absent. Never throws.
std::optional<int> extract_score(const std::string& completion);

/// Text between the first [RES] and the first [/RES] after it, trimmed; with an
/// unpaired [RES], everything after it; otherwise absent.
std::optional<std::string> extract_rewrite(const std::string& completion);

// Request builders and result appliers, split so the orchestrator can batch
// endpoint calls. The *_response/_pair drivers below compose them for one pair.
LlmRequest make_backtranslation_request(const CandidatePair& pair, const SamplingParams& params,
                                        const PromptTemplate& tmpl);
CandidatePair apply_backtranslation(CandidatePair pair, const LlmResult& result);

LlmRequest make_scoring_request(const CandidatePair& pair, const SamplingParams& params,
                                const PromptTemplate& tmpl);
CandidatePair apply_scoring(CandidatePair pair, const LlmResult& result);

LlmRequest make_rewrite_request(const CandidatePair& pair, const SamplingParams& params,
                                const PromptTemplate& tmpl);
/// `final_attempt` false: an extraction miss leaves the pair unchanged and
/// signals the caller to retry once. True: a miss becomes rewrite_failed.
struct RewriteApply {
  CandidatePair pair;
  bool retry_extraction = false;
};
RewriteApply apply_rewrite(CandidatePair pair, const LlmResult& result, bool final_attempt);

LlmRequest make_distill_request(const CandidatePair& pair, const SamplingParams& params);
CandidatePair apply_distill(CandidatePair pair, const LlmResult& result);

// Single-pair stage drivers. Re-running one on a pair that already carries the
// stage result is a no-op (no endpoint call). Genuine precondition violations
// (wrong upstream status, missing fields) throw std::invalid_argument.
CandidatePair generate_instruction(const CandidatePair& pair, InferenceGateway& gateway,
                                   const EndpointConfig& endpoint, const SamplingParams& params,
                                   const PromptTemplate& tmpl);
CandidatePair score_pair(const CandidatePair& pair, InferenceGateway& gateway,
                         const EndpointConfig& endpoint, const SamplingParams& params,
                         const PromptTemplate& tmpl);
CandidatePair rewrite_response(const CandidatePair& pair, InferenceGateway& gateway,
                               const EndpointConfig& endpoint, const SamplingParams& params,
                               const PromptTemplate& tmpl);
CandidatePair distill_response(const CandidatePair& pair, InferenceGateway& gateway,
                               const EndpointConfig& endpoint, const SamplingParams& params);

}  // namespace backforth
