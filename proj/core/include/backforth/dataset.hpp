#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backforth/corpus.hpp"
#include "backforth/stages.hpp"

namespace backforth {

/// Source-tag sentences appended to every training instruction.
inline constexpr const char* kWebSearchTag = "Answer with knowledge from web search.";
inline constexpr const char* kAssistantTag = "Answer in the style of an AI Assistant.";

/// A human-curated (instruction, response) pair used to train the forward and
/// backward models and mixed into final datasets.
struct SeedPair {
  std::string instruction;
  std::string response;
  std::string language = "en";
  int rank = 0;

  bool operator==(const SeedPair&) const = default;
};

enum class SourceTag { seed_assistant, web_search };
std::string to_string(SourceTag tag);
SourceTag source_tag_from_string(const std::string& name);

struct Provenance {
  std::string doc_id;              // empty for seed records
  std::string variant;             // "seed", "initial", "rewritten", "distilled"
  std::optional<int> score;

  bool operator==(const Provenance&) const = default;
};

/// A fine-tuning-ready record; the tag sentence is already part of instruction.
struct DatasetRecord {
  std::string instruction;
  std::string response;
  SourceTag source_tag = SourceTag::web_search;
  Provenance provenance;

  bool operator==(const DatasetRecord&) const = default;
};

/// Reads conversation trees (one JSON object per line, shaped like the public
/// Open Assistant export: a root "prompt" message with nested "replies", each
/// message carrying role/text/lang/rank) and emits at most `limit` pairs of
/// (root prompt, rank-0 English first reply). Trees without such a reply are
/// skipped; malformed trees are skipped and logged.
std::vector<SeedPair> prepare_seed_pairs(const std::string& trees_path, std::size_t limit = 3200);
std::vector<SeedPair> prepare_seed_pairs(const std::vector<nlohmann::json>& trees,
                                         std::size_t limit = 3200);

enum class Direction { forward, backward };

/// forward: {input: instruction, target: response}; backward swaps them.
/// Line-delimited JSON; returns the number of records written.
std::size_t emit_direction_training(const std::vector<SeedPair>& pairs, Direction direction,
                                    const std::string& path);

struct Score5Split {
  std::vector<CandidatePair> kept;      // exactly the score-5 pairs
  std::vector<CandidatePair> rejected;  // status set to filtered_out
};

/// Retains exactly score-5 pairs; absent or invalid scores are excluded.
Score5Split filter_score5(std::vector<CandidatePair> pairs);

enum class ResponseField { initial, rewritten, distilled };
std::string to_string(ResponseField field);

/// Assembles the final dataset: seed records first (input order, assistant
/// tag), then web pairs ascending doc_id (web-search tag, the selected
/// response field). Pairs missing the field are skipped and logged, or fatal
/// in strict mode.
std::vector<DatasetRecord> build_finetune_dataset(const std::vector<CandidatePair>& pairs,
                                                  const std::vector<SeedPair>& seeds,
                                                  ResponseField field, bool strict = false);

/// Drops records whose instruction estimate exceeds max_tokens, then uniformly
/// samples n of the remainder (all of them, with a warning, when fewer remain).
std::vector<DatasetRecord> cap_instruction_length(const std::vector<DatasetRecord>& records,
                                                  std::uint64_t max_tokens, std::size_t n,
                                                  std::uint64_t seed,
                                                  const TokenEstimator& estimator);

/// One UTF-8 JSON object per line, stable field order; re-exporting identical
/// records is byte-identical. Returns the line count.
std::size_t export_jsonl(const std::vector<DatasetRecord>& records, const std::string& path);
std::vector<DatasetRecord> import_jsonl(const std::string& path);

nlohmann::ordered_json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& j);

}  // namespace backforth
