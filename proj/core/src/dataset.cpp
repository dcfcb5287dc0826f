#include "backforth/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "backforth/log.hpp"

namespace backforth {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(SourceTag tag) {
  return tag == SourceTag::seed_assistant ? "seed_assistant" : "web_search";
}

SourceTag source_tag_from_string(const std::string& name) {
  if (name == "seed_assistant") return SourceTag::seed_assistant;
  if (name == "web_search") return SourceTag::web_search;
  throw std::invalid_argument("unknown source tag: " + name);
}

std::string to_string(ResponseField field) {
  switch (field) {
    case ResponseField::initial: return "initial";
    case ResponseField::rewritten: return "rewritten";
    case ResponseField::distilled: return "distilled";
  }
  return "initial";
}

// --- Seed pairs ---------------------------------------------------------------

namespace {

std::string message_lang(const json& message) {
  if (message.contains("lang") && message["lang"].is_string())
    return message["lang"].get<std::string>();
  if (message.contains("language") && message["language"].is_string())
    return message["language"].get<std::string>();
  return "";
}

std::optional<SeedPair> seed_pair_from_tree(const json& tree) {
  if (!tree.is_object() || !tree.contains("prompt") || !tree["prompt"].is_object())
    return std::nullopt;
  const json& root = tree["prompt"];
  if (!root.contains("text") || !root["text"].is_string()) return std::nullopt;
  const std::string prompt_text = root["text"].get<std::string>();
  if (trim_copy(prompt_text).empty()) return std::nullopt;
  if (!root.contains("replies") || !root["replies"].is_array()) return std::nullopt;

  for (const json& reply : root["replies"]) {
    if (!reply.is_object()) continue;
    if (reply.contains("role") && reply["role"].is_string() &&
        reply["role"].get<std::string>() != "assistant") {
      continue;
    }
    if (!reply.contains("rank") || !reply["rank"].is_number_integer() ||
        reply["rank"].get<int>() != 0) {
      continue;
    }
    if (message_lang(reply) != "en") continue;
    if (!reply.contains("text") || !reply["text"].is_string()) continue;
    const std::string reply_text = reply["text"].get<std::string>();
    if (trim_copy(reply_text).empty()) continue;

    SeedPair pair;
    pair.instruction = prompt_text;
    pair.response = reply_text;
    pair.language = "en";
    pair.rank = 0;
    return pair;
  }
  return std::nullopt;
}

}  // namespace

std::vector<SeedPair> prepare_seed_pairs(const std::vector<json>& trees, std::size_t limit) {
  std::vector<SeedPair> pairs;
  for (const json& tree : trees) {
    if (pairs.size() >= limit) break;
    if (auto pair = seed_pair_from_tree(tree)) pairs.push_back(std::move(*pair));
  }
  return pairs;
}

std::vector<SeedPair> prepare_seed_pairs(const std::string& trees_path, std::size_t limit) {
  std::ifstream in(trees_path);
  if (!in.is_open()) throw std::runtime_error("cannot open seed data: " + trees_path);
  std::vector<SeedPair> pairs;
  std::string line;
  std::size_t line_number = 0;
  while (pairs.size() < limit && std::getline(in, line)) {
    ++line_number;
    if (trim_copy(line).empty()) continue;
    json tree = json::parse(line, nullptr, false);
    if (tree.is_discarded()) {
      logging::warn(trees_path + ":" + std::to_string(line_number) +
                    ": malformed conversation tree (skipped)");
      continue;
    }
    if (auto pair = seed_pair_from_tree(tree)) pairs.push_back(std::move(*pair));
  }
  return pairs;
}

std::size_t emit_direction_training(const std::vector<SeedPair>& pairs, Direction direction,
                                    const std::string& path) {
  if (pairs.empty()) throw std::invalid_argument("no seed pairs to emit");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("cannot write training file: " + path);
  for (const SeedPair& pair : pairs) {
    ordered_json record;
    if (direction == Direction::forward) {
      record["input"] = pair.instruction;
      record["target"] = pair.response;
    } else {
      record["input"] = pair.response;
      record["target"] = pair.instruction;
    }
    out << record.dump() << "\n";
  }
  if (!out.good()) throw std::runtime_error("write failed: " + path);
  return pairs.size();
}

// --- Filtering and assembly ---------------------------------------------------

Score5Split filter_score5(std::vector<CandidatePair> pairs) {
  Score5Split split;
  for (CandidatePair& pair : pairs) {
    if (pair.score.has_value() && *pair.score == 5) {
      split.kept.push_back(std::move(pair));
    } else {
      pair.status = PairStatus::filtered_out;
      split.rejected.push_back(std::move(pair));
    }
  }
  return split;
}

namespace {

std::string selected_response(const CandidatePair& pair, ResponseField field) {
  switch (field) {
    case ResponseField::initial: return pair.response_initial;
    case ResponseField::rewritten: return pair.response_rewritten.value_or("");
    case ResponseField::distilled: return pair.response_distilled.value_or("");
  }
  return {};
}

}  // namespace

std::vector<DatasetRecord> build_finetune_dataset(const std::vector<CandidatePair>& pairs,
                                                  const std::vector<SeedPair>& seeds,
                                                  ResponseField field, bool strict) {
  std::vector<DatasetRecord> records;
  records.reserve(seeds.size() + pairs.size());

  for (const SeedPair& seed : seeds) {
    DatasetRecord record;
    record.instruction = seed.instruction + "\n" + kAssistantTag;
    record.response = seed.response;
    record.source_tag = SourceTag::seed_assistant;
    record.provenance.variant = "seed";
    records.push_back(std::move(record));
  }

  std::vector<const CandidatePair*> ordered;
  ordered.reserve(pairs.size());
  for (const CandidatePair& pair : pairs) ordered.push_back(&pair);
  std::sort(ordered.begin(), ordered.end(),
            [](const CandidatePair* a, const CandidatePair* b) { return a->doc_id < b->doc_id; });

  for (const CandidatePair* pair : ordered) {
    std::string response = selected_response(*pair, field);
    if (!pair->instruction.has_value() || response.empty()) {
      const std::string msg = "pair " + pair->doc_id + " lacks the " + to_string(field) +
                              " response (or an instruction); skipped";
      if (strict) throw std::runtime_error(msg);
      logging::warn(msg);
      continue;
    }
    DatasetRecord record;
    record.instruction = *pair->instruction + "\n" + kWebSearchTag;
    record.response = std::move(response);
    record.source_tag = SourceTag::web_search;
    record.provenance.doc_id = pair->doc_id;
    record.provenance.variant = to_string(field);
    record.provenance.score = pair->score;
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<DatasetRecord> cap_instruction_length(const std::vector<DatasetRecord>& records,
                                                  std::uint64_t max_tokens, std::size_t n,
                                                  std::uint64_t seed,
                                                  const TokenEstimator& estimator) {
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (estimator.count(records[i].instruction) <= max_tokens) survivors.push_back(i);
  }
  if (survivors.empty()) {
    logging::warn("length cap removed every record");
    return {};
  }
  if (survivors.size() <= n) {
    if (survivors.size() < n) {
      logging::warn("only " + std::to_string(survivors.size()) + " records remain after the " +
                    std::to_string(max_tokens) + "-token cap; requested " + std::to_string(n));
    }
    std::vector<DatasetRecord> out;
    out.reserve(survivors.size());
    for (std::size_t i : survivors) out.push_back(records[i]);
    return out;
  }

  Reservoir<std::size_t> reservoir(n, seed);
  for (std::size_t i : survivors) reservoir.offer(i);
  std::vector<std::size_t> picked = reservoir.take();
  std::sort(picked.begin(), picked.end());
  std::vector<DatasetRecord> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) out.push_back(records[i]);
  return out;
}

// --- JSONL export / import ------------------------------------------------------

ordered_json record_to_json(const DatasetRecord& record) {
  ordered_json j;
  j["instruction"] = record.instruction;
  j["response"] = record.response;
  j["source_tag"] = to_string(record.source_tag);
  ordered_json prov;
  prov["doc_id"] = record.provenance.doc_id;
  prov["variant"] = record.provenance.variant;
  if (record.provenance.score.has_value()) {
    prov["score"] = *record.provenance.score;
  } else {
    prov["score"] = nullptr;
  }
  j["provenance"] = prov;
  return j;
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord record;
  record.instruction = j.at("instruction").get<std::string>();
  record.response = j.at("response").get<std::string>();
  record.source_tag = source_tag_from_string(j.at("source_tag").get<std::string>());
  const json& prov = j.at("provenance");
  record.provenance.doc_id = prov.at("doc_id").get<std::string>();
  record.provenance.variant = prov.at("variant").get<std::string>();
  if (prov.contains("score") && !prov["score"].is_null()) {
    record.provenance.score = prov["score"].get<int>();
  }
  return record;
}

std::size_t export_jsonl(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("cannot write dataset: " + path);
  for (const DatasetRecord& record : records) {
    out << record_to_json(record).dump() << "\n";
  }
  if (!out.good()) throw std::runtime_error("write failed: " + path);
  return records.size();
}

std::vector<DatasetRecord> import_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("cannot open dataset: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim_copy(line).empty()) continue;
    records.push_back(record_from_json(json::parse(line)));
  }
  return records;
}

}  // namespace backforth
