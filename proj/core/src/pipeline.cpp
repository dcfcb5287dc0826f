#include "backforth/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "backforth/embedding.hpp"
#include "backforth/log.hpp"
#include "backforth/mauve.hpp"

namespace backforth {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 8> kStageNames = {
    "ingest", "backtranslate", "score", "filter", "rewrite", "distill", "build", "analyze",
};

}  // namespace

std::string to_string(Stage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

Stage stage_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (name == kStageNames[i]) return static_cast<Stage>(i);
  }
  throw std::invalid_argument("unknown stage: " + name);
}

ordered_json manifest_to_json(const RunManifest& manifest) {
  ordered_json j;
  j["config_hash"] = manifest.config_hash;
  j["completed"] = manifest.completed;
  if (!manifest.error.empty()) j["error"] = manifest.error;
  ordered_json stages = ordered_json::object();
  for (const auto& [name, summary] : manifest.stages) {
    stages[name] = {{"processed", summary.processed},
                    {"succeeded", summary.succeeded},
                    {"failed", summary.failed},
                    {"skipped", summary.skipped}};
  }
  j["stages"] = stages;
  j["ingest_stats"] = {{"read_count", manifest.ingest_stats.read_count},
                       {"kept_count", manifest.ingest_stats.kept_count},
                       {"dropped_too_long", manifest.ingest_stats.dropped_too_long},
                       {"dropped_empty", manifest.ingest_stats.dropped_empty}};
  ordered_json counts = ordered_json::object();
  for (const auto& [file, count] : manifest.dataset_counts) counts[file] = count;
  j["dataset_counts"] = counts;
  j["analysis_report"] = manifest.analysis_report;
  return j;
}

// --- Pipeline ------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<CompletionTransport> transport)
    : config_(std::move(config)),
      gateway_(transport ? std::move(transport) : make_http_transport()),
      templates_(StageTemplates::defaults()),
      estimator_(make_token_estimator(config_.corpus.estimator, config_.corpus.tokenizer_url)) {
  if (!config_.templates.backtranslation.empty()) {
    templates_.backtranslation =
        PromptTemplate::from_file("backtranslation", config_.templates.backtranslation);
  }
  if (!config_.templates.scoring.empty()) {
    templates_.scoring = PromptTemplate::from_file("scoring", config_.templates.scoring);
  }
  if (!config_.templates.rewrite.empty()) {
    templates_.rewrite = PromptTemplate::from_file("rewrite", config_.templates.rewrite);
  }
}

Ledger Pipeline::open_ledger(bool force) const {
  const std::filesystem::path ledger_path(config_.paths.ledger);
  if (ledger_path.has_parent_path()) {
    std::filesystem::create_directories(ledger_path.parent_path());
  }
  return Ledger::open(config_.paths.ledger, config_hash(config_), force);
}

// Crash points sit at persist boundaries: every in-flight batch has been fully
// appended when the hook fires, so a resumed run never repeats a completed call.
void Pipeline::maybe_crash(const Ledger& ledger) const {
  if (crash_after_appends_ > 0 && ledger.appends_this_session() >= crash_after_appends_) {
    throw CrashInjected("injected crash after " +
                        std::to_string(ledger.appends_this_session()) + " appends");
  }
}

void Pipeline::append_checked(Ledger& ledger, const CandidatePair& pair) {
  ledger.append(pair);
  maybe_crash(ledger);
}

StageSummary Pipeline::run_stage(Stage stage, Ledger& ledger) {
  switch (stage) {
    case Stage::ingest: return stage_ingest(ledger);
    case Stage::backtranslate: return stage_backtranslate(ledger);
    case Stage::score: return stage_score(ledger);
    case Stage::filter: return stage_filter(ledger);
    case Stage::rewrite: return stage_rewrite(ledger);
    case Stage::distill: return stage_distill(ledger);
    case Stage::build: return stage_build(ledger);
    case Stage::analyze: return stage_analyze(ledger);
  }
  throw std::invalid_argument("unknown stage");
}

// --- ingest --------------------------------------------------------------------

StageSummary Pipeline::stage_ingest(Ledger& ledger) {
  StageSummary summary;

  StreamOptions options;
  options.text_field = config_.corpus.text_field;
  options.id_field = config_.corpus.id_field;
  options.strict = config_.strict;
  options.estimator = estimator_;
  DocumentStream stream(config_.corpus.path, config_.corpus.source_label, options);

  IngestStats stats;
  std::unordered_set<std::string> seen_ids;
  std::uint64_t duplicate_ids = 0;
  std::vector<Document> kept;
  std::optional<Reservoir<Document>> reservoir;
  if (config_.limits.max_pairs > 0) {
    reservoir.emplace(config_.limits.max_pairs, config_.seeds.sample_seed);
  }

  while (auto doc = stream.next()) {
    if (!seen_ids.insert(doc->id).second) {
      // Like malformed lines, duplicates sit outside the stats identity.
      logging::warn("duplicate document id " + doc->id + " (skipped)");
      ++duplicate_ids;
      continue;
    }
    if (doc->token_estimate > config_.corpus.max_tokens) {
      ++stats.dropped_too_long;
      continue;
    }
    ++stats.kept_count;
    if (reservoir.has_value()) {
      reservoir->offer(std::move(*doc));
    } else {
      kept.push_back(std::move(*doc));
    }
  }
  if (reservoir.has_value()) {
    kept = reservoir->take();
    std::sort(kept.begin(), kept.end(),
              [](const Document& a, const Document& b) { return a.id < b.id; });
  }

  // kept_count reflects the length filter; the max_pairs sample cap shows up
  // as the ledger entry count in the stage summary.
  stats.read_count = stream.stats().read_count - duplicate_ids;
  stats.dropped_empty = stream.stats().dropped_empty;
  last_ingest_stats_ = stats;

  // The enriched record file: the input shape with token_estimate added.
  std::filesystem::create_directories(config_.paths.output_dir);
  const std::string ingested_path =
      (std::filesystem::path(config_.paths.output_dir) / "ingested.jsonl").string();
  {
    std::ofstream out(ingested_path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw std::runtime_error("cannot write " + ingested_path);
    for (const Document& doc : kept) {
      ordered_json record;
      record["id"] = doc.id;
      record["text"] = doc.text;
      record["source"] = doc.source;
      record["token_estimate"] = doc.token_estimate;
      out << record.dump() << "\n";
    }
  }

  for (const Document& doc : kept) {
    if (ledger.state().count(doc.id) > 0) {
      ++summary.skipped;
      continue;
    }
    append_checked(ledger, make_candidate(doc));
    ++summary.processed;
    ++summary.succeeded;
  }
  return summary;
}

// --- model-driven stages ---------------------------------------------------------

namespace {

struct Eligibility {
  std::vector<CandidatePair> ready;
  std::uint64_t skipped = 0;
};

template <typename Pred>
Eligibility select_ready(const Ledger& ledger, Pred&& ready) {
  Eligibility out;
  for (const auto& [doc_id, entry] : ledger.state()) {
    if (ready(entry.payload)) {
      out.ready.push_back(entry.payload);
    } else {
      ++out.skipped;
    }
  }
  return out;  // std::map iteration keeps doc_id ascending
}

}  // namespace

StageSummary Pipeline::stage_backtranslate(Ledger& ledger) {
  const EndpointConfig& endpoint = endpoint_for_role(config_, "backward");
  Eligibility eligible = select_ready(ledger, [](const CandidatePair& pair) {
    return pair.status == PairStatus::ingested;
  });

  StageSummary summary;
  summary.skipped = eligible.skipped;
  const std::size_t chunk_size = std::max<std::size_t>(1, endpoint.max_concurrency * 4ull);
  std::uint64_t consecutive_failures = 0;

  for (std::size_t begin = 0; begin < eligible.ready.size(); begin += chunk_size) {
    const std::size_t end = std::min(begin + chunk_size, eligible.ready.size());
    std::vector<LlmRequest> requests;
    requests.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      requests.push_back(make_backtranslation_request(eligible.ready[i],
                                                      config_.sampling.backtranslate,
                                                      templates_.backtranslation));
    }
    const std::vector<LlmResult> results = gateway_.complete_batch(requests, endpoint);
    for (std::size_t i = begin; i < end; ++i) {
      CandidatePair updated = apply_backtranslation(eligible.ready[i], results[i - begin]);
      ledger.append(updated);
      ++summary.processed;
      if (updated.failed) {
        ++summary.failed;
        ++consecutive_failures;
      } else {
        ++summary.succeeded;
        consecutive_failures = 0;
      }
    }
    maybe_crash(ledger);
    if (consecutive_failures >= config_.limits.max_consecutive_failures) {
      throw std::runtime_error("backtranslate aborted: " +
                               std::to_string(consecutive_failures) +
                               " consecutive endpoint failures (resume after recovery)");
    }
  }
  return summary;
}

StageSummary Pipeline::stage_score(Ledger& ledger) {
  const EndpointConfig& endpoint = endpoint_for_role(config_, "forward");
  Eligibility eligible = select_ready(ledger, [](const CandidatePair& pair) {
    return pair.status == PairStatus::backtranslated && pair.instruction.has_value();
  });

  StageSummary summary;
  summary.skipped = eligible.skipped;
  const std::size_t chunk_size = std::max<std::size_t>(1, endpoint.max_concurrency * 4ull);
  std::uint64_t consecutive_failures = 0;

  for (std::size_t begin = 0; begin < eligible.ready.size(); begin += chunk_size) {
    const std::size_t end = std::min(begin + chunk_size, eligible.ready.size());
    std::vector<LlmRequest> requests;
    requests.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      requests.push_back(
          make_scoring_request(eligible.ready[i], config_.sampling.score, templates_.scoring));
    }
    const std::vector<LlmResult> results = gateway_.complete_batch(requests, endpoint);
    for (std::size_t i = begin; i < end; ++i) {
      CandidatePair updated = apply_scoring(eligible.ready[i], results[i - begin]);
      ledger.append(updated);
      ++summary.processed;
      if (updated.failed) {
        ++summary.failed;
        ++consecutive_failures;
      } else {
        ++summary.succeeded;
        consecutive_failures = 0;
      }
    }
    maybe_crash(ledger);
    if (consecutive_failures >= config_.limits.max_consecutive_failures) {
      throw std::runtime_error("score aborted: " + std::to_string(consecutive_failures) +
                               " consecutive endpoint failures (resume after recovery)");
    }
  }
  return summary;
}

StageSummary Pipeline::stage_filter(Ledger& ledger) {
  Eligibility eligible = select_ready(ledger, [](const CandidatePair& pair) {
    return pair.status == PairStatus::scored;
  });

  Score5Split split = filter_score5(std::move(eligible.ready));

  StageSummary summary;
  summary.skipped = eligible.skipped;
  summary.processed = split.kept.size() + split.rejected.size();
  summary.succeeded = summary.processed;
  for (const CandidatePair& rejected : split.rejected) {
    append_checked(ledger, rejected);  // kept pairs do not transition; no entry
  }
  return summary;
}

StageSummary Pipeline::stage_rewrite(Ledger& ledger) {
  const EndpointConfig& endpoint = endpoint_for_role(config_, "rewriter");
  // With filtering on, only pairs that survived the score-5 filter are
  // rewritten; without it, every backtranslated pair is.
  const bool filtering = config_.stages.filtering;
  Eligibility eligible = select_ready(ledger, [filtering](const CandidatePair& pair) {
    if (!pair.instruction.has_value()) return false;
    if (filtering) return pair.status == PairStatus::scored;
    return pair.status == PairStatus::backtranslated;
  });

  StageSummary summary;
  summary.skipped = eligible.skipped;
  const std::size_t chunk_size = std::max<std::size_t>(1, endpoint.max_concurrency * 4ull);
  std::uint64_t consecutive_failures = 0;

  for (std::size_t begin = 0; begin < eligible.ready.size(); begin += chunk_size) {
    const std::size_t end = std::min(begin + chunk_size, eligible.ready.size());
    std::vector<LlmRequest> requests;
    requests.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      requests.push_back(
          make_rewrite_request(eligible.ready[i], config_.sampling.rewrite, templates_.rewrite));
    }
    std::vector<LlmResult> results = gateway_.complete_batch(requests, endpoint);

    // First pass; completions without usable [RES] markers get one retry.
    std::vector<CandidatePair> updated(end - begin);
    std::vector<std::size_t> retries;
    for (std::size_t i = 0; i < results.size(); ++i) {
      RewriteApply applied = apply_rewrite(eligible.ready[begin + i], results[i], false);
      updated[i] = std::move(applied.pair);
      if (applied.retry_extraction) retries.push_back(i);
    }
    if (!retries.empty()) {
      std::vector<LlmRequest> retry_requests;
      retry_requests.reserve(retries.size());
      for (std::size_t i : retries) retry_requests.push_back(requests[i]);
      const std::vector<LlmResult> retry_results =
          gateway_.complete_batch(retry_requests, endpoint);
      for (std::size_t r = 0; r < retries.size(); ++r) {
        updated[retries[r]] =
            apply_rewrite(std::move(updated[retries[r]]), retry_results[r], true).pair;
      }
    }

    for (CandidatePair& pair : updated) {
      const bool transport_failed = pair.failed;
      ledger.append(pair);
      ++summary.processed;
      if (transport_failed) {
        ++summary.failed;
        ++consecutive_failures;
      } else {
        ++summary.succeeded;
        consecutive_failures = 0;
      }
    }
    maybe_crash(ledger);
    if (consecutive_failures >= config_.limits.max_consecutive_failures) {
      throw std::runtime_error("rewrite aborted: " + std::to_string(consecutive_failures) +
                               " consecutive endpoint failures (resume after recovery)");
    }
  }
  return summary;
}

StageSummary Pipeline::stage_distill(Ledger& ledger) {
  const EndpointConfig& endpoint = endpoint_for_role(config_, "rewriter");
  const bool filtering = config_.stages.filtering;
  Eligibility eligible = select_ready(ledger, [filtering](const CandidatePair& pair) {
    if (!pair.instruction.has_value()) return false;
    if (pair.response_distilled.has_value()) return false;
    switch (pair.status) {
      case PairStatus::scored:
      case PairStatus::rewritten:
      case PairStatus::rewrite_failed:
        return true;
      case PairStatus::backtranslated:
        return !filtering;  // unscored pairs are distilled only in unfiltered runs
      default:
        return false;
    }
  });

  StageSummary summary;
  summary.skipped = eligible.skipped;
  const std::size_t chunk_size = std::max<std::size_t>(1, endpoint.max_concurrency * 4ull);
  std::uint64_t consecutive_failures = 0;

  for (std::size_t begin = 0; begin < eligible.ready.size(); begin += chunk_size) {
    const std::size_t end = std::min(begin + chunk_size, eligible.ready.size());
    std::vector<LlmRequest> requests;
    requests.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      requests.push_back(make_distill_request(eligible.ready[i], config_.sampling.distill));
    }
    const std::vector<LlmResult> results = gateway_.complete_batch(requests, endpoint);
    for (std::size_t i = begin; i < end; ++i) {
      CandidatePair updated = apply_distill(eligible.ready[i], results[i - begin]);
      ledger.append(updated);
      ++summary.processed;
      if (updated.failed) {
        ++summary.failed;
        ++consecutive_failures;
      } else {
        ++summary.succeeded;
        consecutive_failures = 0;
      }
    }
    maybe_crash(ledger);
    if (consecutive_failures >= config_.limits.max_consecutive_failures) {
      throw std::runtime_error("distill aborted: " + std::to_string(consecutive_failures) +
                               " consecutive endpoint failures (resume after recovery)");
    }
  }
  return summary;
}

// --- build and analyze ------------------------------------------------------------

std::vector<SeedPair> Pipeline::load_seed_pairs() const {
  if (!config_.seed_data.has_value()) return {};
  return prepare_seed_pairs(config_.seed_data->path, config_.seed_data->limit);
}

std::vector<CandidatePair> Pipeline::dataset_pairs(const Ledger& ledger) const {
  std::vector<CandidatePair> pairs;
  for (const auto& [doc_id, entry] : ledger.state()) {
    const CandidatePair& pair = entry.payload;
    if (pair.status == PairStatus::ingested || pair.status == PairStatus::filtered_out) continue;
    if (!pair.instruction.has_value()) continue;
    if (config_.stages.filtering && (!pair.score.has_value() || *pair.score != 5)) continue;
    pairs.push_back(pair);
  }
  return pairs;
}

StageSummary Pipeline::stage_build(Ledger& ledger) {
  std::filesystem::create_directories(config_.paths.output_dir);
  const std::filesystem::path out_dir(config_.paths.output_dir);

  const std::vector<SeedPair> seeds = load_seed_pairs();
  last_dataset_counts_.clear();

  if (!seeds.empty()) {
    last_dataset_counts_["seed_forward.jsonl"] =
        emit_direction_training(seeds, Direction::forward, (out_dir / "seed_forward.jsonl").string());
    last_dataset_counts_["seed_backward.jsonl"] = emit_direction_training(
        seeds, Direction::backward, (out_dir / "seed_backward.jsonl").string());
  }

  const std::vector<CandidatePair> pairs = dataset_pairs(ledger);

  const auto export_variant = [&](ResponseField field, const std::string& file) {
    const std::vector<DatasetRecord> records =
        build_finetune_dataset(pairs, seeds, field, config_.strict);
    last_dataset_counts_[file] = export_jsonl(records, (out_dir / file).string());
  };

  export_variant(ResponseField::initial, "dataset_initial.jsonl");
  if (config_.stages.rewriting) export_variant(ResponseField::rewritten, "dataset_rewritten.jsonl");
  if (config_.stages.distilling) export_variant(ResponseField::distilled, "dataset_distilled.jsonl");

  StageSummary summary;
  summary.processed = pairs.size() + seeds.size();
  summary.succeeded = summary.processed;
  summary.skipped = ledger.state().size() - pairs.size();
  return summary;
}

namespace {

ordered_json length_stats_json(const LengthStats& stats) {
  // Reported to one decimal.
  const auto round1 = [](double v) { return std::round(v * 10.0) / 10.0; };
  return ordered_json{{"mean_instruction_tokens", round1(stats.mean_instruction_tokens)},
                      {"mean_response_tokens", round1(stats.mean_response_tokens)}};
}

void write_frontier_csv(const DivergenceCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("cannot write frontier csv: " + path);
  out << "x,y\n";
  for (const DivergencePoint& point : curve.points) {
    out << point.x << "," << point.y << "\n";
  }
}

}  // namespace

StageSummary Pipeline::stage_analyze(Ledger& ledger) {
  std::filesystem::create_directories(config_.paths.output_dir);
  const std::filesystem::path out_dir(config_.paths.output_dir);

  ordered_json report;
  ordered_json config_echo;
  config_echo["embedder"] = config_.analysis.embedder;
  config_echo["num_clusters"] = config_.analysis.num_clusters;
  config_echo["scaling_constant"] = config_.analysis.scaling_constant;
  config_echo["grid_size"] = config_.analysis.grid_size;
  config_echo["kmeans_seed"] = config_.seeds.kmeans_seed;
  config_echo["mauve_num_seeds"] = config_.analysis.mauve_num_seeds;
  config_echo["trigram_sample_n"] = config_.analysis.trigram_sample_n;
  config_echo["estimator"] = config_.corpus.estimator;
  report["config"] = config_echo;

  ordered_json metrics = ordered_json::object();
  std::uint64_t computed = 0;

  // Score distribution over everything that went through scoring.
  std::vector<CandidatePair> scored;
  for (const auto& [doc_id, entry] : ledger.state()) {
    if (entry.payload.score_raw.has_value()) scored.push_back(entry.payload);
  }
  if (!scored.empty()) {
    const ScoreHistogramReport hist = score_histogram(scored);
    ordered_json h;
    h["counts"] = hist.counts;
    h["invalid"] = hist.invalid;
    h["total"] = hist.total;
    h["valid_fraction"] = hist.valid_fraction;
    h["score5_fraction"] = hist.score5_fraction;
    metrics["score_histogram"] = h;
    ++computed;
  }

  const std::vector<CandidatePair> pairs = dataset_pairs(ledger);

  struct Variant {
    std::string name;
    std::vector<std::string> responses;
    std::vector<std::pair<std::string, std::string>> records;
  };
  std::vector<Variant> variants;
  const auto collect = [&](const std::string& name, auto field_of) {
    Variant variant;
    variant.name = name;
    for (const CandidatePair& pair : pairs) {
      const std::optional<std::string> value = field_of(pair);
      if (value.has_value() && !value->empty() && pair.instruction.has_value()) {
        variant.responses.push_back(*value);
        variant.records.emplace_back(*pair.instruction, *value);
      }
    }
    if (!variant.responses.empty()) variants.push_back(std::move(variant));
  };
  collect("initial", [](const CandidatePair& p) -> std::optional<std::string> {
    return p.response_initial;
  });
  collect("rewritten",
          [](const CandidatePair& p) -> std::optional<std::string> { return p.response_rewritten; });
  collect("distilled",
          [](const CandidatePair& p) -> std::optional<std::string> { return p.response_distilled; });

  if (!pairs.empty()) {
    std::vector<std::string> instructions;
    for (const CandidatePair& pair : pairs) instructions.push_back(*pair.instruction);
    ordered_json trigrams = ordered_json::object();
    trigrams["instructions"] = unique_trigrams(instructions, config_.analysis.trigram_sample_n,
                                               config_.seeds.sample_seed);
    for (const Variant& variant : variants) {
      trigrams["responses_" + variant.name] = unique_trigrams(
          variant.responses, config_.analysis.trigram_sample_n, config_.seeds.sample_seed);
    }
    metrics["unique_trigrams"] = trigrams;
    ++computed;

    ordered_json lengths = ordered_json::object();
    for (const Variant& variant : variants) {
      lengths[variant.name] = length_stats_json(length_stats(variant.records, *estimator_));
    }
    metrics["length_stats"] = lengths;
    ++computed;
  }

  // MAUVE between every pair of response variants present.
  MauveConfig mauve_config;
  mauve_config.num_clusters = config_.analysis.num_clusters;
  mauve_config.scaling_constant = config_.analysis.scaling_constant;
  mauve_config.grid_size = config_.analysis.grid_size;
  mauve_config.kmeans_max_iters = config_.analysis.kmeans_max_iters;
  mauve_config.kmeans_seed = config_.seeds.kmeans_seed;
  mauve_config.embedder = config_.analysis.embedder;
  mauve_config.embedder_seed = config_.seeds.kmeans_seed;

  ordered_json mauve_metrics = ordered_json::object();
  for (std::size_t a = 0; a < variants.size(); ++a) {
    for (std::size_t b = a + 1; b < variants.size(); ++b) {
      if (variants[a].responses.size() < 2 || variants[b].responses.size() < 2) continue;
      const MauveSpread spread = mauve_with_spread(
          variants[a].responses, variants[b].responses, mauve_config,
          config_.analysis.mauve_num_seeds, config_.analysis.embedding_url,
          config_.analysis.embedding_model);
      const std::string key = variants[a].name + "_vs_" + variants[b].name;
      ordered_json entry;
      entry["mean"] = spread.mean;
      entry["stddev"] = spread.stddev;
      entry["runs"] = spread.runs;
      entry["k_used"] = spread.k_used;
      mauve_metrics[key] = entry;
      ++computed;

      if (config_.analysis.emit_frontier_csv) {
        write_frontier_csv(spread.curve, (out_dir / ("frontier_" + key + ".csv")).string());
      }
    }
  }
  if (!mauve_metrics.empty()) metrics["mauve"] = mauve_metrics;

  report["metrics"] = metrics;

  const std::string report_path = (out_dir / "analysis.json").string();
  std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
  if (!out.is_open()) throw std::runtime_error("cannot write analysis report: " + report_path);
  out << report.dump(2) << "\n";
  last_analysis_report_ = "analysis.json";  // relative to output_dir, keeps manifests portable

  StageSummary summary;
  summary.processed = computed;
  summary.succeeded = computed;
  return summary;
}

// --- run_all -------------------------------------------------------------------

RunManifest Pipeline::run_all(Ledger& ledger) {
  RunManifest manifest;
  manifest.config_hash = config_hash(config_);

  std::vector<Stage> order = {Stage::ingest, Stage::backtranslate};
  if (config_.stages.filtering) {
    order.push_back(Stage::score);
    order.push_back(Stage::filter);
  }
  if (config_.stages.rewriting) order.push_back(Stage::rewrite);
  if (config_.stages.distilling) order.push_back(Stage::distill);
  order.push_back(Stage::build);
  order.push_back(Stage::analyze);

  const auto write_manifest = [&] {
    std::filesystem::create_directories(config_.paths.output_dir);
    const std::string path =
        (std::filesystem::path(config_.paths.output_dir) / "manifest.json").string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (out.is_open()) out << manifest_to_json(manifest).dump(2) << "\n";
  };

  for (Stage stage : order) {
    try {
      const StageSummary summary = run_stage(stage, ledger);
      manifest.stages.emplace_back(to_string(stage), summary);
      if (stage == Stage::ingest) manifest.ingest_stats = last_ingest_stats_;
      if (stage == Stage::build) manifest.dataset_counts = last_dataset_counts_;
      if (stage == Stage::analyze) manifest.analysis_report = last_analysis_report_;
    } catch (const CrashInjected&) {
      throw;  // simulated kill: no graceful manifest
    } catch (const std::exception& e) {
      manifest.error = to_string(stage) + ": " + e.what();
      manifest.completed = false;
      write_manifest();
      return manifest;
    }
  }
  manifest.completed = true;
  write_manifest();
  return manifest;
}

}  // namespace backforth
