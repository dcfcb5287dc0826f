#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backforth/analysis.hpp"
#include "backforth/config.hpp"
#include "backforth/corpus.hpp"
#include "backforth/dataset.hpp"
#include "backforth/gateway.hpp"
#include "backforth/ledger.hpp"
#include "backforth/stages.hpp"

namespace backforth {

enum class Stage { ingest, backtranslate, score, filter, rewrite, distill, build, analyze };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct StageSummary {
  std::uint64_t processed = 0;  // records handled this run (= succeeded + failed)
  std::uint64_t succeeded = 0;
  std::uint64_t failed = 0;
  std::uint64_t skipped = 0;    // already complete or not yet eligible; zero calls
};

struct RunManifest {
  std::string config_hash;
  std::vector<std::pair<std::string, StageSummary>> stages;  // in execution order
  IngestStats ingest_stats;
  std::map<std::string, std::uint64_t> dataset_counts;  // output file name -> lines
  std::string analysis_report;                          // path; empty if analyze did not run
  bool completed = false;
  std::string error;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);

/// Thrown by the test-only crash hook to abort mid-stage like a kill would.
struct CrashInjected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Stage orchestration over one checkpoint ledger: processes exactly the
/// eligible records per stage, persists one ledger entry per transition, skips
/// completed records on resume, and aborts a stage after a run of consecutive
/// endpoint failures.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config,
                    std::shared_ptr<CompletionTransport> transport = nullptr);

  Ledger open_ledger(bool force = false) const;

  StageSummary run_stage(Stage stage, Ledger& ledger);

  /// ingest -> backtranslate -> (score -> filter) -> rewrite -> distill ->
  /// build -> analyze, per the stage flags. Writes <output_dir>/manifest.json;
  /// a fatal stage error is recorded there and the manifest returned with
  /// completed=false. CrashInjected propagates (it simulates a kill).
  RunManifest run_all(Ledger& ledger);

  /// Test instrumentation: throw CrashInjected once the ledger session has
  /// appended n entries. 0 disables.
  void set_crash_after_appends(std::uint64_t n) { crash_after_appends_ = n; }

  const PipelineConfig& config() const { return config_; }
  InferenceGateway& gateway() { return gateway_; }

 private:
  StageSummary stage_ingest(Ledger& ledger);
  StageSummary stage_backtranslate(Ledger& ledger);
  StageSummary stage_score(Ledger& ledger);
  StageSummary stage_filter(Ledger& ledger);
  StageSummary stage_rewrite(Ledger& ledger);
  StageSummary stage_distill(Ledger& ledger);
  StageSummary stage_build(Ledger& ledger);
  StageSummary stage_analyze(Ledger& ledger);

  void maybe_crash(const Ledger& ledger) const;
  void append_checked(Ledger& ledger, const CandidatePair& pair);
  std::vector<SeedPair> load_seed_pairs() const;
  std::vector<CandidatePair> dataset_pairs(const Ledger& ledger) const;

  PipelineConfig config_;
  InferenceGateway gateway_;
  StageTemplates templates_;
  std::shared_ptr<TokenEstimator> estimator_;
  std::uint64_t crash_after_appends_ = 0;
  IngestStats last_ingest_stats_;
  std::map<std::string, std::uint64_t> last_dataset_counts_;
  std::string last_analysis_report_;
};

}  // namespace backforth
