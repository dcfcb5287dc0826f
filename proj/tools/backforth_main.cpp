#include <unistd.h>

#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "backforth/config.hpp"
#include "backforth/ledger.hpp"
#include "backforth/log.hpp"
#include "backforth/pipeline.hpp"

namespace {

using namespace backforth;

void print_summary(const std::string& stage, const StageSummary& summary) {
  std::printf("stage %-13s processed=%llu succeeded=%llu failed=%llu skipped=%llu\n",
              (stage + ":").c_str(), static_cast<unsigned long long>(summary.processed),
              static_cast<unsigned long long>(summary.succeeded),
              static_cast<unsigned long long>(summary.failed),
              static_cast<unsigned long long>(summary.skipped));
}

int run_status(const PipelineConfig& config) {
  std::map<std::string, LedgerEntry> state;
  try {
    state = Ledger::load_state(config.paths.ledger);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::map<std::string, std::uint64_t> by_status;
  std::uint64_t failed = 0;
  std::uint64_t attempts = 0;
  for (const auto& [doc_id, entry] : state) {
    ++by_status[to_string(entry.status)];
    if (entry.payload.failed) ++failed;
    attempts += entry.attempt_count;
  }
  std::printf("ledger %s: %zu records\n", config.paths.ledger.c_str(), state.size());
  for (const auto& [status, count] : by_status) {
    std::printf("  %-15s %llu\n", status.c_str(), static_cast<unsigned long long>(count));
  }
  std::printf("  flagged failed  %llu\n", static_cast<unsigned long long>(failed));
  std::printf("  total attempts  %llu\n", static_cast<unsigned long long>(attempts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backforth: builds instruction-tuning datasets from web corpora by "
               "backtranslating instructions, filtering by model-assigned score, and "
               "rewriting responses"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  bool resume = false;
  bool force = false;
  bool strict = false;
  std::uint64_t crash_after = 0;
  app.add_option("--config,-c", config_path, "pipeline configuration (JSON)")->required();
  app.add_flag("--resume", resume, "continue a run over an existing non-empty ledger");
  app.add_flag("--force", force, "resume even if the configuration hash changed");
  app.add_flag("--strict", strict, "treat malformed records and missing fields as fatal");
  app.add_option("--crash-after", crash_after, "abort after N ledger appends (testing)")
      ->group("");  // hidden

  const std::vector<std::string> stage_names = {"ingest",  "backtranslate", "score",
                                                "filter",  "rewrite",       "distill",
                                                "build",   "analyze"};
  for (const std::string& name : stage_names) {
    app.add_subcommand(name, "run the " + name + " stage");
  }
  app.add_subcommand("run", "run every configured stage in order");
  app.add_subcommand("status", "summarize the ledger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig config = load_config(config_path);
    if (strict) config.strict = true;

    const std::string subcommand = app.get_subcommands().front()->get_name();
    if (subcommand == "status") return run_status(config);

    Pipeline pipeline(std::move(config));
    if (crash_after > 0) pipeline.set_crash_after_appends(crash_after);

    Ledger ledger = pipeline.open_ledger(force);
    if (subcommand == "run" && !ledger.empty() && !resume && !force) {
      std::fprintf(stderr,
                   "error: ledger %s already has entries; pass --resume to continue it\n",
                   pipeline.config().paths.ledger.c_str());
      return 1;
    }

    if (subcommand == "run") {
      const RunManifest manifest = pipeline.run_all(ledger);
      for (const auto& [stage, summary] : manifest.stages) print_summary(stage, summary);
      if (!manifest.error.empty()) {
        std::fprintf(stderr, "error: %s\n", manifest.error.c_str());
        return 1;
      }
      std::printf("manifest: %s/manifest.json\n", pipeline.config().paths.output_dir.c_str());
      return 0;
    }

    const Stage stage = stage_from_string(subcommand);
    const StageSummary summary = pipeline.run_stage(stage, ledger);
    print_summary(subcommand, summary);
    return 0;
  } catch (const CrashInjected& e) {
    std::fprintf(stderr, "crash injected: %s\n", e.what());
    std::fflush(nullptr);
    _exit(42);  // no graceful shutdown, like a kill
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
