#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "backforth/gateway.hpp"

namespace backforth {

/// Configuration problems exit with code 2 at the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusConfig {
  std::string path;
  std::string text_field = "text";
  std::string id_field = "id";
  std::string source_label;        // defaults to the corpus file name
  std::uint64_t max_tokens = 3584; // leaves prompt/generation margin under a 4096 context
  std::string estimator = "bytes4";
  std::string tokenizer_url;       // required for the "remote" estimator
};

struct SeedDataConfig {
  std::string path;
  std::size_t limit = 3200;
};

struct StageFlags {
  bool filtering = true;
  bool rewriting = true;
  bool distilling = false;
};

struct StageSampling {
  SamplingParams backtranslate{1.0, 0.9, 1024};
  SamplingParams score{1.0, 0.9, 1024};
  SamplingParams rewrite{1.0, 0.9, 2048};
  SamplingParams distill{1.0, 0.9, 2048};
};

struct SeedsConfig {
  std::uint64_t sample_seed = 0;
  std::uint64_t kmeans_seed = 0;
};

struct LimitsConfig {
  std::uint64_t max_pairs = 0;  // 0 = unlimited
  std::uint64_t max_consecutive_failures = 20;
};

struct PathsConfig {
  std::string ledger;
  std::string output_dir;
};

struct TemplatePaths {
  std::string backtranslation;  // empty = built-in template
  std::string scoring;
  std::string rewrite;
};

struct AnalysisConfig {
  std::string embedder = "hashed-bow";
  std::string embedding_url;
  std::string embedding_model;
  int num_clusters = 0;  // 0 = auto
  double scaling_constant = 5.0;
  int grid_size = 25;
  int kmeans_max_iters = 300;
  int mauve_num_seeds = 3;
  std::uint64_t trigram_sample_n = 10000;
  bool emit_frontier_csv = false;
};

struct PipelineConfig {
  CorpusConfig corpus;
  std::optional<SeedDataConfig> seed_data;
  std::map<std::string, EndpointConfig> endpoints;  // roles: backward, forward, rewriter
  StageFlags stages;
  StageSampling sampling;
  SeedsConfig seeds;
  LimitsConfig limits;
  PathsConfig paths;
  TemplatePaths templates;
  AnalysisConfig analysis;
  bool strict = false;
};

/// Parses and validates a JSON configuration. Unknown keys anywhere are a
/// ConfigError naming them; so is a stage enabled without its endpoint role.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const nlohmann::json& root);

const EndpointConfig& endpoint_for_role(const PipelineConfig& config, const std::string& role);

/// Stable fingerprint of the semantic configuration; used to refuse resuming a
/// ledger written under a different configuration.
std::string config_hash(const PipelineConfig& config);

}  // namespace backforth
