#include "backforth/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace backforth {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& object, const std::set<std::string>& allowed,
                         const std::string& where) {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : object.items()) {
    if (allowed.find(key) == allowed.end()) unknown.push_back(where + key);
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << "unknown configuration key" << (unknown.size() > 1 ? "s" : "") << ": ";
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      if (i > 0) msg << ", ";
      msg << unknown[i];
    }
    throw ConfigError(msg.str());
  }
}

const json& require(const json& object, const std::string& key, const std::string& where) {
  if (!object.contains(key)) throw ConfigError("missing required key: " + where + key);
  return object[key];
}

template <typename T>
void read_into(const json& object, const std::string& key, T& out) {
  if (!object.contains(key)) return;
  try {
    out = object[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key " + key + " has the wrong type");
  }
}

SamplingParams parse_sampling(const json& object, const std::string& where,
                              const SamplingParams& defaults) {
  reject_unknown_keys(object, {"temperature", "top_p", "max_new_tokens"}, where);
  SamplingParams params = defaults;
  read_into(object, "temperature", params.temperature);
  read_into(object, "top_p", params.top_p);
  read_into(object, "max_new_tokens", params.max_new_tokens);
  if (params.temperature < 0.0) throw ConfigError(where + "temperature must be >= 0");
  if (params.top_p <= 0.0 || params.top_p > 1.0)
    throw ConfigError(where + "top_p must be in (0, 1]");
  if (params.max_new_tokens == 0) throw ConfigError(where + "max_new_tokens must be positive");
  return params;
}

EndpointConfig parse_endpoint(const json& object, const std::string& where) {
  reject_unknown_keys(object,
                      {"base_url", "model_name", "api_key_env", "timeout_seconds", "max_retries",
                       "max_concurrency", "completion_path", "chat_format", "backoff_base_ms",
                       "backoff_cap_ms"},
                      where);
  EndpointConfig endpoint;
  endpoint.base_url = require(object, "base_url", where).get<std::string>();
  endpoint.model_name = require(object, "model_name", where).get<std::string>();
  read_into(object, "api_key_env", endpoint.api_key_env);
  read_into(object, "timeout_seconds", endpoint.timeout_seconds);
  read_into(object, "max_retries", endpoint.max_retries);
  read_into(object, "max_concurrency", endpoint.max_concurrency);
  read_into(object, "completion_path", endpoint.completion_path);
  read_into(object, "chat_format", endpoint.chat_format);
  read_into(object, "backoff_base_ms", endpoint.backoff_base_ms);
  read_into(object, "backoff_cap_ms", endpoint.backoff_cap_ms);
  if (endpoint.timeout_seconds <= 0.0) throw ConfigError(where + "timeout_seconds must be > 0");
  if (endpoint.max_concurrency == 0) throw ConfigError(where + "max_concurrency must be >= 1");
  return endpoint;
}

}  // namespace

PipelineConfig parse_config(const json& root) {
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  reject_unknown_keys(root,
                      {"corpus", "seed_data", "endpoints", "stages", "sampling", "seeds",
                       "limits", "paths", "templates", "analysis", "strict"},
                      "");

  PipelineConfig config;

  const json& corpus = require(root, "corpus", "");
  reject_unknown_keys(corpus,
                      {"path", "text_field", "id_field", "source_label", "max_tokens",
                       "estimator", "tokenizer_url"},
                      "corpus.");
  config.corpus.path = require(corpus, "path", "corpus.").get<std::string>();
  read_into(corpus, "text_field", config.corpus.text_field);
  read_into(corpus, "id_field", config.corpus.id_field);
  read_into(corpus, "source_label", config.corpus.source_label);
  read_into(corpus, "max_tokens", config.corpus.max_tokens);
  read_into(corpus, "estimator", config.corpus.estimator);
  read_into(corpus, "tokenizer_url", config.corpus.tokenizer_url);
  if (config.corpus.max_tokens == 0) throw ConfigError("corpus.max_tokens must be positive");
  if (config.corpus.estimator != "whitespace" && config.corpus.estimator != "bytes4" &&
      config.corpus.estimator != "remote") {
    throw ConfigError("corpus.estimator must be whitespace, bytes4, or remote");
  }
  if (config.corpus.estimator == "remote" && config.corpus.tokenizer_url.empty()) {
    throw ConfigError("corpus.estimator=remote requires corpus.tokenizer_url");
  }
  if (config.corpus.source_label.empty()) {
    const auto slash = config.corpus.path.find_last_of("/\\");
    config.corpus.source_label =
        slash == std::string::npos ? config.corpus.path : config.corpus.path.substr(slash + 1);
  }

  if (root.contains("seed_data")) {
    const json& seed = root["seed_data"];
    reject_unknown_keys(seed, {"path", "limit"}, "seed_data.");
    SeedDataConfig seed_config;
    seed_config.path = require(seed, "path", "seed_data.").get<std::string>();
    read_into(seed, "limit", seed_config.limit);
    if (seed_config.limit == 0) throw ConfigError("seed_data.limit must be positive");
    config.seed_data = std::move(seed_config);
  }

  const json& endpoints = require(root, "endpoints", "");
  reject_unknown_keys(endpoints, {"backward", "forward", "rewriter"}, "endpoints.");
  for (const std::string role : {"backward", "forward", "rewriter"}) {
    if (endpoints.contains(role)) {
      config.endpoints.emplace(role, parse_endpoint(endpoints[role], "endpoints." + role + "."));
    }
  }

  if (root.contains("stages")) {
    const json& stages = root["stages"];
    reject_unknown_keys(stages, {"filtering", "rewriting", "distilling"}, "stages.");
    read_into(stages, "filtering", config.stages.filtering);
    read_into(stages, "rewriting", config.stages.rewriting);
    read_into(stages, "distilling", config.stages.distilling);
  }

  if (root.contains("sampling")) {
    const json& sampling = root["sampling"];
    reject_unknown_keys(sampling, {"backtranslate", "score", "rewrite", "distill"}, "sampling.");
    if (sampling.contains("backtranslate")) {
      config.sampling.backtranslate = parse_sampling(sampling["backtranslate"],
                                                     "sampling.backtranslate.",
                                                     config.sampling.backtranslate);
    }
    if (sampling.contains("score")) {
      config.sampling.score =
          parse_sampling(sampling["score"], "sampling.score.", config.sampling.score);
    }
    if (sampling.contains("rewrite")) {
      config.sampling.rewrite =
          parse_sampling(sampling["rewrite"], "sampling.rewrite.", config.sampling.rewrite);
    }
    if (sampling.contains("distill")) {
      config.sampling.distill =
          parse_sampling(sampling["distill"], "sampling.distill.", config.sampling.distill);
    }
  }

  if (root.contains("seeds")) {
    const json& seeds = root["seeds"];
    reject_unknown_keys(seeds, {"sample_seed", "kmeans_seed"}, "seeds.");
    read_into(seeds, "sample_seed", config.seeds.sample_seed);
    read_into(seeds, "kmeans_seed", config.seeds.kmeans_seed);
  }

  if (root.contains("limits")) {
    const json& limits = root["limits"];
    reject_unknown_keys(limits, {"max_pairs", "max_consecutive_failures"}, "limits.");
    read_into(limits, "max_pairs", config.limits.max_pairs);
    read_into(limits, "max_consecutive_failures", config.limits.max_consecutive_failures);
  }

  const json& paths = require(root, "paths", "");
  reject_unknown_keys(paths, {"ledger", "output_dir"}, "paths.");
  config.paths.ledger = require(paths, "ledger", "paths.").get<std::string>();
  config.paths.output_dir = require(paths, "output_dir", "paths.").get<std::string>();

  if (root.contains("templates")) {
    const json& templates = root["templates"];
    reject_unknown_keys(templates, {"backtranslation", "scoring", "rewrite"}, "templates.");
    read_into(templates, "backtranslation", config.templates.backtranslation);
    read_into(templates, "scoring", config.templates.scoring);
    read_into(templates, "rewrite", config.templates.rewrite);
  }

  if (root.contains("analysis")) {
    const json& analysis = root["analysis"];
    reject_unknown_keys(analysis,
                        {"embedder", "embedding_url", "embedding_model", "num_clusters",
                         "scaling_constant", "grid_size", "kmeans_max_iters", "mauve_num_seeds",
                         "trigram_sample_n", "emit_frontier_csv"},
                        "analysis.");
    read_into(analysis, "embedder", config.analysis.embedder);
    read_into(analysis, "embedding_url", config.analysis.embedding_url);
    read_into(analysis, "embedding_model", config.analysis.embedding_model);
    read_into(analysis, "num_clusters", config.analysis.num_clusters);
    read_into(analysis, "scaling_constant", config.analysis.scaling_constant);
    read_into(analysis, "grid_size", config.analysis.grid_size);
    read_into(analysis, "kmeans_max_iters", config.analysis.kmeans_max_iters);
    read_into(analysis, "mauve_num_seeds", config.analysis.mauve_num_seeds);
    read_into(analysis, "trigram_sample_n", config.analysis.trigram_sample_n);
    read_into(analysis, "emit_frontier_csv", config.analysis.emit_frontier_csv);
    if (config.analysis.scaling_constant <= 0.0)
      throw ConfigError("analysis.scaling_constant must be positive");
    if (config.analysis.grid_size < 1) throw ConfigError("analysis.grid_size must be >= 1");
    if (config.analysis.embedder != "hashed-bow" && config.analysis.embedder != "remote")
      throw ConfigError("analysis.embedder must be hashed-bow or remote");
    if (config.analysis.embedder == "remote" && config.analysis.embedding_url.empty())
      throw ConfigError("analysis.embedder=remote requires analysis.embedding_url");
  }

  read_into(root, "strict", config.strict);

  // Roles referenced by enabled stages must be configured.
  if (config.endpoints.find("backward") == config.endpoints.end()) {
    throw ConfigError("the backtranslate stage needs endpoints.backward");
  }
  if (config.stages.filtering && config.endpoints.find("forward") == config.endpoints.end()) {
    throw ConfigError("stages.filtering needs endpoints.forward");
  }
  if ((config.stages.rewriting || config.stages.distilling) &&
      config.endpoints.find("rewriter") == config.endpoints.end()) {
    throw ConfigError(std::string("stages.") +
                      (config.stages.rewriting ? "rewriting" : "distilling") +
                      " needs endpoints.rewriter");
  }

  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw ConfigError("cannot open configuration file: " + path);
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded()) throw ConfigError("configuration is not valid JSON: " + path);
  return parse_config(root);
}

const EndpointConfig& endpoint_for_role(const PipelineConfig& config, const std::string& role) {
  const auto it = config.endpoints.find(role);
  if (it == config.endpoints.end()) throw ConfigError("no endpoint configured for role " + role);
  return it->second;
}

namespace {

json endpoint_to_json(const EndpointConfig& e) {
  return json{{"base_url", e.base_url},
              {"model_name", e.model_name},
              {"api_key_env", e.api_key_env},
              {"timeout_seconds", e.timeout_seconds},
              {"max_retries", e.max_retries},
              {"max_concurrency", e.max_concurrency},
              {"completion_path", e.completion_path},
              {"chat_format", e.chat_format},
              {"backoff_base_ms", e.backoff_base_ms},
              {"backoff_cap_ms", e.backoff_cap_ms}};
}

json sampling_to_json(const SamplingParams& s) {
  return json{{"temperature", s.temperature},
              {"top_p", s.top_p},
              {"max_new_tokens", s.max_new_tokens}};
}

}  // namespace

std::string config_hash(const PipelineConfig& config) {
  // Canonical form: nlohmann::json orders object keys, so dump() is stable.
  // paths are deliberately absent: where the ledger or outputs live does not
  // change what the pipeline computes, so moving them must not block a resume.
  json canonical;
  canonical["corpus"] = {{"path", config.corpus.path},
                         {"text_field", config.corpus.text_field},
                         {"id_field", config.corpus.id_field},
                         {"source_label", config.corpus.source_label},
                         {"max_tokens", config.corpus.max_tokens},
                         {"estimator", config.corpus.estimator},
                         {"tokenizer_url", config.corpus.tokenizer_url}};
  if (config.seed_data.has_value()) {
    canonical["seed_data"] = {{"path", config.seed_data->path},
                              {"limit", config.seed_data->limit}};
  }
  for (const auto& [role, endpoint] : config.endpoints) {
    canonical["endpoints"][role] = endpoint_to_json(endpoint);
  }
  canonical["stages"] = {{"filtering", config.stages.filtering},
                         {"rewriting", config.stages.rewriting},
                         {"distilling", config.stages.distilling}};
  canonical["sampling"] = {{"backtranslate", sampling_to_json(config.sampling.backtranslate)},
                           {"score", sampling_to_json(config.sampling.score)},
                           {"rewrite", sampling_to_json(config.sampling.rewrite)},
                           {"distill", sampling_to_json(config.sampling.distill)}};
  canonical["seeds"] = {{"sample_seed", config.seeds.sample_seed},
                        {"kmeans_seed", config.seeds.kmeans_seed}};
  canonical["limits"] = {{"max_pairs", config.limits.max_pairs},
                         {"max_consecutive_failures", config.limits.max_consecutive_failures}};
  canonical["templates"] = {{"backtranslation", config.templates.backtranslation},
                            {"scoring", config.templates.scoring},
                            {"rewrite", config.templates.rewrite}};
  canonical["analysis"] = {{"embedder", config.analysis.embedder},
                           {"embedding_url", config.analysis.embedding_url},
                           {"embedding_model", config.analysis.embedding_model},
                           {"num_clusters", config.analysis.num_clusters},
                           {"scaling_constant", config.analysis.scaling_constant},
                           {"grid_size", config.analysis.grid_size},
                           {"kmeans_max_iters", config.analysis.kmeans_max_iters},
                           {"mauve_num_seeds", config.analysis.mauve_num_seeds},
                           {"trigram_sample_n", config.analysis.trigram_sample_n},
                           {"emit_frontier_csv", config.analysis.emit_frontier_csv}};

  const std::string dump = canonical.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

}  // namespace backforth
