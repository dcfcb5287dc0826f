#include "backforth/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "backforth/embedding.hpp"

namespace backforth {

std::uint64_t unique_trigrams(const std::vector<std::string>& texts, std::size_t sample_n,
                              std::uint64_t seed) {
  Reservoir<const std::string*> reservoir(sample_n, seed);
  for (const std::string& text : texts) reservoir.offer(&text);
  const std::vector<const std::string*> sample = reservoir.take();

  std::unordered_set<std::string> trigrams;
  for (const std::string* text : sample) {
    const std::vector<std::string> tokens = simple_tokenize(*text);
    if (tokens.size() < 3) continue;
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
      trigrams.insert(tokens[i] + '\x1f' + tokens[i + 1] + '\x1f' + tokens[i + 2]);
    }
  }
  return trigrams.size();
}

LengthStats length_stats(const std::vector<std::pair<std::string, std::string>>& records,
                         const TokenEstimator& estimator) {
  if (records.empty()) throw std::invalid_argument("length_stats: empty record set");
  double instruction_sum = 0.0;
  double response_sum = 0.0;
  for (const auto& [instruction, response] : records) {
    instruction_sum += static_cast<double>(estimator.count(instruction));
    response_sum += static_cast<double>(estimator.count(response));
  }
  const auto n = static_cast<double>(records.size());
  return LengthStats{instruction_sum / n, response_sum / n};
}

ScoreHistogramReport score_histogram(const std::vector<CandidatePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("empty score set");
  ScoreHistogramReport report;
  report.total = pairs.size();
  for (const CandidatePair& pair : pairs) {
    if (pair.score.has_value() && *pair.score >= 1 && *pair.score <= 5) {
      ++report.counts[static_cast<std::size_t>(*pair.score - 1)];
    } else {
      ++report.invalid;
    }
  }
  std::uint64_t valid = 0;
  for (std::uint64_t c : report.counts) valid += c;
  report.valid_fraction = static_cast<double>(valid) / static_cast<double>(report.total);
  report.score5_fraction =
      static_cast<double>(report.counts[4]) / static_cast<double>(report.total);
  return report;
}

MauveSpread mauve_with_spread(const std::vector<std::string>& texts_p,
                              const std::vector<std::string>& texts_q, MauveConfig config,
                              int num_seeds, const std::string& remote_url,
                              const std::string& remote_model) {
  if (num_seeds < 1) num_seeds = 1;
  MauveSpread spread;
  const std::uint64_t kmeans_base = config.kmeans_seed;
  const std::uint64_t embed_base = config.embedder_seed;
  for (int i = 0; i < num_seeds; ++i) {
    config.kmeans_seed = kmeans_base + static_cast<std::uint64_t>(i);
    config.embedder_seed = embed_base + static_cast<std::uint64_t>(i);
    const auto embedder =
        make_embedder(config.embedder, config.embedder_seed, remote_url, remote_model);
    const MauveReport report = compute_mauve(texts_p, texts_q, config, *embedder);
    spread.runs.push_back(report.score);
    spread.k_used = report.k_used;
    if (i == 0) spread.curve = report.curve;
  }
  double sum = 0.0;
  for (double r : spread.runs) sum += r;
  spread.mean = sum / static_cast<double>(spread.runs.size());
  if (spread.runs.size() > 1) {
    double ss = 0.0;
    for (double r : spread.runs) ss += (r - spread.mean) * (r - spread.mean);
    spread.stddev = std::sqrt(ss / static_cast<double>(spread.runs.size() - 1));
  }
  return spread;
}

}  // namespace backforth
