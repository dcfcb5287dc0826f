#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "backforth/corpus.hpp"
#include "backforth/mauve.hpp"
#include "backforth/stages.hpp"

namespace backforth {

/// Distinct consecutive token triples across a uniform sample of
/// min(sample_n, |texts|) texts. Tokenization: lowercase, split on Unicode
/// whitespace, strip edge punctuation.
std::uint64_t unique_trigrams(const std::vector<std::string>& texts, std::size_t sample_n,
                              std::uint64_t seed);

struct LengthStats {
  double mean_instruction_tokens = 0.0;
  double mean_response_tokens = 0.0;
};

LengthStats length_stats(const std::vector<std::pair<std::string, std::string>>& records,
                         const TokenEstimator& estimator);

struct ScoreHistogramReport {
  std::array<std::uint64_t, 5> counts{};  // counts[i] = score i+1
  std::uint64_t invalid = 0;
  std::uint64_t total = 0;
  double valid_fraction = 0.0;
  double score5_fraction = 0.0;
};

/// Throws std::invalid_argument on an empty score set.
ScoreHistogramReport score_histogram(const std::vector<CandidatePair>& pairs);

struct MauveSpread {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> runs;
  int k_used = 0;
  DivergenceCurve curve;  // frontier from the first seed's run
};

/// MAUVE repeated over `num_seeds` embedder/cluster seeds (base_seed + i),
/// reported as mean and sample standard deviation. Remote embedders need the
/// endpoint arguments; the hashed-bow embedder ignores them.
MauveSpread mauve_with_spread(const std::vector<std::string>& texts_p,
                              const std::vector<std::string>& texts_q, MauveConfig config,
                              int num_seeds, const std::string& remote_url = "",
                              const std::string& remote_model = "");

}  // namespace backforth
