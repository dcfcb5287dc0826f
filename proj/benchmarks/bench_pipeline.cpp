#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "backforth/analysis.hpp"
#include "backforth/corpus.hpp"
#include "backforth/embedding.hpp"
#include "backforth/mauve.hpp"
#include "backforth/stages.hpp"

using namespace backforth;

namespace {

std::vector<double> random_histogram(std::mt19937_64& rng, std::size_t buckets) {
  std::vector<double> h(buckets);
  double sum = 0.0;
  for (double& v : h) {
    v = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0) + 1e-9;
    sum += v;
  }
  for (double& v : h) v /= sum;
  return h;
}

std::vector<std::string> synthetic_texts(std::size_t n, std::size_t words_per_text) {
  static const char* words[] = {"alpha", "beta",  "gamma", "delta", "epsilon",
                                "zeta",  "theta", "kappa", "sigma", "omega"};
  std::mt19937_64 rng(5);
  std::vector<std::string> texts;
  texts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (std::size_t w = 0; w < words_per_text; ++w) {
      text += words[rng() % 10];
      text += ' ';
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

void BM_divergence_frontier(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = random_histogram(rng, static_cast<std::size_t>(state.range(0)));
  const auto q = random_histogram(rng, static_cast<std::size_t>(state.range(0)));
  const int m = static_cast<int>(state.range(1));
  for (auto _ : state) {
    const DivergenceCurve curve = divergence_frontier(Histogram{p}, Histogram{q}, 5.0, m);
    benchmark::DoNotOptimize(mauve_auc(curve));
  }
}
BENCHMARK(BM_divergence_frontier)->Args({50, 25})->Args({50, 10000})->Args({500, 25});

void BM_quantize_kmeans(benchmark::State& state) {
  const auto texts = synthetic_texts(static_cast<std::size_t>(state.range(0)), 24);
  const HashedBowEmbedder embedder(0);
  const auto vectors = embedder.embed(texts);
  MauveConfig config;
  config.num_clusters = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantize_kmeans(vectors, vectors, config));
  }
}
BENCHMARK(BM_quantize_kmeans)->Args({200, 10})->Args({1000, 25});

void BM_hashed_bow_embed(benchmark::State& state) {
  const auto texts = synthetic_texts(static_cast<std::size_t>(state.range(0)), 64);
  const HashedBowEmbedder embedder(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(embedder.embed(texts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_hashed_bow_embed)->Arg(100)->Arg(1000);

void BM_reservoir_sample(benchmark::State& state) {
  const std::size_t population = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Reservoir<std::size_t> reservoir(1000, 7);
    for (std::size_t i = 0; i < population; ++i) reservoir.offer(i);
    benchmark::DoNotOptimize(reservoir.take());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_reservoir_sample)->Arg(100000)->Arg(1000000);

void BM_extract_score(benchmark::State& state) {
  const std::vector<std::string> completions = {
      "Score: 5",
      "I would rate this 4 out of 5 because it is clear and complete.",
      "3",
      "This response is excellent but I will not grade it.",
      "After careful consideration of relevance and accuracy. Score: 2",
  };
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_score(completions[i++ % completions.size()]));
  }
}
BENCHMARK(BM_extract_score);

void BM_unique_trigrams(benchmark::State& state) {
  const auto texts = synthetic_texts(static_cast<std::size_t>(state.range(0)), 48);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unique_trigrams(texts, texts.size(), 0));
  }
}
BENCHMARK(BM_unique_trigrams)->Arg(1000);

void BM_prompt_render(benchmark::State& state) {
  const std::string response = synthetic_texts(1, 400)[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_backtranslation_prompt(response));
  }
}
BENCHMARK(BM_prompt_render);

}  // namespace

BENCHMARK_MAIN();
