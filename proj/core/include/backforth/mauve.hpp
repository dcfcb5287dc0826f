#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "backforth/embedding.hpp"

namespace backforth {

struct MauveConfig {
  int num_clusters = 0;            // 0 = auto: max(2, floor(n/10)), n = smaller side
  double scaling_constant = 5.0;   // c
  int grid_size = 25;              // interior mixture weights
  std::uint64_t kmeans_seed = 0;
  int kmeans_max_iters = 300;
  std::string embedder = "hashed-bow";
  std::uint64_t embedder_seed = 0;
};

/// Normalized cluster-occupancy weights; sums to 1.
struct Histogram {
  std::vector<double> weights;
};

struct DivergencePoint {
  double x = 0.0;
  double y = 0.0;
};

/// Frontier points sorted ascending by x, including the appended endpoints
/// (0,1) and (1,0).
struct DivergenceCurve {
  std::vector<DivergencePoint> points;
};

struct MauveReport {
  double score = 0.0;
  DivergenceCurve curve;
  int k_used = 0;
  std::size_t n_p = 0;
  std::size_t n_q = 0;
};

struct QuantizeResult {
  Histogram p;
  Histogram q;
  int k_used = 0;
};

/// k-means (k-means++ init, Lloyd iterations until assignments are stable or
/// max iters) over the union of both sides; per-side occupancy histograms over
/// the shared clusters. k larger than the number of distinct points is reduced
/// with a warning.
QuantizeResult quantize_kmeans(const std::vector<Vec>& vectors_p,
                               const std::vector<Vec>& vectors_q, const MauveConfig& config);

/// For each interior weight lambda_j = j/(m+1): r = lambda*p + (1-lambda)*q,
/// point (exp(-c*KL(q||r)), exp(-c*KL(p||r))), with 0*log(0/x) = 0. Endpoints
/// (0,1) and (1,0) appended; points sorted ascending by x.
DivergenceCurve divergence_frontier(const Histogram& p, const Histogram& q, double c, int m);

/// Trapezoidal area under the x-sorted points, duplicate x collapsed to the
/// maximum y, clamped to [0,1].
double mauve_auc(const DivergenceCurve& curve);

MauveReport compute_mauve(const std::vector<std::string>& texts_p,
                          const std::vector<std::string>& texts_q, const MauveConfig& config,
                          const Embedder& embedder);

/// Bypass mode: skip embedding and quantization, score pre-quantized histograms.
MauveReport compute_mauve_from_histograms(const Histogram& p, const Histogram& q,
                                          const MauveConfig& config);

}  // namespace backforth
