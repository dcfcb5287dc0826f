#include "backforth/mauve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "backforth/corpus.hpp"
#include "backforth/log.hpp"

namespace backforth {

namespace {

double squared_distance(const Vec& a, const Vec& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the lowest
// center index, so runs with the same seed are identical.
std::vector<int> kmeans_assign(const std::vector<Vec>& points, int k, std::uint64_t seed,
                               int max_iters) {
  const std::size_t n = points.size();
  std::mt19937_64 rng(seed);

  std::vector<Vec> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(points[detail::bounded_uniform(rng, n)]);

  std::vector<double> d2(n, 0.0);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = squared_distance(points[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        best = std::min(best, squared_distance(points[i], centers[c]));
      }
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(points[detail::bounded_uniform(rng, n)]);
      continue;
    }
    double target = unit_double(rng) * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points[chosen]);
  }

  std::vector<int> assign(n, 0);
  const std::size_t dim = points[0].size();
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = squared_distance(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      if (assign[i] != best_c) {
        assign[i] = best_c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;  // stable against the current centers

    std::vector<Vec> sums(static_cast<std::size_t>(k), Vec(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assign[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (counts[cu] == 0) {
        // Re-seed an empty cluster with the point farthest from its center.
        std::size_t farthest = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d =
              squared_distance(points[i], centers[static_cast<std::size_t>(assign[i])]);
          if (d > far_d) {
            far_d = d;
            farthest = i;
          }
        }
        centers[cu] = points[farthest];
        assign[farthest] = c;
        changed = true;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) {
        centers[cu][d] = sums[cu][d] / static_cast<double>(counts[cu]);
      }
    }
  }
  return assign;
}

void check_histogram_pair(const Histogram& p, const Histogram& q) {
  if (p.weights.size() != q.weights.size()) {
    throw std::runtime_error("histograms cover different cluster counts: " +
                             std::to_string(p.weights.size()) + " vs " +
                             std::to_string(q.weights.size()));
  }
  if (p.weights.empty()) throw std::runtime_error("empty histogram");
}

Histogram normalized(const Histogram& h) {
  double sum = 0.0;
  for (double w : h.weights) {
    if (w < 0.0) throw std::runtime_error("histogram has a negative weight");
    sum += w;
  }
  if (sum <= 0.0) throw std::runtime_error("histogram has zero mass");
  Histogram out;
  out.weights.reserve(h.weights.size());
  for (double w : h.weights) out.weights.push_back(w / sum);
  return out;
}

double kl_divergence(const std::vector<double>& a, const std::vector<double>& r) {
  // KL(a || r) with the convention 0*log(0/x) = 0. Interior mixtures keep
  // r_i > 0 wherever a_i > 0.
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) kl += a[i] * std::log(a[i] / r[i]);
  }
  return kl;
}

}  // namespace

QuantizeResult quantize_kmeans(const std::vector<Vec>& vectors_p,
                               const std::vector<Vec>& vectors_q, const MauveConfig& config) {
  if (vectors_p.empty() || vectors_q.empty())
    throw std::runtime_error("quantize_kmeans needs non-empty vector sets");
  const std::size_t dim = vectors_p[0].size();
  for (const Vec& v : vectors_p)
    if (v.size() != dim) throw std::runtime_error("vector dimension mismatch");
  for (const Vec& v : vectors_q)
    if (v.size() != dim) throw std::runtime_error("vector dimension mismatch");

  std::vector<Vec> all;
  all.reserve(vectors_p.size() + vectors_q.size());
  all.insert(all.end(), vectors_p.begin(), vectors_p.end());
  all.insert(all.end(), vectors_q.begin(), vectors_q.end());

  int k = config.num_clusters;
  if (k <= 0) {
    const std::size_t smaller = std::min(vectors_p.size(), vectors_q.size());
    k = std::max<int>(2, static_cast<int>(smaller / 10));
  }
  const std::set<Vec> distinct(all.begin(), all.end());
  if (static_cast<std::size_t>(k) > distinct.size()) {
    logging::warn("k=" + std::to_string(k) + " exceeds " + std::to_string(distinct.size()) +
                  " distinct points; reducing");
    k = static_cast<int>(distinct.size());
  }

  const std::vector<int> assign = kmeans_assign(all, k, config.kmeans_seed,
                                                std::max(1, config.kmeans_max_iters));

  QuantizeResult result;
  result.k_used = k;
  result.p.weights.assign(static_cast<std::size_t>(k), 0.0);
  result.q.weights.assign(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < vectors_p.size(); ++i) {
    result.p.weights[static_cast<std::size_t>(assign[i])] += 1.0;
  }
  for (std::size_t i = 0; i < vectors_q.size(); ++i) {
    result.q.weights[static_cast<std::size_t>(assign[vectors_p.size() + i])] += 1.0;
  }
  for (double& w : result.p.weights) w /= static_cast<double>(vectors_p.size());
  for (double& w : result.q.weights) w /= static_cast<double>(vectors_q.size());
  return result;
}

DivergenceCurve divergence_frontier(const Histogram& p, const Histogram& q, double c, int m) {
  check_histogram_pair(p, q);
  if (c <= 0.0) throw std::runtime_error("scaling constant must be positive");
  if (m < 1) throw std::runtime_error("grid size must be at least 1");

  DivergenceCurve curve;
  curve.points.reserve(static_cast<std::size_t>(m) + 2);

  std::vector<double> r(p.weights.size());
  for (int j = 1; j <= m; ++j) {
    const double lambda = static_cast<double>(j) / (m + 1.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = lambda * p.weights[i] + (1.0 - lambda) * q.weights[i];
    }
    DivergencePoint point;
    point.x = std::exp(-c * kl_divergence(q.weights, r));
    point.y = std::exp(-c * kl_divergence(p.weights, r));
    curve.points.push_back(point);
  }
  curve.points.push_back({0.0, 1.0});
  curve.points.push_back({1.0, 0.0});

  std::sort(curve.points.begin(), curve.points.end(),
            [](const DivergencePoint& a, const DivergencePoint& b) {
              return a.x != b.x ? a.x < b.x : a.y < b.y;
            });
  return curve;
}

double mauve_auc(const DivergenceCurve& curve) {
  // Collapse duplicate x to the maximum y; points arrive sorted by x.
  std::vector<DivergencePoint> collapsed;
  collapsed.reserve(curve.points.size());
  for (const DivergencePoint& point : curve.points) {
    if (!collapsed.empty() && collapsed.back().x == point.x) {
      collapsed.back().y = std::max(collapsed.back().y, point.y);
    } else {
      collapsed.push_back(point);
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < collapsed.size(); ++i) {
    area += (collapsed[i].x - collapsed[i - 1].x) * (collapsed[i].y + collapsed[i - 1].y) / 2.0;
  }
  return std::clamp(area, 0.0, 1.0);
}

MauveReport compute_mauve_from_histograms(const Histogram& p, const Histogram& q,
                                          const MauveConfig& config) {
  const Histogram pn = normalized(p);
  const Histogram qn = normalized(q);
  check_histogram_pair(pn, qn);

  MauveReport report;
  report.curve = divergence_frontier(pn, qn, config.scaling_constant, config.grid_size);
  report.score = mauve_auc(report.curve);
  report.k_used = static_cast<int>(pn.weights.size());
  return report;
}

MauveReport compute_mauve(const std::vector<std::string>& texts_p,
                          const std::vector<std::string>& texts_q, const MauveConfig& config,
                          const Embedder& embedder) {
  if (texts_p.empty() || texts_q.empty())
    throw std::runtime_error("compute_mauve needs non-empty text sets");

  const std::vector<Vec> vectors_p = embedder.embed(texts_p);
  const std::vector<Vec> vectors_q = embedder.embed(texts_q);
  const QuantizeResult quantized = quantize_kmeans(vectors_p, vectors_q, config);

  MauveReport report = compute_mauve_from_histograms(quantized.p, quantized.q, config);
  report.k_used = quantized.k_used;
  report.n_p = texts_p.size();
  report.n_q = texts_q.size();
  return report;
}

}  // namespace backforth
