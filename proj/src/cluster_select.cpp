#include "nlb/cluster_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "nlb/error.hpp"
#include "nlb/parallel.hpp"
#include "nlb/random.hpp"

namespace nlb {
namespace {

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double diff = static_cast<double>(a[p]) - b[p];
    s += diff * diff;
  }
  return s;
}

std::span<const float> centroid(const std::vector<float>& centroids, std::size_t c,
                                std::size_t d) {
  return {centroids.data() + c * d, d};
}

std::vector<float> kmeanspp_init(const EmbeddingMatrix& m, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = m.rows();
  const std::size_t d = m.dim();
  std::vector<float> centroids;
  centroids.reserve(k * d);
  std::vector<bool> chosen(n, false);

  auto add = [&](std::size_t i) {
    chosen[i] = true;
    const auto r = m.row(i);
    centroids.insert(centroids.end(), r.begin(), r.end());
  };

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  add(first(rng));
  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i) min_d2[i] = sq_dist(m.row(i), centroid(centroids, 0, d));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double v : min_d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double cum = 0.0;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (min_d2[i] <= 0.0) continue;
        last_positive = i;
        cum += min_d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;
    }
    if (pick == n) {
      // Every point coincides with a centre; take the first unused row.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) -
                                      chosen.begin());
    }
    add(pick);
    const auto cen = centroid(centroids, c, d);
    for (std::size_t i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], sq_dist(m.row(i), cen));
  }
  return centroids;
}

// Nearest centroid per sample (ties: smaller id); returns the inertia.
double assign(const EmbeddingMatrix& m, const std::vector<float>& centroids, std::size_t k,
              std::vector<std::uint32_t>& labels, std::vector<double>& dist) {
  const std::size_t d = m.dim();
  parallel_for(m.rows(), 256, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double v = sq_dist(m.row(i), centroid(centroids, c, d));
        if (v < best) {
          best = v;
          best_c = static_cast<std::uint32_t>(c);
        }
      }
      labels[i] = best_c;
      dist[i] = best;
    }
  });
  double inertia = 0.0;
  for (const double v : dist) inertia += v;
  return inertia;
}

void recompute_centroid(const EmbeddingMatrix& m, const std::vector<std::uint32_t>& labels,
                        std::size_t c, std::vector<float>& centroids) {
  const std::size_t d = m.dim();
  std::vector<double> sum(d, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (labels[i] != c) continue;
    const auto r = m.row(i);
    for (std::size_t p = 0; p < d; ++p) sum[p] += r[p];
    ++count;
  }
  if (count == 0) return;
  for (std::size_t p = 0; p < d; ++p) {
    centroids[c * d + p] = static_cast<float>(sum[p] / static_cast<double>(count));
  }
}

// Means of the current labels; empty clusters are refilled with the point
// farthest from its own centroid.
std::vector<float> update_centroids(const EmbeddingMatrix& m, std::size_t k,
                                    std::vector<std::uint32_t>& labels,
                                    const std::vector<float>& previous) {
  const std::size_t n = m.rows();
  const std::size_t d = m.dim();
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = m.row(i);
    double* s = sums.data() + labels[i] * d;
    for (std::size_t p = 0; p < d; ++p) s[p] += r[p];
    ++counts[labels[i]];
  }
  std::vector<float> next(previous);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t p = 0; p < d; ++p) {
      next[c * d + p] = static_cast<float>(sums[c * d + p] / static_cast<double>(counts[c]));
    }
  }

  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[labels[i]] <= 1) continue;
      const double v = sq_dist(m.row(i), centroid(next, labels[i], d));
      if (v > far_d) {
        far_d = v;
        far = i;
      }
    }
    if (far == n) break;  // only possible when k > n, rejected earlier
    const std::uint32_t donor = labels[far];
    labels[far] = static_cast<std::uint32_t>(c);
    --counts[donor];
    counts[c] = 1;
    const auto r = m.row(far);
    std::copy(r.begin(), r.end(), next.begin() + static_cast<std::ptrdiff_t>(c * d));
    recompute_centroid(m, labels, donor, next);
  }
  return next;
}

ClusterAssignment lloyd(const EmbeddingMatrix& m, std::size_t k, std::mt19937_64& rng,
                        const KMeansOptions& opts) {
  const std::size_t n = m.rows();
  const std::size_t d = m.dim();
  ClusterAssignment out;
  out.k = k;
  out.dim = d;
  out.centroids = kmeanspp_init(m, k, rng);
  out.labels.assign(n, 0);
  std::vector<double> dist(n);

  for (std::size_t iter = 1; iter <= std::max<std::size_t>(opts.max_iter, 1); ++iter) {
    out.inertia_history.push_back(assign(m, out.centroids, k, out.labels, dist));
    std::vector<float> next = update_centroids(m, k, out.labels, out.centroids);
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(sq_dist(centroid(next, c, d), centroid(out.centroids, c, d))));
    }
    out.centroids = std::move(next);
    out.iterations = iter;
    if (shift < opts.tol) break;
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(m.row(i), centroid(out.centroids, out.labels[i], d));
  out.inertia = inertia;
  out.inertia_history.push_back(inertia);
  return out;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (const auto l : labels) ++sizes[l];
  return sizes;
}

ClusterAssignment kmeans(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& opts) {
  require_normalized(m, "kmeans");
  const std::size_t n = m.rows();
  if (k == 0) throw InvalidArgument("kmeans requires k >= 1");
  if (k > n) {
    throw InvalidArgument("kmeans requires k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
  }
  if (opts.n_init == 0) throw InvalidArgument("kmeans requires n_init >= 1");

  // Restarts draw from one generator, so run r's seeding depends only on
  // `seed` and r. The lowest final inertia wins; ties keep the earlier run.
  std::mt19937_64 rng(seed);
  ClusterAssignment best;
  for (std::size_t run = 0; run < opts.n_init; ++run) {
    ClusterAssignment a = lloyd(m, k, rng, opts);
    if (run == 0 || a.inertia < best.inertia) best = std::move(a);
  }
  best.seed = seed;
  return best;
}

PoisonSet select_cluster_poison(const ClusterAssignment& a, std::size_t m_budget,
                                std::uint64_t seed) {
  if (m_budget == 0) throw InvalidArgument("poison budget must be >= 1");
  const auto sizes = a.cluster_sizes();
  std::size_t chosen = a.k;
  for (std::size_t c = 0; c < a.k; ++c) {
    if (sizes[c] >= m_budget && (chosen == a.k || sizes[c] < sizes[chosen])) chosen = c;
  }
  if (chosen == a.k) {
    const std::size_t largest = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    throw InvalidArgument("no cluster has at least M=" + std::to_string(m_budget) +
                          " members (largest has " + std::to_string(largest) +
                          "); use a smaller poison budget M or a smaller cluster count k");
  }

  std::vector<std::size_t> members;
  members.reserve(sizes[chosen]);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] == chosen) members.push_back(i);
  }
  PoisonSet p;
  for (const std::size_t pos : sample_without_replacement(members.size(), m_budget, seed)) {
    p.indices.push_back(members[pos]);
  }
  std::sort(p.indices.begin(), p.indices.end());
  p.budget_m = m_budget;
  p.method = SelectionMethod::kClustering;
  p.seed = seed;
  p.k = a.k;
  p.cluster_id = chosen;
  return p;
}

double silhouette_score(const EmbeddingMatrix& m, const ClusterAssignment& a) {
  require_normalized(m, "silhouette_score");
  const std::size_t n = m.rows();
  if (a.k < 2) throw InvalidArgument("silhouette_score requires k >= 2");
  if (n < 2) throw InvalidArgument("silhouette_score requires n >= 2");
  if (a.labels.size() != n) throw InvalidArgument("assignment does not match matrix rows");

  const auto sizes = a.cluster_sizes();
  std::vector<double> s(n, 0.0);
  parallel_for(n, 32, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> sum(a.k);
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t own = a.labels[i];
      if (sizes[own] <= 1) continue;
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) sum[a.labels[j]] += std::sqrt(sq_dist(m.row(i), m.row(j)));
      }
      const double intra = sum[own] / static_cast<double>(sizes[own] - 1);
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < a.k; ++c) {
        if (c == own || sizes[c] == 0) continue;
        nearest = std::min(nearest, sum[c] / static_cast<double>(sizes[c]));
      }
      if (!std::isfinite(nearest)) continue;
      const double denom = std::max(intra, nearest);
      s[i] = denom > 0.0 ? (nearest - intra) / denom : 0.0;
    }
  });
  double total = 0.0;
  for (const double v : s) total += v;
  return total / static_cast<double>(n);
}

std::size_t auto_k(const EmbeddingMatrix& m, std::size_t k_min, std::size_t k_max,
                   std::uint64_t seed, const KMeansOptions& opts) {
  if (k_min < 2 || k_min > k_max || k_max > m.rows()) {
    throw InvalidArgument("auto_k requires 2 <= k_min <= k_max <= n (k_min=" +
                          std::to_string(k_min) + ", k_max=" + std::to_string(k_max) +
                          ", n=" + std::to_string(m.rows()) + ")");
  }
  std::size_t best_k = k_min;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const double score = silhouette_score(m, kmeans(m, k, seed, opts));
    if (score > best) {
      best = score;
      best_k = k;
    }
  }
  return best_k;
}

PoisonSet select_random_poison(std::size_t n, std::size_t m_budget, std::uint64_t seed) {
  if (m_budget == 0) throw InvalidArgument("poison budget must be >= 1");
  if (m_budget > n) {
    throw InvalidArgument("poison budget " + std::to_string(m_budget) + " exceeds n=" +
                          std::to_string(n));
  }
  PoisonSet p;
  p.indices = sample_without_replacement(n, m_budget, seed);
  p.budget_m = m_budget;
  p.method = SelectionMethod::kRandom;
  p.seed = seed;
  return p;
}

}  // namespace nlb
