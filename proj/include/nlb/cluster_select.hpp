#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nlb/embedding.hpp"
#include "nlb/poison_set.hpp"

namespace nlb {

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-4;
  std::size_t n_init = 10;  // k-means++ restarts; the lowest inertia is kept
};

/// Result of Lloyd's algorithm. `inertia_history` holds the inertia after
/// each assignment step plus the final value; it never increases.
struct ClusterAssignment {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::uint32_t> labels;
  std::vector<float> centroids;  // k x dim, row-major
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;

  std::vector<std::size_t> cluster_sizes() const;
};

/// K-means with k-means++ seeding on unit rows (Euclidean distance), best
/// of `n_init` restarts. Deterministic given (m, k, seed, opts). Empty
/// clusters take the point farthest from its own centroid.
ClusterAssignment kmeans(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& opts = {});

/// Smallest cluster with at least `m_budget` members (ties: smaller id),
/// then `m_budget` of its members drawn uniformly with `seed`.
PoisonSet select_cluster_poison(const ClusterAssignment& a, std::size_t m_budget,
                                std::uint64_t seed);

/// Mean silhouette over all samples; singletons score 0, and a = b = 0
/// scores 0.
double silhouette_score(const EmbeddingMatrix& m, const ClusterAssignment& a);

/// argmax of silhouette over k in [k_min, k_max], ties to the smaller k.
std::size_t auto_k(const EmbeddingMatrix& m, std::size_t k_min, std::size_t k_max,
                   std::uint64_t seed, const KMeansOptions& opts = {});

PoisonSet select_random_poison(std::size_t n, std::size_t m_budget, std::uint64_t seed);

}  // namespace nlb
