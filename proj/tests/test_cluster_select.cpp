#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "nlb/cluster_select.hpp"
#include "nlb/error.hpp"
#include "nlb/metrics.hpp"
#include "nlb/synthetic.hpp"
#include "oracles.hpp"

using namespace nlb;

namespace {

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double t = static_cast<double>(a[p]) - b[p];
    s += t * t;
  }
  return s;
}

// Sum of squared distances to each group's mean.
double partition_inertia(const EmbeddingMatrix& m, const std::vector<int>& group, int k) {
  double total = 0.0;
  for (int g = 0; g < k; ++g) {
    std::vector<double> mean(m.dim(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (group[i] != g) continue;
      for (std::size_t p = 0; p < m.dim(); ++p) mean[p] += m.row(i)[p];
      ++count;
    }
    if (count == 0) continue;
    for (double& v : mean) v /= static_cast<double>(count);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (group[i] != g) continue;
      for (std::size_t p = 0; p < m.dim(); ++p) {
        const double t = m.row(i)[p] - mean[p];
        total += t * t;
      }
    }
  }
  return total;
}

// Hand-built assignment with the given cluster sizes laid out in blocks.
ClusterAssignment assignment_with_sizes(const std::vector<std::size_t>& sizes) {
  ClusterAssignment a;
  a.k = sizes.size();
  a.dim = 1;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) a.labels.push_back(static_cast<std::uint32_t>(c));
  }
  a.centroids.assign(a.k, 0.0f);
  return a;
}

EmbeddingMatrix three_blobs(std::uint64_t seed) {
  MixtureSpec spec;
  spec.n = 300;
  spec.d = 8;
  spec.components = 3;
  spec.separation = 10.0;
  spec.seed = seed;
  return normalize_rows(gaussian_mixture(spec).embeddings);
}

}  // namespace

TEST(KMeans, OnePointPerCluster) {
  const auto m = normalize_rows(oracle::random_matrix(12, 3, 4));
  const auto a = kmeans(m, 12, 7);
  EXPECT_EQ(a.inertia, 0.0);
  EXPECT_EQ(std::set<std::uint32_t>(a.labels.begin(), a.labels.end()).size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t p = 0; p < 3; ++p) {
      EXPECT_EQ(a.centroids[a.labels[i] * 3 + p], m.row(i)[p]);
    }
  }
}

TEST(KMeans, TwoTightGroupsMatchExhaustivePartition) {
  const float e = 0.01f;
  const auto m = oracle::unit_rows(
      6, 2, {1, e, 1, -e, 1, 2 * e, e, 1, -e, 1, 2 * e, 1});
  // Best 2-partition by exhaustive search over all labelings.
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_group;
  for (unsigned mask = 0; mask < (1u << 6); ++mask) {
    std::vector<int> g(6);
    for (int i = 0; i < 6; ++i) g[i] = (mask >> i) & 1;
    const double v = partition_inertia(m, g, 2);
    if (v < best) {
      best = v;
      best_group = g;
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = kmeans(m, 2, seed);
    EXPECT_EQ(a.labels[0], a.labels[1]);
    EXPECT_EQ(a.labels[0], a.labels[2]);
    EXPECT_EQ(a.labels[3], a.labels[4]);
    EXPECT_EQ(a.labels[3], a.labels[5]);
    EXPECT_NE(a.labels[0], a.labels[3]);
    EXPECT_NEAR(a.inertia, best, 1e-9);
  }
  EXPECT_EQ(best_group[0] == best_group[1] && best_group[1] == best_group[2], true);
}

TEST(KMeans, SingleClusterIsGlobalMean) {
  const auto m = normalize_rows(oracle::random_matrix(50, 4, 9));
  const auto a = kmeans(m, 1, 3);
  std::vector<double> mean(4, 0.0);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t p = 0; p < 4; ++p) mean[p] += m.row(i)[p];
  }
  double total = 0.0;
  for (double& v : mean) v /= 50.0;
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t p = 0; p < 4; ++p) total += (m.row(i)[p] - mean[p]) * (m.row(i)[p] - mean[p]);
  }
  for (std::size_t p = 0; p < 4; ++p) EXPECT_NEAR(a.centroids[p], mean[p], 1e-6);
  EXPECT_NEAR(a.inertia, total, 1e-6);
}

TEST(KMeans, Errors) {
  const auto m = normalize_rows(oracle::random_matrix(5, 2, 1));
  EXPECT_THROW(kmeans(m, 0, 1), InvalidArgument);
  EXPECT_THROW(kmeans(m, 6, 1), InvalidArgument);
}

TEST(KMeans, InvariantsAndNonIncreasingInertia) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const std::size_t n = 40 + seed * 7;
    const std::size_t k = 2 + seed % 7;
    const auto m = normalize_rows(oracle::random_matrix(n, 5, seed));
    const auto a = kmeans(m, k, seed);
    ASSERT_EQ(a.labels.size(), n);
    for (const auto l : a.labels) EXPECT_LT(l, k);
    EXPECT_GE(a.inertia, 0.0);
    ASSERT_FALSE(a.inertia_history.empty());
    for (std::size_t t = 1; t < a.inertia_history.size(); ++t) {
      EXPECT_LE(a.inertia_history[t], a.inertia_history[t - 1] + 1e-9) << "step " << t;
    }
    EXPECT_NEAR(a.inertia_history.back(), a.inertia, 1e-9);

    // Inertia recomputed from scratch against the reported centroids.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inertia += sq_dist(m.row(i), std::span<const float>(a.centroids).subspan(a.labels[i] * 5, 5));
    }
    EXPECT_NEAR(inertia, a.inertia, 1e-6);

    // Converged centroids are member means.
    if (a.iterations < KMeansOptions{}.max_iter) {
      const auto sizes = a.cluster_sizes();
      for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) continue;
        for (std::size_t p = 0; p < 5; ++p) {
          double mean = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            if (a.labels[i] == c) mean += m.row(i)[p];
          }
          EXPECT_NEAR(a.centroids[c * 5 + p], mean / static_cast<double>(sizes[c]), 1e-4);
        }
      }
    }
  }
}

TEST(KMeans, DeterministicGivenSeed) {
  const auto m = normalize_rows(oracle::random_matrix(200, 6, 2));
  const auto a = kmeans(m, 5, 42);
  const auto b = kmeans(m, 5, 42);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(SelectClusterPoison, Examples) {
  const auto a = assignment_with_sizes({3, 5, 9});
  const auto p = select_cluster_poison(a, 5, 1);
  EXPECT_EQ(p.indices, (std::vector<std::size_t>{3, 4, 5, 6, 7}));
  EXPECT_EQ(p.cluster_id, std::optional<std::size_t>{1});
  EXPECT_EQ(p.method, SelectionMethod::kClustering);

  const auto q = select_cluster_poison(a, 4, 1);
  EXPECT_EQ(q.indices.size(), 4u);
  for (const auto i : q.indices) EXPECT_EQ(a.labels[i], 1u);

  try {
    select_cluster_poison(assignment_with_sizes({2, 2}), 3, 1);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("smaller"), std::string::npos) << e.what();
  }
}

TEST(SelectClusterPoison, TieGoesToSmallerClusterId) {
  const auto p = select_cluster_poison(assignment_with_sizes({6, 4, 4}), 3, 0);
  EXPECT_EQ(p.cluster_id, std::optional<std::size_t>{1});
}

TEST(SelectClusterPoison, NeverPicksTooSmallCluster) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<std::size_t> sizes;
    std::mt19937_64 rng(seed);
    for (int c = 0; c < 6; ++c) sizes.push_back(1 + rng() % 20);
    const std::size_t budget = 1 + rng() % 20;
    const auto a = assignment_with_sizes(sizes);
    const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
    if (budget > largest) {
      EXPECT_THROW(select_cluster_poison(a, budget, seed), InvalidArgument);
      continue;
    }
    const auto p = select_cluster_poison(a, budget, seed);
    const std::size_t chosen = sizes[*p.cluster_id];
    EXPECT_GE(chosen, budget);
    for (const auto s : sizes) {
      if (s >= budget) {
        EXPECT_LE(chosen, s);
      }
    }
    EXPECT_NO_THROW(p.validate(a.labels.size()));
  }
}

TEST(SelectClusterPoison, HighCcrOnSeparatedMixtures) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MixtureSpec spec;
    spec.n = 1000;
    spec.d = 16;
    spec.components = 5;
    spec.separation = 8.0;
    spec.seed = seed;
    const auto mix = gaussian_mixture(spec);
    const auto m = normalize_rows(mix.embeddings);
    const auto p = select_cluster_poison(kmeans(m, 5, seed), 60, seed);
    const double value = ccr(LabelVector::from_values(mix.labels), p).value;
    if (value >= 0.95) ++good;
  }
  EXPECT_GE(good, 9);
}

// Reported only: larger clusters tend to be less label-consistent.
TEST(SelectClusterPoison, SizeVersusCcrTrendReported) {
  MixtureSpec spec;
  spec.n = 1200;
  spec.d = 16;
  spec.components = 6;
  spec.separation = 3.0;
  spec.sizes = {60, 100, 160, 220, 300, 360};
  spec.seed = 5;
  const auto mix = gaussian_mixture(spec);
  const auto m = normalize_rows(mix.embeddings);
  const auto a = kmeans(m, 6, 5);
  const auto labels = LabelVector::from_values(mix.labels);
  const auto sizes = a.cluster_sizes();
  std::vector<double> size_v, ccr_v;
  for (std::size_t c = 0; c < a.k; ++c) {
    if (sizes[c] == 0) continue;
    PoisonSet members;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (a.labels[i] == c) members.indices.push_back(i);
    }
    members.budget_m = members.indices.size();
    size_v.push_back(static_cast<double>(sizes[c]));
    ccr_v.push_back(ccr(labels, members).value);
  }
  const double rho = oracle::spearman(size_v, ccr_v);
  std::cout << "[ report ] spearman(cluster size, cluster CCR) = " << rho << "\n";
  EXPECT_TRUE(std::isfinite(rho));
}

TEST(Silhouette, TwoFarPairsScoreNearOne) {
  // Each cluster holds two points 0.1 apart; clusters are 1.0+ apart.
  const float s = 0.05f;
  const auto m = oracle::unit_rows(4, 2, {1, s, 1, -s, s, 1, -s, 1});
  ClusterAssignment a;
  a.k = 2;
  a.dim = 2;
  a.labels = {0, 0, 1, 1};
  a.centroids.assign(4, 0.0f);
  // Closed form: a = |p0 - p1|, b = mean distance to the other pair.
  double expected = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t mate = i ^ 1u;
    const double ai = std::sqrt(sq_dist(m.row(i), m.row(mate)));
    const std::size_t o = i < 2 ? 2 : 0;
    const double bi =
        (std::sqrt(sq_dist(m.row(i), m.row(o))) + std::sqrt(sq_dist(m.row(i), m.row(o + 1)))) / 2;
    expected += (bi - ai) / std::max(ai, bi);
  }
  expected /= 4.0;
  const double got = silhouette_score(m, a);
  EXPECT_NEAR(got, expected, 1e-6);
  EXPECT_GE(got, 0.9);
}

TEST(Silhouette, Conventions) {
  const auto same = oracle::unit_rows(4, 2, {1, 0, 1, 0, 1, 0, 1, 0});
  ClusterAssignment a;
  a.k = 2;
  a.dim = 2;
  a.labels = {0, 0, 1, 1};
  a.centroids.assign(4, 0.0f);
  EXPECT_EQ(silhouette_score(same, a), 0.0);

  const auto m = normalize_rows(oracle::random_matrix(7, 3, 1));
  const auto singles = kmeans(m, 7, 1);
  EXPECT_EQ(silhouette_score(m, singles), 0.0);

  a.k = 1;
  a.labels = {0, 0, 0, 0};
  EXPECT_THROW(silhouette_score(same, a), InvalidArgument);
}

TEST(Silhouette, BoundedOnRandomClusterings) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = normalize_rows(oracle::random_matrix(60, 4, seed));
    const double s = silhouette_score(m, kmeans(m, 2 + seed % 5, seed));
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(AutoK, RecoversThreeBlobsEverySeed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_EQ(auto_k(three_blobs(seed), 2, 6, seed), 3u) << "seed " << seed;
  }
}

TEST(AutoK, SingletonRangeAndErrors) {
  const auto m = three_blobs(0);
  EXPECT_EQ(auto_k(m, 4, 4, 0), 4u);
  const auto tiny = normalize_rows(oracle::random_matrix(3, 2, 0));
  EXPECT_THROW(auto_k(tiny, 2, 5, 0), InvalidArgument);
  EXPECT_THROW(auto_k(m, 1, 3, 0), InvalidArgument);
  EXPECT_THROW(auto_k(m, 4, 3, 0), InvalidArgument);
}

TEST(SelectRandomPoison, Examples) {
  EXPECT_EQ(select_random_poison(5, 5, 9).indices, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto a = select_random_poison(1000, 37, 123);
  const auto b = select_random_poison(1000, 37, 123);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_EQ(a.method, SelectionMethod::kRandom);
  EXPECT_EQ(a.seed, std::optional<std::uint64_t>{123});
  EXPECT_NO_THROW(a.validate(1000));
  EXPECT_THROW(select_random_poison(5, 0, 1), InvalidArgument);
  EXPECT_THROW(select_random_poison(5, 6, 1), InvalidArgument);
}

TEST(SelectRandomPoison, RoughlyUniform) {
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    for (const auto i : select_random_poison(20, 5, seed).indices) ++hits[i];
  }
  // Expected 500 per index; 5 sigma is about 97.
  for (const int h : hits) EXPECT_NEAR(h, 500, 100);
}
