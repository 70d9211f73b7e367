#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "nlb/contrastive_select.hpp"
#include "nlb/error.hpp"
#include "nlb/synthetic.hpp"
#include "oracles.hpp"

using namespace nlb;

namespace {

EmbeddingMatrix four_row_fixture() {
  const float h = std::sqrt(2.0f) / 2.0f;
  return oracle::unit_rows(4, 2, {1, 0, 1, 0, 0, 1, h, h});
}

// M copies of (1,0) followed by M copies of (0,1).
EmbeddingMatrix two_blocks(std::size_t budget) {
  std::vector<float> data;
  for (std::size_t i = 0; i < budget; ++i) data.insert(data.end(), {1, 0});
  for (std::size_t i = 0; i < budget; ++i) data.insert(data.end(), {0, 1});
  return oracle::unit_rows(2 * budget, 2, data);
}

PoisonSet subset(std::vector<std::size_t> idx) {
  PoisonSet p;
  p.budget_m = idx.size();
  p.indices = std::move(idx);
  return p;
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

}  // namespace

TEST(ContrastiveScores, FourRowHandExample) {
  const auto s = contrastive_scores(four_row_fixture(), 1);
  ASSERT_EQ(s.scores.size(), 4u);
  EXPECT_NEAR(s.scores[0], 0.0, 1e-6);
  EXPECT_NEAR(s.scores[1], 0.0, 1e-6);
  EXPECT_NEAR(s.scores[2], 1.0 - std::sqrt(0.5), 1e-6);
  EXPECT_NEAR(s.scores[3], 1.0 - std::sqrt(0.5), 1e-6);
  EXPECT_EQ(s.argmax_index, 2u);
}

TEST(ContrastiveScores, IdenticalRowsScoreZero) {
  for (std::size_t budget = 1; budget <= 4; ++budget) {
    std::vector<float> data(2 * budget * 3, 0.0f);
    for (std::size_t i = 0; i < 2 * budget; ++i) data[i * 3 + 1] = 1.0f;
    const auto s = contrastive_scores(oracle::unit_rows(2 * budget, 3, data), budget);
    for (const double v : s.scores) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(s.argmax_index, 0u);
  }
}

TEST(ContrastiveScores, TwoBlocksScoreM) {
  for (std::size_t budget = 1; budget <= 5; ++budget) {
    const auto s = contrastive_scores(two_blocks(budget), budget);
    for (const double v : s.scores) EXPECT_EQ(v, static_cast<double>(budget));
    EXPECT_EQ(s.argmax_index, 0u);
  }
}

TEST(ContrastiveScores, Errors) {
  EXPECT_THROW(contrastive_scores(four_row_fixture(), 3), InvalidArgument);
  EXPECT_THROW(contrastive_scores(four_row_fixture(), 0), InvalidArgument);
  EXPECT_THROW(contrastive_scores(EmbeddingMatrix(2, 2, {1, 0, 0, 1}), 1), InvalidArgument);
}

TEST(ContrastiveScores, MatchesNaiveReferenceExactly) {
  for (const std::size_t n : {4u, 31u, 200u, 512u}) {
    const auto m = normalize_rows(oracle::random_matrix(n, 16, 100 + n));
    for (const std::size_t budget : {std::size_t{1}, std::size_t{2}, n / 4}) {
      if (budget == 0) continue;
      const auto expected = oracle::naive_contrastive_scores(m, budget);
      for (const std::size_t block : {std::size_t{1}, std::size_t{7}, std::size_t{64}, n}) {
        const auto s = contrastive_scores(m, budget, ScoreMode::kContrastive, {block});
        ASSERT_EQ(s.scores, expected) << "n=" << n << " M=" << budget << " block=" << block;
      }
    }
  }
}

TEST(ContrastiveScores, PositivePlusNegativeIsContrastive) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = normalize_rows(oracle::random_matrix(40, 5, seed));
    const std::size_t budget = 1 + seed % 6;
    const auto c = contrastive_scores(m, budget, ScoreMode::kContrastive);
    const auto pos = contrastive_scores(m, budget, ScoreMode::kPositiveOnly);
    const auto neg = contrastive_scores(m, budget, ScoreMode::kNegativeOnly);
    EXPECT_EQ(pos.scores, oracle::naive_contrastive_scores(m, budget, 1));
    EXPECT_EQ(neg.scores, oracle::naive_contrastive_scores(m, budget, 2));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      EXPECT_NEAR(pos.scores[i] + neg.scores[i], c.scores[i], 1e-12);
    }
  }
}

TEST(ContrastiveScores, ArgmaxIsMaximal) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = contrastive_scores(normalize_rows(oracle::random_matrix(50, 4, seed)), 3);
    const auto best = std::max_element(s.scores.begin(), s.scores.end());
    EXPECT_EQ(s.argmax_index, static_cast<std::size_t>(best - s.scores.begin()));
  }
}

TEST(SelectContrastive, Examples) {
  const auto p = select_contrastive(four_row_fixture(), 1);
  EXPECT_EQ(p.indices, std::vector<std::size_t>{2});
  EXPECT_EQ(p.anchor, std::optional<std::size_t>{2});
  EXPECT_EQ(p.method, SelectionMethod::kContrastive);
  EXPECT_EQ(p.budget_m, 1u);

  for (std::size_t budget = 1; budget <= 4; ++budget) {
    const auto q = select_contrastive(two_blocks(budget), budget);
    EXPECT_EQ(q.indices, range(0, budget));
    EXPECT_EQ(q.anchor, std::optional<std::size_t>{0});
  }

  const auto s = contrastive_scores(oracle::unit_rows(2, 2, {1, 0, 0, 1}), 1);
  EXPECT_EQ(s.scores, (std::vector<double>{1.0, 1.0}));
  const auto r = select_contrastive(oracle::unit_rows(2, 2, {1, 0, 0, 1}), 1);
  EXPECT_EQ(r.indices, std::vector<std::size_t>{0});
  EXPECT_EQ(r.anchor, std::optional<std::size_t>{0});
}

TEST(SelectContrastive, AnchorAlwaysInOwnSet) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = normalize_rows(oracle::random_matrix(30, 3, seed));
    const auto p = select_contrastive(m, 1 + seed % 5);
    ASSERT_TRUE(p.anchor.has_value());
    EXPECT_TRUE(std::binary_search(p.indices.begin(), p.indices.end(), *p.anchor));
    EXPECT_NO_THROW(p.validate(m.rows()));
  }
}

TEST(SelectVariant, Examples) {
  for (std::size_t budget = 1; budget <= 4; ++budget) {
    const auto m = two_blocks(budget);
    const auto pos = contrastive_scores(m, budget, ScoreMode::kPositiveOnly);
    for (const double v : pos.scores) EXPECT_EQ(v, static_cast<double>(budget));
    const auto p = select_variant(m, budget, ScoreMode::kPositiveOnly);
    EXPECT_EQ(p.indices, range(0, budget));
    EXPECT_EQ(p.anchor, std::optional<std::size_t>{0});
    EXPECT_EQ(p.method, SelectionMethod::kPositiveOnly);

    const auto neg = contrastive_scores(m, budget, ScoreMode::kNegativeOnly);
    for (const double v : neg.scores) EXPECT_EQ(v, 0.0);
    const auto q = select_variant(m, budget, ScoreMode::kNegativeOnly);
    EXPECT_EQ(q.anchor, std::optional<std::size_t>{0});
    EXPECT_EQ(q.method, SelectionMethod::kNegativeOnly);
  }

  std::vector<float> same(6 * 2, 0.0f);
  for (std::size_t i = 0; i < 6; ++i) same[i * 2] = 1.0f;
  const auto s = contrastive_scores(oracle::unit_rows(6, 2, same), 3, ScoreMode::kPositiveOnly);
  for (const double v : s.scores) EXPECT_EQ(v, 3.0);
  EXPECT_EQ(s.argmax_index, 0u);
}

TEST(SelectContrastive, ScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto raw = oracle::random_matrix(40, 6, seed);
    const auto base = select_contrastive(normalize_rows(raw), 4);
    for (const float factor : {0.5f, 4.0f}) {
      const auto scaled = select_contrastive(normalize_rows(scale(raw, factor)), 4);
      EXPECT_EQ(scaled.indices, base.indices);
      EXPECT_EQ(scaled.anchor, base.anchor);
    }
  }
}

TEST(SelectContrastive, PermutationEquivariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 36, d = 5;
    const auto raw = oracle::random_matrix(n, d, seed);
    std::vector<std::size_t> perm = range(0, n);
    std::mt19937_64 rng(seed + 1000);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> shuffled(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(raw.row(perm[i]).begin(), raw.row(perm[i]).end(), shuffled.begin() + i * d);
    }
    const auto base = select_contrastive(normalize_rows(raw), 3);
    const auto moved = select_contrastive(normalize_rows(EmbeddingMatrix(n, d, shuffled)), 3);
    std::vector<std::size_t> mapped;
    for (const std::size_t i : moved.indices) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, base.indices);
    EXPECT_EQ(perm[*moved.anchor], *base.anchor);
  }
}

TEST(TcsValue, Examples) {
  const auto blocks = two_blocks(2);
  EXPECT_DOUBLE_EQ(tcs_value(blocks, subset({0, 1})), 4.0);
  EXPECT_DOUBLE_EQ(tcs_value(blocks, subset({0, 2})), 0.0);

  const auto eye = oracle::unit_rows(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(tcs_value(eye, subset({i})), 1.0);
}

TEST(TcsValue, Errors) {
  const auto blocks = two_blocks(2);
  PoisonSet bad = subset({0, 1});
  bad.budget_m = 3;
  EXPECT_THROW(tcs_value(blocks, bad), InvalidArgument);
  EXPECT_THROW(tcs_value(blocks, subset({0, 1, 2})), InvalidArgument);
}

TEST(TcsValue, MatchesNaiveFormula) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = normalize_rows(oracle::random_matrix(10, 3, seed));
    const auto sim = oracle::naive_similarity(m);
    oracle::for_each_subset(10, 3, [&](const std::vector<std::size_t>& s) {
      ASSERT_NEAR(tcs_value(m, subset(s)), oracle::naive_tcs(sim, 10, s), 1e-12);
    });
  }
}

TEST(BruteForceTcs, Examples) {
  const auto p = brute_force_tcs(two_blocks(2), 2);
  EXPECT_EQ(p.indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(p.method, SelectionMethod::kOracle);

  const auto q = brute_force_tcs(oracle::unit_rows(2, 2, {1, 0, 0, 1}), 1);
  EXPECT_EQ(q.indices, std::vector<std::size_t>{0});
}

TEST(BruteForceTcs, FindsDominantTightCluster) {
  // Rows 3..5 form a tight cluster; the rest are spread out on other axes.
  const std::size_t n = 6, d = 6;
  std::vector<float> data(n * d, 0.0f);
  data[0 * d + 0] = 1.0f;
  data[1 * d + 1] = 1.0f;
  data[2 * d + 2] = 1.0f;
  for (std::size_t i = 3; i < 6; ++i) {
    data[i * d + 5] = 1.0f;
    data[i * d + 4] = 0.01f * static_cast<float>(i);
  }
  const auto p = brute_force_tcs(oracle::unit_rows(n, d, data), 3);
  EXPECT_EQ(p.indices, (std::vector<std::size_t>{3, 4, 5}));
}

TEST(BruteForceTcs, GuardRejectsLargeInstances) {
  const auto m = normalize_rows(oracle::random_matrix(40, 4, 1));
  try {
    brute_force_tcs(m, 10);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("C(40, 10)"), std::string::npos) << e.what();
  }
  EXPECT_EQ(binomial_capped(40, 10, kBruteForceLimit), kBruteForceLimit + 1);
  EXPECT_EQ(binomial_capped(12, 3, kBruteForceLimit), 220u);
  EXPECT_EQ(binomial_capped(4, 5, kBruteForceLimit), 0u);
}

TEST(BruteForceTcs, DominatesEveryEnumeratedSubset) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 6 + seed % 7;
    const std::size_t budget = 1 + seed % 3;
    const auto m = normalize_rows(oracle::random_matrix(n, 3, seed));
    const auto sim = oracle::naive_similarity(m);
    const auto p = brute_force_tcs(m, budget);
    const double got = oracle::naive_tcs(sim, n, p.indices);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_set;
    oracle::for_each_subset(n, budget, [&](const std::vector<std::size_t>& s) {
      const double v = oracle::naive_tcs(sim, n, s);
      if (v > best) {
        best = v;
        best_set = s;
      }
    });
    EXPECT_EQ(got, best);
    EXPECT_EQ(p.indices, best_set);
  }
}

TEST(InfonceScore, Examples) {
  const auto m = oracle::unit_rows(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(infonce_score(m, subset({0}), 1.0), 1.0, 1e-12);

  EXPECT_THROW(infonce_score(m, subset({0}), 0.0), InvalidArgument);
  EXPECT_THROW(infonce_score(m, subset({0}), -1.0), InvalidArgument);
  EXPECT_THROW(infonce_score(m, subset({0, 1}), 1.0), InvalidArgument);
}

// Both terms are divided by tau, so on orthogonal rows the score tends to
// |P|/tau - |P| log(n - |P|).
TEST(InfonceScore, LargeTemperatureLimit) {
  const std::size_t n = 6;
  std::vector<float> eye(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0f;
  const auto m = oracle::unit_rows(n, n, eye);
  const double tau = 1e6;
  for (const auto& s : {std::vector<std::size_t>{0}, std::vector<std::size_t>{1, 4},
                        std::vector<std::size_t>{0, 2, 5}}) {
    const double p = static_cast<double>(s.size());
    const double expected = p / tau - p * std::log(static_cast<double>(n) - p);
    EXPECT_NEAR(infonce_score(m, subset(s), tau), expected, 1e-3);
  }
}

TEST(SelectInfonce, MatchesPerAnchorScoring) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = normalize_rows(oracle::random_matrix(25, 4, seed));
    const std::size_t budget = 3;
    const double tau = 0.5;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_anchor = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      auto p = topk_similar(m, i, budget).indices;
      std::sort(p.begin(), p.end());
      // Only the anchor's own row enters its score.
      double pos = 0.0;
      for (const std::size_t y : p) pos += dot(m.row(i), m.row(y)) / tau;
      double lse = 0.0;
      for (std::size_t j = 0; j < m.rows(); ++j) {
        if (!std::binary_search(p.begin(), p.end(), j)) lse += std::exp(dot(m.row(i), m.row(j)) / tau);
      }
      const double v = pos - std::log(lse);
      if (v > best + 1e-12) {
        best = v;
        best_anchor = i;
      }
    }
    const auto got = select_infonce(m, budget, tau);
    EXPECT_EQ(got.anchor, std::optional<std::size_t>{best_anchor});
    EXPECT_EQ(got.method, SelectionMethod::kInfoNce);
    EXPECT_EQ(got.indices.size(), budget);
  }
  EXPECT_THROW(select_infonce(four_row_fixture(), 1, 0.0), InvalidArgument);
  EXPECT_THROW(select_infonce(four_row_fixture(), 4, 1.0), InvalidArgument);
}

TEST(SelectContrastive, HeuristicQualityOnSmallMixtures) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    MixtureSpec spec;
    spec.n = 12;
    spec.d = 4;
    spec.components = 3;
    spec.separation = 6.0;
    spec.seed = seed;
    const auto m = normalize_rows(gaussian_mixture(spec).embeddings);
    const auto sim = oracle::naive_similarity(m);
    std::vector<double> all;
    oracle::for_each_subset(12, 3, [&](const std::vector<std::size_t>& s) {
      all.push_back(oracle::naive_tcs(sim, 12, s));
    });
    std::sort(all.begin(), all.end());
    const double p90 = all[static_cast<std::size_t>(std::ceil(0.9 * all.size())) - 1];
    if (tcs_value(m, select_contrastive(m, 3)) >= p90) ++good;
  }
  EXPECT_GE(good, 28);
}
