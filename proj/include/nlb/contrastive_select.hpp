#pragma once

#include <cstddef>
#include <vector>

#include "nlb/embedding.hpp"
#include "nlb/poison_set.hpp"
#include "nlb/similarity.hpp"

namespace nlb {

/// Which part of the sample-wise contrastive score is kept.
enum class ScoreMode { kContrastive, kPositiveOnly, kNegativeOnly };

/// Per-sample scores over the 2M most similar rows (self included):
///   contrastive   = sum(top[0:M]) - sum(top[M:2M])
///   positive_only = sum(top[0:M])
///   negative_only = -sum(top[M:2M])
/// Sums run in double, best-ranked first.
struct ContrastiveScores {
  std::size_t m_budget = 0;
  ScoreMode mode = ScoreMode::kContrastive;
  std::vector<double> scores;
  std::size_t argmax_index = 0;  // ties: smaller index
};

ContrastiveScores contrastive_scores(const EmbeddingMatrix& m, std::size_t m_budget,
                                     ScoreMode mode = ScoreMode::kContrastive,
                                     const SimilarityOptions& opts = {});

/// Anchor = argmax of the contrastive score; poison set = the anchor's M
/// most similar rows, which always include the anchor itself.
PoisonSet select_contrastive(const EmbeddingMatrix& m, std::size_t m_budget,
                             const SimilarityOptions& opts = {});

/// Poison set of the best-scoring anchor: its M most similar rows.
PoisonSet select_from_scores(const EmbeddingMatrix& m, const ContrastiveScores& scores,
                             const SimilarityOptions& opts = {});

/// Same pipeline with a positive-only or negative-only score.
PoisonSet select_variant(const EmbeddingMatrix& m, std::size_t m_budget, ScoreMode mode,
                         const SimilarityOptions& opts = {});

/// Total contrastive similarity of a subset: all ordered pairs inside P
/// (self-pairs included) minus, for each member, its M most similar
/// non-members.
double tcs_value(const EmbeddingMatrix& m, const PoisonSet& p);

/// Largest C(n, M) brute_force_tcs will enumerate.
inline constexpr std::size_t kBruteForceLimit = 1'000'000;

/// Exhaustive argmax of tcs_value over all M-subsets; ties resolve to the
/// lexicographically smallest subset. Throws when C(n, M) > kBruteForceLimit.
PoisonSet brute_force_tcs(const EmbeddingMatrix& m, std::size_t m_budget);

/// InfoNCE-style subset criterion with temperature tau:
///   sum_{x,x+ in P} f(x).f(x+)/tau - sum_{x in P} log sum_{x' not in P} exp(f(x).f(x')/tau)
double infonce_score(const EmbeddingMatrix& m, const PoisonSet& p, double tau = 1.0);

/// Sample-wise InfoNCE selection: each anchor's M nearest rows form its
/// candidate set, scored with infonce_score restricted to that anchor;
/// the best anchor's set is returned.
PoisonSet select_infonce(const EmbeddingMatrix& m, std::size_t m_budget, double tau = 1.0,
                         const SimilarityOptions& opts = {});

/// C(n, k), saturating at `cap + 1`.
std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap);

}  // namespace nlb
