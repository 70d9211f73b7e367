#include "nlb/contrastive_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nlb/detail/sweep.hpp"
#include "nlb/error.hpp"
#include "nlb/parallel.hpp"

namespace nlb {
namespace {

void require_pair_budget(const EmbeddingMatrix& m, std::size_t m_budget, const char* op) {
  require_normalized(m, op);
  if (m_budget == 0) throw InvalidArgument(std::string(op) + ": poison budget must be >= 1");
  if (2 * m_budget > m.rows()) {
    throw InvalidArgument(std::string(op) + ": requires 2M <= n (M=" + std::to_string(m_budget) +
                          ", n=" + std::to_string(m.rows()) + ")");
  }
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

PoisonSet nearest_set(const EmbeddingMatrix& m, std::size_t anchor, std::size_t m_budget,
                      SelectionMethod method, const SimilarityOptions& opts) {
  PoisonSet p;
  p.indices = topk_similar(m, anchor, m_budget, opts).indices;
  std::sort(p.indices.begin(), p.indices.end());
  p.budget_m = m_budget;
  p.method = method;
  p.anchor = anchor;
  return p;
}

SelectionMethod method_for(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kPositiveOnly:
      return SelectionMethod::kPositiveOnly;
    case ScoreMode::kNegativeOnly:
      return SelectionMethod::kNegativeOnly;
    case ScoreMode::kContrastive:
      break;
  }
  return SelectionMethod::kContrastive;
}

bool contains(const std::vector<std::size_t>& sorted, std::size_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (std::size_t i = 0; i < k; ++i) {
    c = c * (n - i) / (i + 1);
    if (c > cap) return cap + 1;
  }
  return static_cast<std::size_t>(c);
}

ContrastiveScores contrastive_scores(const EmbeddingMatrix& m, std::size_t m_budget,
                                     ScoreMode mode, const SimilarityOptions& opts) {
  require_pair_budget(m, m_budget, "contrastive_scores");
  ContrastiveScores out;
  out.m_budget = m_budget;
  out.mode = mode;
  out.scores.assign(m.rows(), 0.0);
  for_each_topk(m, 2 * m_budget, opts, [&](std::size_t row, std::span<const Neighbor> top) {
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t r = 0; r < m_budget; ++r) pos += top[r].similarity;
    for (std::size_t r = m_budget; r < 2 * m_budget; ++r) neg += top[r].similarity;
    switch (mode) {
      case ScoreMode::kContrastive:
        out.scores[row] = pos - neg;
        break;
      case ScoreMode::kPositiveOnly:
        out.scores[row] = pos;
        break;
      case ScoreMode::kNegativeOnly:
        out.scores[row] = -neg;
        break;
    }
  });
  out.argmax_index = argmax_first(out.scores);
  return out;
}

PoisonSet select_contrastive(const EmbeddingMatrix& m, std::size_t m_budget,
                             const SimilarityOptions& opts) {
  return select_variant(m, m_budget, ScoreMode::kContrastive, opts);
}

PoisonSet select_from_scores(const EmbeddingMatrix& m, const ContrastiveScores& scores,
                             const SimilarityOptions& opts) {
  return nearest_set(m, scores.argmax_index, scores.m_budget, method_for(scores.mode), opts);
}

PoisonSet select_variant(const EmbeddingMatrix& m, std::size_t m_budget, ScoreMode mode,
                         const SimilarityOptions& opts) {
  return select_from_scores(m, contrastive_scores(m, m_budget, mode, opts), opts);
}

double tcs_value(const EmbeddingMatrix& m, const PoisonSet& p) {
  require_pair_budget(m, p.budget_m, "tcs_value");
  p.validate(m.rows());
  const std::size_t budget = p.budget_m;

  double pos = 0.0;
  for (const std::size_t x : p.indices) {
    for (const std::size_t y : p.indices) pos += dot(m.row(x), m.row(y));
  }

  double neg = 0.0;
  std::vector<Neighbor> others;
  others.reserve(m.rows() - budget);
  for (const std::size_t x : p.indices) {
    others.clear();
    for (std::size_t j = 0; j < m.rows(); ++j) {
      if (!contains(p.indices, j)) {
        others.push_back({dot(m.row(x), m.row(j)), static_cast<std::uint32_t>(j)});
      }
    }
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(budget),
                      others.end(), ranks_before);
    for (std::size_t r = 0; r < budget; ++r) neg += others[r].similarity;
  }
  return pos - neg;
}

PoisonSet brute_force_tcs(const EmbeddingMatrix& m, std::size_t m_budget) {
  require_pair_budget(m, m_budget, "brute_force_tcs");
  const std::size_t n = m.rows();
  const std::size_t subsets = binomial_capped(n, m_budget, kBruteForceLimit);
  if (subsets > kBruteForceLimit) {
    throw InvalidArgument("brute_force_tcs: C(" + std::to_string(n) + ", " +
                          std::to_string(m_budget) + ") exceeds the enumeration limit of " +
                          std::to_string(kBruteForceLimit) +
                          " subsets; use a smaller n or M");
  }

  // A member's M hardest negatives lie within its 2M nearest rows, since at
  // most M of those rows belong to the subset.
  const std::size_t width = 2 * m_budget;
  std::vector<Neighbor> nearest(n * width);
  for_each_topk(m, width, {}, [&](std::size_t row, std::span<const Neighbor> top) {
    std::copy(top.begin(), top.end(), nearest.begin() + static_cast<std::ptrdiff_t>(row * width));
  });

  std::vector<std::size_t> combo(m_budget);
  for (std::size_t i = 0; i < m_budget; ++i) combo[i] = i;
  std::vector<std::size_t> best_combo = combo;
  double best = -std::numeric_limits<double>::infinity();

  while (true) {
    double pos = 0.0;
    for (const std::size_t x : combo) {
      for (const std::size_t y : combo) pos += dot(m.row(x), m.row(y));
    }
    double neg = 0.0;
    for (const std::size_t x : combo) {
      std::size_t taken = 0;
      for (std::size_t r = 0; r < width && taken < m_budget; ++r) {
        const Neighbor& nb = nearest[x * width + r];
        if (contains(combo, nb.index)) continue;
        neg += nb.similarity;
        ++taken;
      }
    }
    const double value = pos - neg;
    if (value > best) {
      best = value;
      best_combo = combo;
    }

    // Advance to the next combination in lexicographic order.
    std::size_t i = m_budget;
    while (i > 0 && combo[i - 1] == n - m_budget + (i - 1)) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < m_budget; ++j) combo[j] = combo[j - 1] + 1;
  }

  PoisonSet p;
  p.indices = std::move(best_combo);
  p.budget_m = m_budget;
  p.method = SelectionMethod::kOracle;
  return p;
}

double infonce_score(const EmbeddingMatrix& m, const PoisonSet& p, double tau) {
  require_normalized(m, "infonce_score");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("infonce_score: temperature must be positive and finite");
  }
  if (p.budget_m == 0) throw InvalidArgument("infonce_score: poison set is empty");
  p.validate(m.rows());
  if (p.indices.size() >= m.rows()) {
    throw InvalidArgument("infonce_score: no non-poison samples");
  }

  double pos = 0.0;
  for (const std::size_t x : p.indices) {
    for (const std::size_t y : p.indices) pos += dot(m.row(x), m.row(y)) / tau;
  }
  double neg = 0.0;
  std::vector<double> logits;
  for (const std::size_t x : p.indices) {
    logits.clear();
    for (std::size_t j = 0; j < m.rows(); ++j) {
      if (!contains(p.indices, j)) logits.push_back(dot(m.row(x), m.row(j)) / tau);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (const double v : logits) s += std::exp(v - mx);
    neg += mx + std::log(s);
  }
  return pos - neg;
}

PoisonSet select_infonce(const EmbeddingMatrix& m, std::size_t m_budget, double tau,
                         const SimilarityOptions& opts) {
  require_normalized(m, "select_infonce");
  const std::size_t n = m.rows();
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("select_infonce: temperature must be positive and finite");
  }
  if (m_budget == 0 || m_budget >= n) {
    throw InvalidArgument("select_infonce: requires 1 <= M < n");
  }

  // Pass 1: positive term and the M-th ranked neighbor of every row. A row
  // j belongs to anchor i's set iff (sim_ij, j) ranks no later than it.
  std::vector<double> pos(n, 0.0);
  std::vector<Neighbor> boundary(n);
  for_each_topk(m, m_budget, opts, [&](std::size_t row, std::span<const Neighbor> top) {
    for (const Neighbor& nb : top) pos[row] += nb.similarity / tau;
    boundary[row] = top.back();
  });

  // Pass 2: streaming log-sum-exp over the complement.
  std::vector<double> scores(n);
  const std::size_t tile = std::min(std::max<std::size_t>(opts.block_size, 1), kMaxTile);
  parallel_for(n, 16, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> mx(hi - lo, -std::numeric_limits<double>::infinity());
    std::vector<double> acc(hi - lo, 0.0);
    detail::sweep_rows(m, lo, hi, tile,
                       [&](std::size_t i, std::size_t j0, std::span<const float> sims) {
                         double& cur_max = mx[i - lo];
                         double& cur_sum = acc[i - lo];
                         for (std::size_t t = 0; t < sims.size(); ++t) {
                           const Neighbor cand{sims[t], static_cast<std::uint32_t>(j0 + t)};
                           if (!ranks_before(boundary[i], cand)) continue;  // member
                           const double v = sims[t] / tau;
                           if (v > cur_max) {
                             cur_sum = cur_sum * std::exp(cur_max - v) + 1.0;
                             cur_max = v;
                           } else {
                             cur_sum += std::exp(v - cur_max);
                           }
                         }
                       });
    for (std::size_t i = lo; i < hi; ++i) {
      scores[i] = pos[i] - (mx[i - lo] + std::log(acc[i - lo]));
    }
  });

  return nearest_set(m, argmax_first(scores), m_budget, SelectionMethod::kInfoNce, opts);
}

}  // namespace nlb
