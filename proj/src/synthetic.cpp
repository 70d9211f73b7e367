#include "nlb/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "nlb/error.hpp"

namespace nlb {

Mixture gaussian_mixture(const MixtureSpec& spec) {
  const std::size_t n = spec.n;
  const std::size_t d = spec.d;
  const std::size_t k = spec.components;
  if (n == 0 || d == 0 || k == 0) throw InvalidArgument("mixture needs n, d, components >= 1");
  if (!spec.sizes.empty()) {
    if (spec.sizes.size() != k ||
        std::accumulate(spec.sizes.begin(), spec.sizes.end(), std::size_t{0}) != n) {
      throw InvalidArgument("mixture sizes must list one count per component and sum to n");
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = spec.separation * spec.sigma / std::sqrt(2.0);

  std::vector<double> means(k * d, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (k <= d) {
      means[c * d + c] = radius;
      continue;
    }
    double norm = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      means[c * d + p] = normal(rng);
      norm += means[c * d + p] * means[c * d + p];
    }
    norm = std::sqrt(norm);
    for (std::size_t p = 0; p < d; ++p) means[c * d + p] *= radius / norm;
  }

  std::vector<std::uint32_t> labels(n);
  if (spec.sizes.empty()) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % k);
  } else {
    std::size_t i = 0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t s = 0; s < spec.sizes[c]; ++s) labels[i++] = static_cast<std::uint32_t>(c);
    }
  }

  std::vector<float> data(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* mean = means.data() + labels[i] * d;
    for (std::size_t p = 0; p < d; ++p) {
      data[i * d + p] = static_cast<float>(mean[p] + spec.sigma * normal(rng));
    }
  }
  return {EmbeddingMatrix(n, d, std::move(data)), std::move(labels)};
}

}  // namespace nlb
