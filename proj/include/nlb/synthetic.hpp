#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nlb/embedding.hpp"

namespace nlb {

/// Isotropic Gaussian mixture used for benchmarks and desk-scale checks.
/// With components <= d the means sit on scaled basis vectors so every pair
/// of means is exactly `separation * sigma` apart; otherwise the means are
/// random directions of the same radius.
struct MixtureSpec {
  std::size_t n = 1000;
  std::size_t d = 32;
  std::size_t components = 10;
  double separation = 8.0;  // in units of sigma
  double sigma = 1.0;
  std::uint64_t seed = 0;
  // Optional per-component sizes (must sum to n); samples are then laid
  // out in contiguous blocks. Otherwise labels cycle 0..K-1.
  std::vector<std::size_t> sizes;
};

struct Mixture {
  EmbeddingMatrix embeddings;  // raw, not normalized
  std::vector<std::uint32_t> labels;
};

Mixture gaussian_mixture(const MixtureSpec& spec);

}  // namespace nlb
