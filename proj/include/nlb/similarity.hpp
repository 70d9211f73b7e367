#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nlb/embedding.hpp"

namespace nlb {

/// Controls the blocked similarity kernels. Anchor rows are processed
/// `block_size` at a time; candidate rows are streamed through a transposed
/// tile of min(block_size, kMaxTile) rows. Results never depend on it.
struct SimilarityOptions {
  std::size_t block_size = 4096;
};

inline constexpr std::size_t kMaxTile = 256;

struct Neighbor {
  float similarity;
  std::uint32_t index;
};

/// Total order used for every ranking: higher similarity first, then
/// smaller index.
constexpr bool ranks_before(const Neighbor& a, const Neighbor& b) noexcept {
  return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
}

struct TopKResult {
  std::size_t anchor = 0;
  std::vector<std::size_t> indices;
  std::vector<float> values;
};

/// Dot product accumulated in float, sequentially over the dimension.
/// Every similarity in the library is bit-identical to this.
float dot(std::span<const float> a, std::span<const float> b) noexcept;

/// The k rows (self included) with the largest dot product to `anchor`.
TopKResult topk_similar(const EmbeddingMatrix& m, std::size_t anchor, std::size_t k,
                        const SimilarityOptions& opts = {});

using NeighborSink = std::function<void(std::size_t row, std::span<const Neighbor> top)>;

/// Computes the top-k neighbor list of every row and hands each list, in
/// ascending row order, to `sink`. Peak extra memory is O(block_size * k).
void for_each_topk(const EmbeddingMatrix& m, std::size_t k, const SimilarityOptions& opts,
                   const NeighborSink& sink);

}  // namespace nlb
