#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "nlb/embedding.hpp"

namespace nlb::detail {

inline constexpr std::size_t kLanes = 8;
inline constexpr std::size_t kAnchorGroup = 4;
using Lanes = float __attribute__((vector_size(kLanes * sizeof(float))));

// out[g * out_stride + t] = dot(anchors[g], candidate t) for the kAnchorGroup
// anchors and the first used * kLanes candidates of a transposed panel, where
// panel[p * vecs * kLanes + t] is dimension p of candidate t.
void dot_panel(const float* const* anchors, const float* panel, std::size_t vecs,
               std::size_t used, std::size_t d, float* out, std::size_t out_stride);

// Streams dot products of rows [row_begin, row_end) against every row of
// `m`. Candidates are visited in ascending tiles of `tile` rows; for each
// tile and anchor, sink(anchor, tile_start, sims) receives the tile's
// similarities, anchors in ascending order. Each lane accumulates
// sequentially over the dimension with separate multiply and add, so
// values are bit-identical to nlb::dot.
template <typename Sink>
void sweep_rows(const EmbeddingMatrix& m, std::size_t row_begin, std::size_t row_end,
                std::size_t tile, Sink&& sink) {
  const std::size_t n = m.rows();
  const std::size_t d = m.dim();
  tile = std::max<std::size_t>(tile, 1);
  const std::size_t vecs = (tile + kLanes - 1) / kLanes;
  const std::size_t padded = vecs * kLanes;

  std::vector<float> transposed(d * padded);
  std::vector<float> acc(kAnchorGroup * padded);

  for (std::size_t j0 = 0; j0 < n; j0 += tile) {
    const std::size_t width = std::min(tile, n - j0);
    const std::size_t used = (width + kLanes - 1) / kLanes;
    std::fill(transposed.begin(), transposed.end(), 0.0f);
    for (std::size_t t = 0; t < width; ++t) {
      const float* src = m.row(j0 + t).data();
      for (std::size_t p = 0; p < d; ++p) transposed[p * padded + t] = src[p];
    }

    for (std::size_t i0 = row_begin; i0 < row_end; i0 += kAnchorGroup) {
      const std::size_t group = std::min(kAnchorGroup, row_end - i0);
      // Missing anchors in a short group reuse the last row; their output is dropped.
      const float* a[kAnchorGroup];
      for (std::size_t g = 0; g < kAnchorGroup; ++g) {
        a[g] = m.row(i0 + std::min(g, group - 1)).data();
      }
      dot_panel(a, transposed.data(), vecs, used, d, acc.data(), padded);
      for (std::size_t g = 0; g < group; ++g) {
        sink(i0 + g, j0, std::span<const float>(acc.data() + g * padded, width));
      }
    }
  }
}

}  // namespace nlb::detail
