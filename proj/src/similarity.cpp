#include "nlb/similarity.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <string>

#include "nlb/detail/sweep.hpp"
#include "nlb/error.hpp"
#include "nlb/parallel.hpp"

namespace nlb {
namespace {

// Bounded heap keeping the k best neighbors; the worst sits at the front.
class TopKHeap {
 public:
  explicit TopKHeap(std::span<Neighbor> storage) : slots_(storage) {}

  void offer(Neighbor cand) {
    if (size_ < slots_.size()) {
      slots_[size_++] = cand;
      std::push_heap(slots_.begin(), slots_.begin() + size_, ranks_before);
    } else if (ranks_before(cand, slots_.front())) {
      std::pop_heap(slots_.begin(), slots_.end(), ranks_before);
      slots_.back() = cand;
      std::push_heap(slots_.begin(), slots_.end(), ranks_before);
    }
  }

  // Offers a tile of candidates j0, j0+1, ... Once full, anything strictly
  // below the current worst similarity is skipped without touching the heap.
  void offer_tile(std::size_t j0, std::span<const float> sims) {
    std::size_t t = 0;
    for (; t < sims.size() && size_ < slots_.size(); ++t) {
      offer({sims[t], static_cast<std::uint32_t>(j0 + t)});
    }
    if (t == sims.size()) return;
    float floor = slots_.front().similarity;
    for (; t < sims.size(); ++t) {
      if (sims[t] < floor) continue;
      offer({sims[t], static_cast<std::uint32_t>(j0 + t)});
      floor = slots_.front().similarity;
    }
  }

  // Sorts best-first in place.
  std::span<const Neighbor> finish() {
    std::sort_heap(slots_.begin(), slots_.begin() + size_, ranks_before);
    return slots_.first(size_);
  }

 private:
  std::span<Neighbor> slots_;
  std::size_t size_ = 0;
};

}  // namespace

namespace detail {

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
__attribute__((target_clones("avx2", "default")))
#endif
void dot_panel(const float* const* anchors, const float* panel, std::size_t vecs,
               std::size_t used, std::size_t d, float* out, std::size_t out_stride) {
  static_assert(kAnchorGroup == 4);
  const float* a0 = anchors[0];
  const float* a1 = anchors[1];
  const float* a2 = anchors[2];
  const float* a3 = anchors[3];
  for (std::size_t v = 0; v < used; ++v) {
    Lanes r0{}, r1{}, r2{}, r3{};
    const float* col = panel + v * kLanes;
    for (std::size_t p = 0; p < d; ++p) {
      Lanes c;
      std::memcpy(&c, col + p * vecs * kLanes, sizeof(Lanes));
      r0 += a0[p] * c;
      r1 += a1[p] * c;
      r2 += a2[p] * c;
      r3 += a3[p] * c;
    }
    std::memcpy(out + 0 * out_stride + v * kLanes, &r0, sizeof(Lanes));
    std::memcpy(out + 1 * out_stride + v * kLanes, &r1, sizeof(Lanes));
    std::memcpy(out + 2 * out_stride + v * kLanes, &r2, sizeof(Lanes));
    std::memcpy(out + 3 * out_stride + v * kLanes, &r3, sizeof(Lanes));
  }
}

}  // namespace detail

float dot(std::span<const float> a, std::span<const float> b) noexcept {
  float s = 0.0f;
  for (std::size_t p = 0; p < a.size(); ++p) s += a[p] * b[p];
  return s;
}

void for_each_topk(const EmbeddingMatrix& m, std::size_t k, const SimilarityOptions& opts,
                   const NeighborSink& sink) {
  const std::size_t n = m.rows();
  if (k == 0 || k > n) {
    throw InvalidArgument("top-k requires 1 <= k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
  }
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("row count exceeds 32-bit index range");
  }
  const std::size_t block = std::max<std::size_t>(opts.block_size, 1);
  const std::size_t tile = std::min(block, kMaxTile);

  std::vector<Neighbor> storage;
  for (std::size_t b0 = 0; b0 < n; b0 += block) {
    const std::size_t rows = std::min(block, n - b0);
    storage.assign(rows * k, Neighbor{0.0f, 0});
    std::vector<std::span<const Neighbor>> done(rows);

    parallel_for(rows, 16, [&](std::size_t lo, std::size_t hi) {
      std::vector<TopKHeap> heaps;
      heaps.reserve(hi - lo);
      for (std::size_t r = lo; r < hi; ++r) {
        heaps.emplace_back(std::span<Neighbor>(storage.data() + r * k, k));
      }
      detail::sweep_rows(m, b0 + lo, b0 + hi, tile,
                         [&](std::size_t i, std::size_t j0, std::span<const float> sims) {
                           heaps[i - b0 - lo].offer_tile(j0, sims);
                         });
      for (std::size_t r = lo; r < hi; ++r) done[r] = heaps[r - lo].finish();
    });

    for (std::size_t r = 0; r < rows; ++r) sink(b0 + r, done[r]);
  }
}

TopKResult topk_similar(const EmbeddingMatrix& m, std::size_t anchor, std::size_t k,
                        const SimilarityOptions& opts) {
  require_normalized(m, "topk_similar");
  if (anchor >= m.rows()) {
    throw InvalidArgument("anchor " + std::to_string(anchor) + " out of range");
  }
  if (k == 0 || k > m.rows()) {
    throw InvalidArgument("topk_similar requires 1 <= k <= n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(m.rows()) + ")");
  }
  const std::size_t tile = std::min(std::max<std::size_t>(opts.block_size, 1), kMaxTile);
  std::vector<Neighbor> storage(k);
  TopKHeap heap(storage);
  detail::sweep_rows(m, anchor, anchor + 1, tile,
                     [&](std::size_t, std::size_t j0, std::span<const float> sims) {
                       heap.offer_tile(j0, sims);
                     });
  TopKResult out;
  out.anchor = anchor;
  for (const Neighbor& nb : heap.finish()) {
    out.indices.push_back(nb.index);
    out.values.push_back(nb.similarity);
  }
  return out;
}

}  // namespace nlb
