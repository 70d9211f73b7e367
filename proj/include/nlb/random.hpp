#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace nlb {

/// Fans a top-level seed out to a subsystem: seed XOR a hash of `purpose`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Uniform sample of `m` distinct values from [0, n), returned ascending.
/// Deterministic given (n, m, seed).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                    std::uint64_t seed);

}  // namespace nlb
