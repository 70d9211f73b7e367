#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nlb {

enum class SelectionMethod {
  kRandom,
  kClustering,
  kContrastive,
  kPositiveOnly,
  kNegativeOnly,
  kInfoNce,
  kOracle,
};

std::string_view to_string(SelectionMethod method);
SelectionMethod parse_selection_method(std::string_view name);

/// A chosen poison subset plus provenance.
struct PoisonSet {
  std::vector<std::size_t> indices;  // strictly increasing
  std::size_t budget_m = 0;
  SelectionMethod method = SelectionMethod::kRandom;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> anchor;
  std::optional<std::size_t> k;           // clustering only
  std::optional<std::size_t> cluster_id;  // clustering only

  /// Throws InvalidArgument unless size == budget_m, indices strictly
  /// increase, and every index is < n.
  void validate(std::size_t n) const;
};

/// Writes `<path>` (one index per line) and `<path>.json` (provenance).
void save_poison_set(const PoisonSet& p, const std::filesystem::path& path);

/// Reads the index list and, when present, the JSON sidecar. Indices are
/// sorted and deduplicated; without a sidecar budget_m = count.
PoisonSet load_poison_set(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace nlb
