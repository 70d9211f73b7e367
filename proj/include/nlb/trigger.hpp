#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlb/image.hpp"
#include "nlb/poison_set.hpp"

namespace nlb {

enum class TriggerKind { kPatch, kBlend };
enum class Placement { kFixedCorner, kRandom };

struct TriggerConfig {
  TriggerKind kind = TriggerKind::kPatch;
  ImageTensor pattern;             // patch, or full-size blend pattern
  std::string pattern_source;      // provenance only
  Placement placement = Placement::kFixedCorner;
  double scale_ratio = 1.0 / 6.0;  // random placement: side = floor(min(h,w) * ratio)
  double alpha = 0.2;              // blend ratio
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless alpha in [0,1] and scale_ratio in (0,1].
  void validate() const;
};

/// 3x3 all-white patch.
ImageTensor default_patch(std::size_t channels);

struct PatchPlacement {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Where inject_patch puts the (possibly resized) patch for an image of
/// the given size. Fixed corner: top-left (h-ph-1, w-pw-1). Random: side
/// floor(min(h,w)*scale_ratio), top-left uniform over valid positions.
PatchPlacement patch_placement(std::size_t h, std::size_t w, const TriggerConfig& cfg);

/// Nearest-neighbor resize.
ImageTensor resize_nearest(const ImageTensor& img, std::size_t h, std::size_t w);

ImageTensor inject_patch(const ImageTensor& img, const TriggerConfig& cfg);

/// round_half_up((1 - alpha) * img + alpha * pattern) per byte.
ImageTensor inject_blend(const ImageTensor& img, const TriggerConfig& cfg);

/// Dispatches on cfg.kind.
ImageTensor inject(const ImageTensor& img, const TriggerConfig& cfg);

struct DatasetEntry {
  std::size_t index = 0;
  std::filesystem::path path;
  std::optional<std::uint32_t> label;
};

/// JSON array of {index, path, label?}; relative paths resolve against the
/// manifest's directory. Indices must be exactly 0..n-1.
std::vector<DatasetEntry> load_dataset_manifest(const std::filesystem::path& path);

struct PoisonRecord {
  std::size_t index = 0;
  std::filesystem::path source;
  std::filesystem::path output;
  bool poisoned = false;
  std::optional<PatchPlacement> placement;
  std::optional<std::uint32_t> label;
};

struct PoisonManifest {
  std::vector<PoisonRecord> records;
  std::size_t poisoned_count = 0;
};

/// Seed used for image `index`: cfg.seed XOR index.
std::uint64_t image_seed(std::uint64_t seed, std::size_t index);

/// Writes every image to out_dir/images: members of `p` triggered, the rest
/// byte-copied. Also writes out_dir/poison_manifest.json.
PoisonManifest poison_dataset(const std::vector<DatasetEntry>& entries, const PoisonSet& p,
                              const TriggerConfig& cfg, const std::filesystem::path& out_dir);

std::string to_string(TriggerKind kind);
std::string to_string(Placement placement);

}  // namespace nlb
