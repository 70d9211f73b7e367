#include "nlb/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"
#include "nlb/error.hpp"
#include "nlb/parallel.hpp"

namespace nlb {
namespace {

// Absorbs representation error so exact .5 products round up.
constexpr double kHalfEpsilon = 1e-9;

nlohmann::json placement_json(const std::optional<PatchPlacement>& p) {
  if (!p) return nullptr;
  return {{"row", p->row}, {"col", p->col}, {"height", p->height}, {"width", p->width}};
}

nlohmann::json trigger_json(const TriggerConfig& cfg) {
  return {
      {"kind", to_string(cfg.kind)},
      {"pattern_source", cfg.pattern_source},
      {"pattern_shape", {cfg.pattern.h, cfg.pattern.w, cfg.pattern.c}},
      {"placement", to_string(cfg.placement)},
      {"scale_ratio", cfg.scale_ratio},
      {"alpha", cfg.alpha},
      {"seed", cfg.seed},
  };
}

}  // namespace

void TriggerConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("blend alpha must be in [0, 1]");
  if (!(scale_ratio > 0.0 && scale_ratio <= 1.0)) {
    throw InvalidArgument("scale_ratio must be in (0, 1]");
  }
  if (pattern.pixels.empty()) throw InvalidArgument("trigger pattern is empty");
}

ImageTensor default_patch(std::size_t channels) { return ImageTensor(3, 3, channels, 255); }

std::string to_string(TriggerKind kind) { return kind == TriggerKind::kPatch ? "patch" : "blend"; }

std::string to_string(Placement placement) {
  return placement == Placement::kFixedCorner ? "fixed_corner" : "random";
}

std::uint64_t image_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ static_cast<std::uint64_t>(index);
}

PatchPlacement patch_placement(std::size_t h, std::size_t w, const TriggerConfig& cfg) {
  PatchPlacement out;
  if (cfg.placement == Placement::kFixedCorner) {
    out.height = cfg.pattern.h;
    out.width = cfg.pattern.w;
    if (out.height + 1 > h || out.width + 1 > w) {
      throw InvalidArgument("patch " + std::to_string(out.height) + "x" +
                            std::to_string(out.width) + " does not fit image " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    out.row = h - out.height - 1;
    out.col = w - out.width - 1;
    return out;
  }
  const auto side = static_cast<std::size_t>(
      std::floor(static_cast<double>(std::min(h, w)) * cfg.scale_ratio));
  if (side == 0) {
    throw InvalidArgument("image " + std::to_string(h) + "x" + std::to_string(w) +
                          " too small for scale_ratio " + std::to_string(cfg.scale_ratio));
  }
  out.height = side;
  out.width = side;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> row(0, h - side);
  std::uniform_int_distribution<std::size_t> col(0, w - side);
  out.row = row(rng);
  out.col = col(rng);
  return out;
}

ImageTensor resize_nearest(const ImageTensor& img, std::size_t h, std::size_t w) {
  ImageTensor out(h, w, img.c);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = y * img.h / h;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = x * img.w / w;
      for (std::size_t ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(sy, sx, ch);
    }
  }
  return out;
}

ImageTensor inject_patch(const ImageTensor& img, const TriggerConfig& cfg) {
  cfg.validate();
  if (cfg.pattern.c != img.c) {
    throw InvalidArgument("patch has " + std::to_string(cfg.pattern.c) +
                          " channels, image has " + std::to_string(img.c));
  }
  const PatchPlacement where = patch_placement(img.h, img.w, cfg);
  const ImageTensor patch = (where.height == cfg.pattern.h && where.width == cfg.pattern.w)
                                ? cfg.pattern
                                : resize_nearest(cfg.pattern, where.height, where.width);
  ImageTensor out = img;
  for (std::size_t y = 0; y < where.height; ++y) {
    for (std::size_t x = 0; x < where.width; ++x) {
      for (std::size_t ch = 0; ch < img.c; ++ch) {
        out.at(where.row + y, where.col + x, ch) = patch.at(y, x, ch);
      }
    }
  }
  return out;
}

ImageTensor inject_blend(const ImageTensor& img, const TriggerConfig& cfg) {
  cfg.validate();
  const ImageTensor& pat = cfg.pattern;
  if (pat.h != img.h || pat.w != img.w || pat.c != img.c) {
    throw InvalidArgument("blend pattern " + std::to_string(pat.h) + "x" + std::to_string(pat.w) +
                          "x" + std::to_string(pat.c) + " does not match image " +
                          std::to_string(img.h) + "x" + std::to_string(img.w) + "x" +
                          std::to_string(img.c));
  }
  ImageTensor out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = (1.0 - cfg.alpha) * img.pixels[i] + cfg.alpha * pat.pixels[i];
    const double r = std::floor(v + 0.5 + kHalfEpsilon);
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
  }
  return out;
}

ImageTensor inject(const ImageTensor& img, const TriggerConfig& cfg) {
  return cfg.kind == TriggerKind::kPatch ? inject_patch(img, cfg) : inject_blend(img, cfg);
}

std::vector<DatasetEntry> load_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset manifest " + path.string());
  std::vector<DatasetEntry> entries;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (!doc.is_array()) throw ParseError(path.string() + ": manifest must be a JSON array");
    for (const auto& item : doc) {
      DatasetEntry e;
      e.index = item.at("index").get<std::size_t>();
      std::filesystem::path p = item.at("path").get<std::string>();
      e.path = p.is_absolute() ? p : path.parent_path() / p;
      if (item.contains("label") && !item["label"].is_null()) {
        e.label = item["label"].get<std::uint32_t>();
      }
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::sort(entries.begin(), entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].index != i) {
      throw ParseError(path.string() + ": manifest indices must be exactly 0..n-1 (missing or duplicate " +
                       std::to_string(i) + ")");
    }
  }
  return entries;
}

PoisonManifest poison_dataset(const std::vector<DatasetEntry>& entries, const PoisonSet& p,
                              const TriggerConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const std::size_t n = entries.size();
  for (const std::size_t idx : p.indices) {
    if (idx >= n) {
      throw InvalidArgument("poison index " + std::to_string(idx) + " out of range for " +
                            std::to_string(n) + " images");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (entries[i].index != i) throw InvalidArgument("dataset entries must be ordered 0..n-1");
    if (!std::filesystem::exists(entries[i].path)) {
      throw IoError("missing image " + entries[i].path.string());
    }
  }

  const auto image_dir = out_dir / "images";
  std::error_code ec;
  std::filesystem::create_directories(image_dir, ec);
  if (ec) throw IoError("cannot create " + image_dir.string() + ": " + ec.message());

  std::vector<bool> poisoned(n, false);
  for (const std::size_t idx : p.indices) poisoned[idx] = true;

  PoisonManifest manifest;
  manifest.records.resize(n);
  parallel_for(n, 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const DatasetEntry& e = entries[i];
      PoisonRecord& rec = manifest.records[i];
      rec.index = i;
      rec.source = e.path;
      rec.output = image_dir / (std::to_string(i) + "_" + e.path.filename().string());
      rec.label = e.label;
      rec.poisoned = poisoned[i];
      if (!rec.poisoned) {
        std::error_code copy_ec;
        std::filesystem::copy_file(e.path, rec.output,
                                   std::filesystem::copy_options::overwrite_existing, copy_ec);
        if (copy_ec) throw IoError("cannot copy " + e.path.string() + ": " + copy_ec.message());
        continue;
      }
      TriggerConfig local = cfg;
      local.seed = image_seed(cfg.seed, i);
      const ImageTensor img = load_image(e.path);
      if (local.kind == TriggerKind::kPatch) {
        rec.placement = patch_placement(img.h, img.w, local);
      }
      save_image(inject(img, local), rec.output);
    }
  });
  manifest.poisoned_count = p.indices.size();

  nlohmann::json images = nlohmann::json::array();
  for (const PoisonRecord& r : manifest.records) {
    images.push_back({
        {"index", r.index},
        {"source", r.source.string()},
        {"output", std::filesystem::relative(r.output, out_dir).generic_string()},
        {"poisoned", r.poisoned},
        {"placement", placement_json(r.placement)},
        {"label", r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr)},
    });
  }
  const nlohmann::json doc = {
      {"n", n},
      {"poisoned_count", manifest.poisoned_count},
      {"trigger", trigger_json(cfg)},
      {"images", images},
  };
  const auto manifest_path = out_dir / "poison_manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + manifest_path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + manifest_path.string());
  return manifest;
}

}  // namespace nlb
