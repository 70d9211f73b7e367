#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace nlb {

/// 8-bit image, row-major with interleaved channels (1 or 3).
struct ImageTensor {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;
  std::vector<std::uint8_t> pixels;

  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::uint8_t fill = 0);
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<std::uint8_t> data);

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t ch) {
    return pixels[(y * w + x) * c + ch];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t ch) const {
    return pixels[(y * w + x) * c + ch];
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

enum class ImageFormat { kImt, kPng };

/// ".png" maps to kPng, anything else to the raw IMT1 format.
ImageFormat image_format_from_path(const std::filesystem::path& path);

/// IMT1: magic "IMT1", u32 LE h, w, c, then h*w*c bytes.
ImageTensor load_image(const std::filesystem::path& path);
void save_image(const ImageTensor& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_imt(const ImageTensor& img);
ImageTensor decode_imt(const std::vector<std::uint8_t>& bytes);

/// Deterministic stand-in for an external blend pattern.
ImageTensor synthetic_pattern(std::size_t h, std::size_t w, std::size_t c);

}  // namespace nlb
