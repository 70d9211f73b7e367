#include "nlb/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "nlb/error.hpp"

namespace nlb {
namespace {

constexpr char kImtMagic[4] = {'I', 'M', 'T', '1'};
constexpr std::size_t kImtHeader = 16;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void check_channels(std::size_t c) {
  if (c != 1 && c != 3) throw InvalidArgument("images must have 1 or 3 channels");
}

ImageTensor load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ParseError(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageTensor img(image.height, image.width, color ? 3 : 1);
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError(path.string() + ": " + msg);
  }
  return img;
}

void save_png(const ImageTensor& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = img.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

}  // namespace

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::uint8_t fill)
    : h(height), w(width), c(channels), pixels(height * width * channels, fill) {
  check_channels(c);
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<std::uint8_t> data)
    : h(height), w(width), c(channels), pixels(std::move(data)) {
  check_channels(c);
  if (pixels.size() != h * w * c) {
    throw InvalidArgument("pixel buffer length " + std::to_string(pixels.size()) +
                          " != h*w*c = " + std::to_string(h * w * c));
  }
}

ImageFormat image_format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".png" ? ImageFormat::kPng : ImageFormat::kImt;
}

std::vector<std::uint8_t> encode_imt(const ImageTensor& img) {
  std::vector<std::uint8_t> out(std::begin(kImtMagic), std::end(kImtMagic));
  write_u32(out, static_cast<std::uint32_t>(img.h));
  write_u32(out, static_cast<std::uint32_t>(img.w));
  write_u32(out, static_cast<std::uint32_t>(img.c));
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

ImageTensor decode_imt(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kImtHeader || std::memcmp(bytes.data(), kImtMagic, 4) != 0) {
    throw ParseError("not an IMT1 image");
  }
  const std::size_t h = read_u32(bytes.data() + 4);
  const std::size_t w = read_u32(bytes.data() + 8);
  const std::size_t c = read_u32(bytes.data() + 12);
  if (c != 1 && c != 3) throw ParseError("IMT1 channel count must be 1 or 3");
  if (bytes.size() - kImtHeader != h * w * c) throw ParseError("IMT1 payload size mismatch");
  return ImageTensor(h, w, c,
                     std::vector<std::uint8_t>(bytes.begin() + kImtHeader, bytes.end()));
}

ImageTensor load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing image " + path.string());
  if (image_format_from_path(path) == ImageFormat::kPng) return load_png(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_imt(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  if (image_format_from_path(path) == ImageFormat::kPng) {
    save_png(img, path);
    return;
  }
  const auto bytes = encode_imt(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ImageTensor synthetic_pattern(std::size_t h, std::size_t w, std::size_t c) {
  ImageTensor img(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        // Diagonal stripes with a per-channel phase.
        img.at(y, x, ch) = static_cast<std::uint8_t>(((x + 2 * y + 85 * ch) * 37) % 256);
      }
    }
  }
  return img;
}

}  // namespace nlb
