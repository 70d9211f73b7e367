#include "nlb/embedding.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "nlb/error.hpp"

namespace nlb {
namespace {

constexpr std::array<char, 4> kMagic = {'N', 'L', 'B', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <typename T>
T read_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

template <typename T>
void write_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingMatrix parse_nlbe(const std::string& bytes, const std::string& name) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes) {
    throw ParseError(name + ": truncated header at byte " + std::to_string(bytes.size()));
  }
  if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) {
    throw ParseError(name + ": bad magic at byte 0 (expected \"NLBE\")");
  }
  const auto version = read_le<std::uint32_t>(p + 4);
  if (version != kVersion) {
    throw ParseError(name + ": unsupported version " + std::to_string(version) + " at byte 4");
  }
  const auto n = read_le<std::uint64_t>(p + 8);
  const auto d = read_le<std::uint32_t>(p + 16);
  if (n == 0 || d == 0) {
    throw ParseError(name + ": header declares empty matrix (n=" + std::to_string(n) +
                     ", d=" + std::to_string(d) + ") at byte 8");
  }
  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (n > payload / 4 / d || n * d * 4 != payload) {
    throw ParseError(name + ": payload of " + std::to_string(payload) +
                     " bytes does not match n*d*4 declared at byte 8");
  }
  std::vector<float> data(n * d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t offset = kHeaderBytes + 4 * i;
    const float v = std::bit_cast<float>(read_le<std::uint32_t>(p + offset));
    if (!std::isfinite(v)) {
      throw ParseError(name + ": non-finite value at byte " + std::to_string(offset));
    }
    data[i] = v;
  }
  return EmbeddingMatrix(n, d, std::move(data));
}

EmbeddingMatrix parse_csv(const std::string& text, const std::string& name) {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (pos >= text.size()) break;  // trailing newline
      throw ParseError(name + ": empty row at line " + std::to_string(line_no));
    }

    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string_view field = line.substr(start, comma == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : comma - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      float v = 0.0f;
      auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
        throw ParseError(name + ": bad number '" + std::string(field) + "' at line " +
                         std::to_string(line_no));
      }
      if (!std::isfinite(v)) {
        throw ParseError(name + ": non-finite value at line " + std::to_string(line_no));
      }
      data.push_back(v);
      ++fields;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      dim = fields;
    } else if (fields != dim) {
      throw ParseError(name + ": row length " + std::to_string(fields) + " != " +
                       std::to_string(dim) + " at line " + std::to_string(line_no));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(name + ": no rows");
  return EmbeddingMatrix(rows, dim, std::move(data));
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                                 bool normalized)
    : rows_(rows), dim_(dim), data_(std::move(data)), normalized_(normalized) {
  if (rows_ == 0 || dim_ == 0) throw InvalidArgument("embedding matrix must be non-empty");
  if (data_.size() != rows_ * dim_) {
    throw InvalidArgument("embedding data length " + std::to_string(data_.size()) +
                          " != n*d = " + std::to_string(rows_ * dim_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw InvalidArgument("non-finite entry at row " + std::to_string(i / dim_));
    }
  }
  if (normalized_) {
    for (std::size_t i = 0; i < rows_; ++i) {
      double sq = 0.0;
      for (const float v : row(i)) sq += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
        throw InvalidArgument("row " + std::to_string(i) + " is not unit norm");
      }
    }
  }
}

EmbeddingFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::kCsv : EmbeddingFormat::kNlbe;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  const std::string bytes = read_file(path);
  return format == EmbeddingFormat::kNlbe ? parse_nlbe(bytes, path.string())
                                          : parse_csv(bytes, path.string());
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                     EmbeddingFormat format) {
  std::string out;
  if (format == EmbeddingFormat::kNlbe) {
    out.reserve(kHeaderBytes + m.data().size() * 4);
    out.append(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, m.rows());
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
    for (const float v : m.data()) write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  } else {
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto r = m.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (j > 0) out.push_back(',');
        const int len = std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(r[j]));
        out.append(buf, static_cast<std::size_t>(len));
      }
      out.push_back('\n');
    }
  }
  write_file(path, out);
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  std::vector<float> out(m.data().begin(), m.data().end());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (const float v : m.row(i)) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm < kZeroRowThreshold) throw InvalidArgument("zero row " + std::to_string(i));
    float* r = out.data() + i * m.dim();
    for (std::size_t j = 0; j < m.dim(); ++j) r[j] = static_cast<float>(r[j] / norm);
  }
  return EmbeddingMatrix(m.rows(), m.dim(), std::move(out), true);
}

EmbeddingMatrix scale(const EmbeddingMatrix& m, float factor) {
  std::vector<float> out(m.data().begin(), m.data().end());
  for (float& v : out) v *= factor;
  return EmbeddingMatrix(m.rows(), m.dim(), std::move(out));
}

void require_normalized(const EmbeddingMatrix& m, const char* op) {
  if (!m.normalized()) {
    throw InvalidArgument(std::string(op) + " requires row-normalized embeddings");
  }
}

}  // namespace nlb
