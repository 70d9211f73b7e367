#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace nlb {

/// Tolerance on |row norm - 1| for a matrix flagged as normalized.
inline constexpr double kUnitNormTolerance = 1e-5;
/// Rows with L2 norm below this cannot be normalized.
inline constexpr double kZeroRowThreshold = 1e-12;

/// Dense N x D float matrix, row-major. Immutable after construction.
///
/// The constructor rejects non-finite entries, and, when `normalized` is
/// true, any row whose L2 norm is more than kUnitNormTolerance from one.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                  bool normalized = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> data() const noexcept { return data_; }

 private:
  std::size_t rows_;
  std::size_t dim_;
  std::vector<float> data_;
  bool normalized_;
};

enum class EmbeddingFormat { kNlbe, kCsv };

/// ".csv" maps to kCsv, anything else to kNlbe.
EmbeddingFormat format_from_path(const std::filesystem::path& path);

/// Reads an "NLBE" binary file or a headerless CSV. The result is never
/// flagged normalized. Errors name the byte (binary) or line (CSV) offset.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);

/// Binary output reloads bit-identically; CSV uses 9 significant digits.
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                     EmbeddingFormat format);

/// Divides each row by its L2 norm (computed in double).
/// Throws InvalidArgument("zero row i") for rows with norm < kZeroRowThreshold.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

/// Multiplies every entry by `factor`; the normalized flag is dropped.
EmbeddingMatrix scale(const EmbeddingMatrix& m, float factor);

/// Selection operations require unit rows.
void require_normalized(const EmbeddingMatrix& m, const char* op);

}  // namespace nlb
