#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsvl {

inline constexpr double kNormTolerance = 1e-5;
inline constexpr double kZeroNorm = 1e-12;

/// Dense row-major N x D matrix of 32-bit floats.
///
/// When `normalized()` is true every row has unit Euclidean norm (within
/// kNormTolerance). The constructor enforces both the size invariant and,
/// when the flag is requested, the unit-norm invariant.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim);
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                  bool normalized = false);

  static EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows,
                                   bool normalized = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> mutable_data() noexcept {
    normalized_ = false;
    return data_;
  }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  float at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  // Rows gathered in the given order; keeps the normalized flag.
  EmbeddingMatrix select_rows(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
};

/// Image-by-text score table; rows are images, columns are texts.
struct SimilarityMatrix {
  std::size_t n_images = 0;
  std::size_t n_texts = 0;
  std::vector<float> scores;

  float at(std::size_t image, std::size_t text) const {
    return scores[image * n_texts + text];
  }
  std::span<const float> image_row(std::size_t image) const {
    return std::span<const float>(scores).subspan(image * n_texts, n_texts);
  }
  std::vector<float> text_column(std::size_t text) const;
};

double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);

/// Divides each row by its Euclidean norm. Throws ZeroRow for rows with
/// norm <= 1e-12.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

/// scores[i][j] = <images.row(i), texts.row(j)>, accumulated in double.
SimilarityMatrix similarity(const EmbeddingMatrix& images, const EmbeddingMatrix& texts);

// RSEB binary format, little-endian:
//   "RSEB" | u32 version=1 | u64 rows | u64 dim | u32 flags (bit0 = normalized)
//   | rows*dim binary32 values, row-major.
inline constexpr std::uint32_t kRsebVersion = 1;
inline constexpr std::size_t kRsebHeaderBytes = 4 + 4 + 8 + 8 + 4;

std::vector<std::uint8_t> encode_rseb(const EmbeddingMatrix& m);
EmbeddingMatrix decode_rseb(std::span<const std::uint8_t> bytes);

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// Sidecar ids file: one JSON object per row, {"row", "id", "label"}.
struct RowId {
  std::size_t row = 0;
  std::string id;
  std::optional<std::int64_t> label;
};

void write_row_ids(const std::vector<RowId>& ids, const std::filesystem::path& path);
std::vector<RowId> read_row_ids(const std::filesystem::path& path);

}  // namespace rsvl
