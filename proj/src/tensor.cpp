#include "rsvl/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <json.hpp>

#include "rsvl/error.hpp"

namespace rsvl {

namespace {

void check_unit_rows(const EmbeddingMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = norm(m.row(i));
    if (std::abs(n - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::NotNormalized,
                  "row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
  }
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>((value >> (8 * b)) & 0xFF));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    value |= static_cast<T>(in[offset + b]) << (8 * b);
  }
  return value;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                                 bool normalized)
    : rows_(rows), dim_(dim), data_(std::move(data)), normalized_(normalized) {
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCode::ShapeMismatch,
                "data length " + std::to_string(data_.size()) + " != " + std::to_string(rows_) +
                    " x " + std::to_string(dim_));
  }
  if (normalized_) check_unit_rows(*this);
}

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<float>>& rows,
                                           bool normalized) {
  std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::vector<float> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorCode::ShapeMismatch, "ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(rows.size(), dim, std::move(data), normalized);
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t idx : indices) {
    if (idx >= rows_) throw Error(ErrorCode::ShapeMismatch, "row index out of range");
    auto r = row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  EmbeddingMatrix m(indices.size(), dim_, std::move(out));
  m.normalized_ = normalized_;
  return m;
}

std::vector<float> SimilarityMatrix::text_column(std::size_t text) const {
  std::vector<float> col(n_images);
  for (std::size_t i = 0; i < n_images; ++i) col[i] = at(i, text);
  return col;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  }
  return acc;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  std::vector<float> out(m.data().begin(), m.data().end());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = norm(m.row(i));
    if (!(n > kZeroNorm)) {
      throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < m.dim(); ++j) {
      out[i * m.dim() + j] = static_cast<float>(static_cast<double>(m.at(i, j)) / n);
    }
  }
  return EmbeddingMatrix(m.rows(), m.dim(), std::move(out), true);
}

SimilarityMatrix similarity(const EmbeddingMatrix& images, const EmbeddingMatrix& texts) {
  if (images.dim() != texts.dim()) {
    throw Error(ErrorCode::DimMismatch, "image dim " + std::to_string(images.dim()) +
                                            " vs text dim " + std::to_string(texts.dim()));
  }
  SimilarityMatrix s;
  s.n_images = images.rows();
  s.n_texts = texts.rows();
  s.scores.resize(s.n_images * s.n_texts);
  for (std::size_t i = 0; i < s.n_images; ++i) {
    auto a = images.row(i);
    for (std::size_t j = 0; j < s.n_texts; ++j) {
      s.scores[i * s.n_texts + j] = static_cast<float>(dot(a, texts.row(j)));
    }
  }
  return s;
}

std::vector<std::uint8_t> encode_rseb(const EmbeddingMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kRsebHeaderBytes + m.data().size() * 4);
  for (char c : std::string_view("RSEB")) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint32_t>(out, kRsebVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.dim());
  put_le<std::uint32_t>(out, m.normalized() ? 1u : 0u);
  for (float v : m.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingMatrix decode_rseb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "missing magic");
  if (std::memcmp(bytes.data(), "RSEB", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "expected \"RSEB\"");
  }
  if (bytes.size() < kRsebHeaderBytes) throw Error(ErrorCode::TruncatedFile, "short header");
  auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kRsebVersion) {
    throw Error(ErrorCode::VersionUnsupported, "version " + std::to_string(version));
  }
  auto rows = get_le<std::uint64_t>(bytes, 8);
  auto dim = get_le<std::uint64_t>(bytes, 16);
  auto flags = get_le<std::uint32_t>(bytes, 24);
  std::size_t payload = bytes.size() - kRsebHeaderBytes;
  if (dim != 0 && rows > payload / 4 / dim) {
    throw Error(ErrorCode::TruncatedFile, "expected " + std::to_string(rows) + " x " +
                                              std::to_string(dim) + " values");
  }
  std::size_t count = static_cast<std::size_t>(rows * dim);
  if (payload < count * 4) throw Error(ErrorCode::TruncatedFile, "payload too short");
  std::vector<float> data(count);
  for (std::size_t k = 0; k < count; ++k) {
    data[k] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kRsebHeaderBytes + 4 * k));
  }
  return EmbeddingMatrix(rows, dim, std::move(data), (flags & 1u) != 0);
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  auto bytes = encode_rseb(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_rseb(bytes);
}

void write_row_ids(const std::vector<RowId>& ids, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& r : ids) {
    nlohmann::json j = {{"row", r.row}, {"id", r.id}, {"label", nullptr}};
    if (r.label) j["label"] = *r.label;
    f << j.dump() << '\n';
  }
}

std::vector<RowId> read_row_ids(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<RowId> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      RowId r;
      r.row = j.at("row").get<std::size_t>();
      r.id = j.at("id").get<std::string>();
      if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<std::int64_t>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rsvl
