#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "rsvl/rng.hpp"
#include "rsvl/tensor.hpp"

namespace testutil {

inline rsvl::EmbeddingMatrix random_matrix(rsvl::Rng& rng, std::size_t rows, std::size_t dim) {
  std::vector<float> d(rows * dim);
  for (auto& v : d) v = static_cast<float>(rng.normal());
  return rsvl::EmbeddingMatrix(rows, dim, std::move(d));
}

inline std::vector<std::vector<float>> to_rows(const rsvl::EmbeddingMatrix& m) {
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("rsvl_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
