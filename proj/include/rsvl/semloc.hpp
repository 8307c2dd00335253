#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsvl/geometry.hpp"
#include "rsvl/tensor.hpp"

namespace rsvl {

// Attention mass over a width x height grid of cells, row-major. Cell (x, y)
// has its center at (x + 0.5, y + 0.5) in continuous cell coordinates.
struct SemLocMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> mass;

  float at(std::size_t x, std::size_t y) const { return mass[y * width + x]; }
  float& at(std::size_t x, std::size_t y) { return mass[y * width + x]; }

  static SemLocMap zeros(std::size_t width, std::size_t height);
  static SemLocMap uniform(std::size_t width, std::size_t height);
  double total() const;
};

/// Union of cell rectangles on a map of known size.
class GroundTruthRegion {
 public:
  GroundTruthRegion(std::size_t map_width, std::size_t map_height, std::vector<CropRect> rects);

  const std::vector<CropRect>& rects() const noexcept { return rects_; }
  bool contains(std::size_t x, std::size_t y) const { return mask_[y * width_ + x] != 0; }
  // Mean of the centers of every cell in the union.
  std::pair<double, double> centroid() const { return centroid_; }

 private:
  std::size_t width_, height_;
  std::vector<CropRect> rects_;
  std::vector<std::uint8_t> mask_;
  std::pair<double, double> centroid_;
};

struct SemLocWeights {
  double w_su = 1.0 / 3.0;
  double w_as = 1.0 / 3.0;
  double w_da = 1.0 / 3.0;
};

void validate(const SemLocWeights& w);

/// Window rectangles at offsets 0, stride, 2*stride, ... along each axis;
/// the last row/column is pulled flush with the far edge. Row-major order.
std::vector<CropRect> window_grid(std::int64_t scene_w, std::int64_t scene_h,
                                  std::int64_t window, std::int64_t stride);

struct WindowScore {
  CropRect rect;
  double score = 0.0;
};

/// Each cell takes the mean score of the windows covering its center; the
/// field is shifted so its minimum is 0 and scaled to unit mass. A flat
/// field becomes the uniform map.
SemLocMap similarity_map(std::span<const WindowScore> windows, std::int64_t scene_w,
                         std::int64_t scene_h, std::int64_t cell);

// Map dimensions used by similarity_map for a scene.
std::pair<std::size_t, std::size_t> map_dims(std::int64_t scene_w, std::int64_t scene_h,
                                             std::int64_t cell);

/// Converts pixel rectangles to the cells whose centers they contain.
GroundTruthRegion gt_from_pixel_rects(std::span<const CropRect> rects, std::int64_t scene_w,
                                      std::int64_t scene_h, std::int64_t cell);

std::pair<double, double> prob_centroid(const SemLocMap& map);

// Normalizing length for distances: half the span between the first and
// last cell centers, 0.5 * sqrt((W-1)^2 + (H-1)^2).
double half_diagonal(const SemLocMap& map);

double r_su(const SemLocMap& map, const GroundTruthRegion& gt);
double r_as(const SemLocMap& map, const GroundTruthRegion& gt);
double r_da(const SemLocMap& map);
double r_mi(double rsu, double ras, double rda, const SemLocWeights& w);

struct SemLocScene {
  std::int64_t scene_w = 0;
  std::int64_t scene_h = 0;
  std::int64_t cell = 1;
  std::vector<CropRect> windows;
  EmbeddingMatrix window_embeddings;  // one normalized row per window
};

struct SemLocReport {
  double r_su = 0, r_as = 0, r_da = 0, r_mi = 0;
  SemLocMap map;
};

SemLocReport semloc_report(const SemLocScene& scene, std::span<const float> query,
                           const GroundTruthRegion& gt, const SemLocWeights& weights);

// 8-bit binary PGM, scaled so the largest cell maps to 255.
void write_pgm(const SemLocMap& map, const std::filesystem::path& path);

struct GroundTruthFile {
  std::string scene;
  std::vector<CropRect> rects;
  bool in_cells = false;  // "units": "cells"; pixels otherwise
};

GroundTruthFile read_ground_truth(const std::filesystem::path& path);

}  // namespace rsvl
