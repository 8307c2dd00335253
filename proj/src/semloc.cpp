#include "rsvl/semloc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "rsvl/error.hpp"

namespace rsvl {

SemLocMap SemLocMap::zeros(std::size_t width, std::size_t height) {
  return SemLocMap{width, height, std::vector<float>(width * height, 0.0f)};
}

SemLocMap SemLocMap::uniform(std::size_t width, std::size_t height) {
  auto n = static_cast<double>(width * height);
  return SemLocMap{width, height, std::vector<float>(width * height, static_cast<float>(1.0 / n))};
}

double SemLocMap::total() const {
  double s = 0.0;
  for (float m : mass) s += m;
  return s;
}

GroundTruthRegion::GroundTruthRegion(std::size_t map_width, std::size_t map_height,
                                     std::vector<CropRect> rects)
    : width_(map_width), height_(map_height), rects_(std::move(rects)),
      mask_(map_width * map_height, 0) {
  auto w = static_cast<std::int64_t>(width_);
  auto h = static_cast<std::int64_t>(height_);
  for (const auto& r : rects_) {
    if (!r.fits_in(w, h)) {
      throw Error(ErrorCode::InvalidRegion, "rect (" + std::to_string(r.x) + "," +
                                                std::to_string(r.y) + "," + std::to_string(r.w) +
                                                "," + std::to_string(r.h) + ") outside " +
                                                std::to_string(w) + "x" + std::to_string(h));
    }
    for (std::int64_t y = r.y; y < r.y + r.h; ++y) {
      for (std::int64_t x = r.x; x < r.x + r.w; ++x) mask_[y * width_ + x] = 1;
    }
  }
  double sx = 0, sy = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      if (mask_[y * width_ + x]) {
        sx += static_cast<double>(x) + 0.5;
        sy += static_cast<double>(y) + 0.5;
        ++count;
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::InvalidRegion, "ground truth union is empty");
  centroid_ = {sx / static_cast<double>(count), sy / static_cast<double>(count)};
}

void validate(const SemLocWeights& w) {
  if (w.w_su < 0 || w.w_as < 0 || w.w_da < 0 ||
      std::abs(w.w_su + w.w_as + w.w_da - 1.0) > 1e-9) {
    throw Error(ErrorCode::WeightSumInvalid,
                "weights must be nonnegative and sum to 1, got " + std::to_string(w.w_su) + ", " +
                    std::to_string(w.w_as) + ", " + std::to_string(w.w_da));
  }
}

namespace {

std::vector<std::int64_t> axis_offsets(std::int64_t extent, std::int64_t window,
                                       std::int64_t stride) {
  std::vector<std::int64_t> offs;
  for (std::int64_t o = 0; o + window <= extent; o += stride) offs.push_back(o);
  if (offs.back() + window < extent) offs.push_back(extent - window);
  return offs;
}

// Center of a cell along one axis in pixels; edge cells may be narrower.
double cell_center_px(std::size_t index, std::int64_t cell, std::int64_t extent) {
  auto start = static_cast<std::int64_t>(index) * cell;
  auto width = std::min(cell, extent - start);
  return static_cast<double>(start) + 0.5 * static_cast<double>(width);
}

}  // namespace

std::vector<CropRect> window_grid(std::int64_t scene_w, std::int64_t scene_h,
                                  std::int64_t window, std::int64_t stride) {
  if (window <= 0 || window > std::min(scene_w, scene_h)) {
    throw Error(ErrorCode::WindowTooLarge, "window " + std::to_string(window) + " for scene " +
                                               std::to_string(scene_w) + "x" +
                                               std::to_string(scene_h));
  }
  if (stride < 1) throw Error(ErrorCode::InvalidConfig, "stride must be >= 1");
  auto xs = axis_offsets(scene_w, window, stride);
  auto ys = axis_offsets(scene_h, window, stride);
  std::vector<CropRect> out;
  out.reserve(xs.size() * ys.size());
  for (auto y : ys) {
    for (auto x : xs) out.push_back({x, y, window, window});
  }
  return out;
}

std::pair<std::size_t, std::size_t> map_dims(std::int64_t scene_w, std::int64_t scene_h,
                                             std::int64_t cell) {
  if (cell < 1 || scene_w < 1 || scene_h < 1) {
    throw Error(ErrorCode::InvalidConfig, "scene and cell sizes must be positive");
  }
  return {static_cast<std::size_t>((scene_w + cell - 1) / cell),
          static_cast<std::size_t>((scene_h + cell - 1) / cell)};
}

SemLocMap similarity_map(std::span<const WindowScore> windows, std::int64_t scene_w,
                         std::int64_t scene_h, std::int64_t cell) {
  if (windows.empty()) throw Error(ErrorCode::NoWindows, "no window scores");
  for (const auto& w : windows) {
    if (!std::isfinite(w.score)) throw Error(ErrorCode::NaNScore, "non-finite window score");
  }
  auto [mw, mh] = map_dims(scene_w, scene_h, cell);
  std::vector<double> sum(mw * mh, 0.0);
  std::vector<std::size_t> count(mw * mh, 0);

  for (const auto& w : windows) {
    for (std::size_t cy = 0; cy < mh; ++cy) {
      double py = cell_center_px(cy, cell, scene_h);
      if (py < static_cast<double>(w.rect.y) || py >= static_cast<double>(w.rect.y + w.rect.h)) {
        continue;
      }
      for (std::size_t cx = 0; cx < mw; ++cx) {
        double px = cell_center_px(cx, cell, scene_w);
        if (px < static_cast<double>(w.rect.x) || px >= static_cast<double>(w.rect.x + w.rect.w)) {
          continue;
        }
        sum[cy * mw + cx] += w.score;
        ++count[cy * mw + cx];
      }
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (count[k]) {
      sum[k] /= static_cast<double>(count[k]);
      lo = std::min(lo, sum[k]);
    }
  }
  if (!std::isfinite(lo)) throw Error(ErrorCode::NoWindows, "no window covers any cell");

  // Uncovered cells sit at the minimum and so receive no mass.
  double total = 0.0;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    sum[k] = count[k] ? sum[k] - lo : 0.0;
    total += sum[k];
  }
  if (!(total > 0.0)) return SemLocMap::uniform(mw, mh);

  auto map = SemLocMap::zeros(mw, mh);
  for (std::size_t k = 0; k < sum.size(); ++k) map.mass[k] = static_cast<float>(sum[k] / total);
  return map;
}

GroundTruthRegion gt_from_pixel_rects(std::span<const CropRect> rects, std::int64_t scene_w,
                                      std::int64_t scene_h, std::int64_t cell) {
  auto [mw, mh] = map_dims(scene_w, scene_h, cell);
  std::vector<CropRect> cells;
  for (const auto& r : rects) {
    if (!r.fits_in(scene_w, scene_h)) {
      throw Error(ErrorCode::InvalidRegion, "pixel rect outside scene");
    }
    auto inside = [](double c, std::int64_t a, std::int64_t len) {
      return c >= static_cast<double>(a) && c < static_cast<double>(a + len);
    };
    std::int64_t x0 = -1, x1 = -1, y0 = -1, y1 = -1;
    for (std::size_t cx = 0; cx < mw; ++cx) {
      if (inside(cell_center_px(cx, cell, scene_w), r.x, r.w)) {
        if (x0 < 0) x0 = static_cast<std::int64_t>(cx);
        x1 = static_cast<std::int64_t>(cx);
      }
    }
    for (std::size_t cy = 0; cy < mh; ++cy) {
      if (inside(cell_center_px(cy, cell, scene_h), r.y, r.h)) {
        if (y0 < 0) y0 = static_cast<std::int64_t>(cy);
        y1 = static_cast<std::int64_t>(cy);
      }
    }
    if (x0 >= 0 && y0 >= 0) cells.push_back({x0, y0, x1 - x0 + 1, y1 - y0 + 1});
  }
  return GroundTruthRegion(mw, mh, std::move(cells));
}

std::pair<double, double> prob_centroid(const SemLocMap& map) {
  double sx = 0, sy = 0, total = 0;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      double m = map.at(x, y);
      sx += m * (static_cast<double>(x) + 0.5);
      sy += m * (static_cast<double>(y) + 0.5);
      total += m;
    }
  }
  if (!(total > 0.0)) {
    return {0.5 * static_cast<double>(map.width), 0.5 * static_cast<double>(map.height)};
  }
  return {sx / total, sy / total};
}

double half_diagonal(const SemLocMap& map) {
  double w = static_cast<double>(map.width) - 1.0;
  double h = static_cast<double>(map.height) - 1.0;
  return 0.5 * std::sqrt(w * w + h * h);
}

double r_su(const SemLocMap& map, const GroundTruthRegion& gt) {
  double inside = 0, total = 0;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      double m = map.at(x, y);
      total += m;
      if (gt.contains(x, y)) inside += m;
    }
  }
  if (!(total > 0.0)) return 0.0;
  return std::clamp(inside / total, 0.0, 1.0);
}

double r_as(const SemLocMap& map, const GroundTruthRegion& gt) {
  double diag = half_diagonal(map);
  if (!(diag > 0.0)) return 0.0;
  auto [px, py] = prob_centroid(map);
  auto [gx, gy] = gt.centroid();
  return std::clamp(std::hypot(px - gx, py - gy) / diag, 0.0, 1.0);
}

double r_da(const SemLocMap& map) {
  double diag = half_diagonal(map);
  if (!(diag > 0.0)) return 1.0;
  auto [px, py] = prob_centroid(map);
  double spread = 0, total = 0;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      double m = map.at(x, y);
      if (m == 0.0) continue;
      spread += m * std::hypot(static_cast<double>(x) + 0.5 - px, static_cast<double>(y) + 0.5 - py);
      total += m;
    }
  }
  if (!(total > 0.0)) return 1.0;
  return std::clamp(1.0 - (spread / total) / diag, 0.0, 1.0);
}

double r_mi(double rsu, double ras, double rda, const SemLocWeights& w) {
  validate(w);
  return w.w_su * rsu + w.w_as * (1.0 - ras) + w.w_da * rda;
}

SemLocReport semloc_report(const SemLocScene& scene, std::span<const float> query,
                           const GroundTruthRegion& gt, const SemLocWeights& weights) {
  validate(weights);
  const auto& emb = scene.window_embeddings;
  if (emb.rows() != scene.windows.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(emb.rows()) + " window embeddings for " +
                                              std::to_string(scene.windows.size()) + " windows");
  }
  if (emb.dim() != query.size()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) +
                                            " vs window dim " + std::to_string(emb.dim()));
  }
  if (!emb.normalized()) throw Error(ErrorCode::NotNormalized, "window embeddings");

  std::vector<WindowScore> scores(scene.windows.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = {scene.windows[i], dot(emb.row(i), query)};
  }
  SemLocReport r;
  r.map = similarity_map(scores, scene.scene_w, scene.scene_h, scene.cell);
  r.r_su = rsvl::r_su(r.map, gt);
  r.r_as = rsvl::r_as(r.map, gt);
  r.r_da = rsvl::r_da(r.map);
  r.r_mi = rsvl::r_mi(r.r_su, r.r_as, r.r_da, weights);
  return r;
}

void write_pgm(const SemLocMap& map, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  f << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  float mx = 0.0f;
  for (float m : map.mass) mx = std::max(mx, m);
  for (float m : map.mass) {
    double v = mx > 0.0f ? std::round(255.0 * m / mx) : 0.0;
    f.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0))));
  }
}

GroundTruthFile read_ground_truth(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    auto j = nlohmann::json::parse(f);
    GroundTruthFile gt;
    if (j.contains("scene")) {
      gt.scene = j["scene"].is_string() ? j["scene"].get<std::string>() : j["scene"].dump();
    }
    for (const auto& r : j.at("rects")) {
      if (!r.is_array() || r.size() != 4) {
        throw Error(ErrorCode::Parse, path.string() + ": rect must be [x, y, w, h]");
      }
      gt.rects.push_back({r[0].get<std::int64_t>(), r[1].get<std::int64_t>(),
                          r[2].get<std::int64_t>(), r[3].get<std::int64_t>()});
    }
    gt.in_cells = j.value("units", std::string("pixels")) == "cells";
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

}  // namespace rsvl
