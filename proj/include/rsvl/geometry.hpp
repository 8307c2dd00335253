#pragma once

#include <cstdint>

namespace rsvl {

// Axis-aligned pixel (or cell) rectangle: [x, x + w) x [y, y + h).
struct CropRect {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 0;
  std::int64_t h = 0;

  bool fits_in(std::int64_t width, std::int64_t height) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
  }

  friend bool operator==(const CropRect&, const CropRect&) = default;
};

}  // namespace rsvl
