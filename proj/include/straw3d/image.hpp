#pragma once

#include <cstdint>
#include <vector>

namespace straw3d {

// Per-pixel class labels: 0 = background, 1 = fruit, 255 = invalid/no data.
struct LabelImage {
  static constexpr uint8_t kInvalid = 255;

  int width = 0, height = 0;
  std::vector<uint8_t> labels;

  LabelImage() = default;
  LabelImage(int w, int h, uint8_t fill = 0)
      : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {}
  uint8_t& at(int u, int v) { return labels[static_cast<size_t>(v) * width + u]; }
  uint8_t at(int u, int v) const { return labels[static_cast<size_t>(v) * width + u]; }
};

// Interleaved 8-bit RGB.
struct ColorImage {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;

  ColorImage() = default;
  ColorImage(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}
  uint8_t* px(int u, int v) { return &rgb[(static_cast<size_t>(v) * width + u) * 3]; }
  const uint8_t* px(int u, int v) const { return &rgb[(static_cast<size_t>(v) * width + u) * 3]; }
};

}  // namespace straw3d
