#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <vector>

#include "splatsdf/core/types.hpp"

namespace splatsdf {

// Row-major interleaved float image, values nominally in [0,1] for color.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  float& at(int x, int y, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

  Vec3<float> rgb(int x, int y) const {
    assert(channels >= 3);
    const float* p = &data[(size_t(y) * width + x) * channels];
    return {p[0], p[1], p[2]};
  }

  void set_rgb(int x, int y, const Vec3<float>& v) {
    float* p = &data[(size_t(y) * width + x) * channels];
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
  }

  size_t pixel_count() const { return size_t(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  Image clamped01() const {
    Image out = *this;
    for (auto& v : out.data) v = std::clamp(v, 0.f, 1.f);
    return out;
  }
};

inline float luminance(const Vec3<float>& rgb) {
  return 0.2126f * rgb[0] + 0.7152f * rgb[1] + 0.0722f * rgb[2];
}

}  // namespace splatsdf
