#pragma once

#include <cstdint>
#include <vector>

#include "splatsdf/core/image.hpp"

namespace splatsdf::priors {

// Per-pixel edge strength in [0,1] plus the thresholded edge-pixel set.
struct EdgeMap {
  int width = 0, height = 0;
  std::vector<float> strength;        // size w*h
  std::vector<std::uint8_t> binary;   // 1 = edge pixel
  std::vector<int> edge_pixels;       // flat indices of binary==1, ascending
  float threshold = 0.3f;

  float at(int x, int y) const { return strength[size_t(y) * width + x]; }
  int edge_count() const { return int(edge_pixels.size()); }

  static EdgeMap from_strength(const Image& strength_img, float threshold);
};

// World-frame unit normals with a validity mask (zero vector = invalid).
struct NormalMap {
  int width = 0, height = 0;
  std::vector<Vec3<float>> normals;

  const Vec3<float>& at(int x, int y) const { return normals[size_t(y) * width + x]; }
  Vec3<float>& at(int x, int y) { return normals[size_t(y) * width + x]; }
  bool valid(int x, int y) const { return at(x, y).squaredNorm() > 0.25f; }

  static NormalMap from_image(const Image& decoded);
  Image to_image() const;
};

}  // namespace splatsdf::priors
