#include "splatsdf/scene/edges.hpp"

#include <cmath>

namespace splatsdf::scene {

priors::EdgeMap compute_edges(const Image& rgb, float threshold) {
  const int w = rgb.width, h = rgb.height;
  std::vector<float> lum(size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum[size_t(y) * w + x] = luminance(rgb.rgb(x, y));

  auto clampxy = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lum[size_t(y) * w + x];
  };

  // 3x3 binomial blur
  std::vector<float> blur(lum.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      static const float k[3] = {0.25f, 0.5f, 0.25f};
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += k[dx + 1] * k[dy + 1] * clampxy(x + dx, y + dy);
      blur[size_t(y) * w + x] = acc;
    }

  auto b = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return blur[size_t(y) * w + x];
  };

  Image strength(w, h, 1);
  // max |gx| for input in [0,1] is 4, so the magnitude bound is 4*sqrt(2)
  const float norm = 1.f / (4.f * std::sqrt(2.f));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float gx = (b(x + 1, y - 1) + 2 * b(x + 1, y) + b(x + 1, y + 1)) -
                       (b(x - 1, y - 1) + 2 * b(x - 1, y) + b(x - 1, y + 1));
      const float gy = (b(x - 1, y + 1) + 2 * b(x, y + 1) + b(x + 1, y + 1)) -
                       (b(x - 1, y - 1) + 2 * b(x, y - 1) + b(x + 1, y - 1));
      strength.at(x, y, 0) = std::min(1.f, std::sqrt(gx * gx + gy * gy) * norm);
    }
  return priors::EdgeMap::from_strength(strength, threshold);
}

}  // namespace splatsdf::scene
