#include "splatsdf/priors/priors.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "splatsdf/core/types.hpp"

namespace splatsdf::priors {

EdgeMap EdgeMap::from_strength(const Image& strength_img, float threshold) {
  if (strength_img.channels != 1)
    throw std::invalid_argument("EdgeMap: strength image must be single-channel");
  EdgeMap e;
  e.width = strength_img.width;
  e.height = strength_img.height;
  e.threshold = threshold;
  e.strength = strength_img.data;
  e.binary.resize(e.strength.size());
  for (size_t i = 0; i < e.strength.size(); ++i) {
    e.binary[i] = e.strength[i] >= threshold ? 1 : 0;
    if (e.binary[i]) e.edge_pixels.push_back(int(i));
  }
  return e;
}

NormalMap NormalMap::from_image(const Image& decoded) {
  if (decoded.channels != 3) throw std::invalid_argument("NormalMap: need 3 channels");
  NormalMap n;
  n.width = decoded.width;
  n.height = decoded.height;
  n.normals.resize(size_t(n.width) * n.height);
  for (int y = 0; y < n.height; ++y)
    for (int x = 0; x < n.width; ++x) {
      Vec3<float> v = decoded.rgb(x, y);
      const float len = v.norm();
      n.at(x, y) = len > 0.5f ? Vec3<float>(v / len) : Vec3<float>{0, 0, 0};
    }
  return n;
}

Image NormalMap::to_image() const {
  Image img(width, height, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img.set_rgb(x, y, at(x, y));
  return img;
}

float edge_ray_weight(const EdgeMap& edge, float delta) {
  if (delta < 0) throw std::invalid_argument("edge_ray_weight: delta must be >= 0");
  const float omega = delta * float(edge.edge_count()) / float(size_t(edge.width) * edge.height);
  return std::min(omega, 1.f);
}

float photometric_weight(float edge_strength) {
  return 2.f * sigmoid(edge_strength);
}

std::vector<int> sample_ray_pixels(const EdgeMap& edge, int q, float delta, Rng& rng) {
  if (q < 1) throw std::invalid_argument("sample_ray_pixels: q must be >= 1");
  const float omega = edge_ray_weight(edge, delta);
  int n_edge = int(std::lround(double(omega) * q));
  if (edge.edge_pixels.empty()) n_edge = 0;
  const size_t total = size_t(edge.width) * edge.height;
  std::vector<int> out;
  out.reserve(q);
  for (int i = 0; i < n_edge; ++i)
    out.push_back(edge.edge_pixels[rng.uniform_int(edge.edge_pixels.size())]);
  for (int i = n_edge; i < q; ++i) out.push_back(int(rng.uniform_int(total)));
  return out;
}

double normal_residual(const NormalMap& rendered, const NormalMap& prior) {
  if (rendered.width != prior.width || rendered.height != prior.height)
    throw std::invalid_argument("normal_residual: resolution mismatch");
  double acc = 0;
  std::int64_t valid = 0;
  for (int y = 0; y < prior.height; ++y)
    for (int x = 0; x < prior.width; ++x) {
      if (!prior.valid(x, y)) continue;
      const Vec3<float> d = rendered.at(x, y) - prior.at(x, y);
      acc += std::abs(d[0]) + std::abs(d[1]) + std::abs(d[2]);
      ++valid;
    }
  if (valid == 0) {
    std::cerr << "normal_residual: no valid prior pixels\n";
    return 0.0;
  }
  return acc / double(valid);
}

}  // namespace splatsdf::priors
