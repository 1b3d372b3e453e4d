#include "splatsdf/mesh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatsdf::mesh {

TriangleMesh cleanup(const TriangleMesh& m, float min_area) {
  TriangleMesh out;
  std::vector<int> remap(m.vertices.size(), -1);
  for (const auto& t : m.triangles) {
    const Vec3<float> e1 = m.vertices[t[1]] - m.vertices[t[0]];
    const Vec3<float> e2 = m.vertices[t[2]] - m.vertices[t[0]];
    if (0.5f * e1.cross(e2).norm() < min_area) continue;
    std::array<int, 3> nt{};
    for (int k = 0; k < 3; ++k) {
      if (remap[t[k]] < 0) {
        remap[t[k]] = int(out.vertices.size());
        out.vertices.push_back(m.vertices[t[k]]);
      }
      nt[k] = remap[t[k]];
    }
    out.triangles.push_back(nt);
  }
  return out;
}

std::vector<Vec3<float>> sample_surface(const TriangleMesh& m, int count, std::uint64_t seed) {
  if (m.triangles.empty()) throw std::invalid_argument("sample_surface: empty mesh");
  std::vector<double> cum(m.triangles.size());
  double total = 0;
  for (size_t i = 0; i < m.triangles.size(); ++i) {
    const auto& t = m.triangles[i];
    const Vec3<float> e1 = m.vertices[t[1]] - m.vertices[t[0]];
    const Vec3<float> e2 = m.vertices[t[2]] - m.vertices[t[0]];
    total += 0.5 * double(e1.cross(e2).norm());
    cum[i] = total;
  }
  if (total <= 0) throw std::invalid_argument("sample_surface: zero-area mesh");

  Rng rng(seed);
  std::vector<Vec3<float>> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double pick = rng.uniform() * total;
    const size_t ti = std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin();
    const auto& t = m.triangles[std::min(ti, m.triangles.size() - 1)];
    // uniform barycentric via the sqrt trick
    const float r1 = std::sqrt(float(rng.uniform()));
    const float r2 = float(rng.uniform());
    const float a = 1 - r1, b = r1 * (1 - r2), c = r1 * r2;
    out.push_back(a * m.vertices[t[0]] + b * m.vertices[t[1]] + c * m.vertices[t[2]]);
  }
  return out;
}

std::vector<Vec3<float>> frustum_filter(const std::vector<Vec3<float>>& points,
                                        const std::vector<scene::Camera<float>>& cameras,
                                        float near_clip) {
  std::vector<Vec3<float>> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    for (const auto& cam : cameras) {
      const Vec3<float> pr = cam.project(p);
      if (pr[2] > near_clip && pr[0] >= 0 && pr[0] < float(cam.width) && pr[1] >= 0 &&
          pr[1] < float(cam.height)) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

}  // namespace splatsdf::mesh
