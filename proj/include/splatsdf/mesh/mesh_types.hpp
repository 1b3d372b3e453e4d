#pragma once

#include <array>
#include <vector>

#include "splatsdf/core/types.hpp"

namespace splatsdf::mesh {

struct TriangleMesh {
  std::vector<Vec3<float>> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }

  double area() const {
    double a = 0;
    for (const auto& t : triangles) {
      const Vec3<float> e1 = vertices[t[1]] - vertices[t[0]];
      const Vec3<float> e2 = vertices[t[2]] - vertices[t[0]];
      a += 0.5 * double(e1.cross(e2).norm());
    }
    return a;
  }
};

}  // namespace splatsdf::mesh
