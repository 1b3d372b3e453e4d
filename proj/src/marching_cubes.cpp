#include "splatsdf/mesh/marching_cubes.hpp"

#include <cstdint>
#include <iostream>

#include "splatsdf/core/parallel.hpp"
#include "splatsdf/sdf/field.hpp"

namespace splatsdf::mesh {

namespace {
#include "mc_tables.inc"

// cube corner offsets in (x, y, z) lattice steps
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Canonical lattice slot of each cube edge: axis (0=x,1=y,2=z) plus the
// lattice offset of the edge's anchor point.
struct EdgeSlot {
  int axis, dx, dy, dz;
};
constexpr EdgeSlot kEdgeSlot[12] = {
    {0, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 0, 0},
    {0, 0, 0, 1}, {1, 1, 0, 1}, {0, 0, 1, 1}, {1, 0, 0, 1},
    {2, 0, 0, 0}, {2, 1, 0, 0}, {2, 1, 1, 0}, {2, 0, 1, 0},
};

}  // namespace

TriangleMesh marching_cubes(const ScalarField& field, const BoundingBox& box, int resolution,
                            float iso) {
  if (resolution < 2) throw std::invalid_argument("marching_cubes: resolution must be >= 2");
  const int n = resolution;
  const int np = n + 1;  // lattice points per axis
  const Vec3<float> step = box.extent() / float(n);

  // evaluate the field on the full lattice in parallel chunks
  std::vector<float> values(size_t(np) * np * np);
  {
    const std::int64_t total = std::int64_t(values.size());
    const std::int64_t chunk = 65536;
    const std::int64_t nchunks = (total + chunk - 1) / chunk;
    ThreadPool::global().parallel_for(nchunks, [&](int, std::int64_t cb, std::int64_t ce) {
      MatX<float> pts;
      VecX<float> out;
      for (std::int64_t ci = cb; ci < ce; ++ci) {
        const std::int64_t b = ci * chunk, e = std::min(total, b + chunk);
        pts.resize(e - b, 3);
        for (std::int64_t i = b; i < e; ++i) {
          const int x = int(i % np), y = int((i / np) % np), z = int(i / (np * np));
          pts.row(i - b) = (box.lo + Vec3<float>{x * step[0], y * step[1], z * step[2]})
                               .transpose();
        }
        out.resize(e - b);
        field(pts, out);
        for (std::int64_t i = b; i < e; ++i) values[i] = out[i - b];
      }
    });
  }
  auto val = [&](int x, int y, int z) -> float {
    return values[(size_t(z) * np + y) * np + x];
  };

  TriangleMesh out;
  // rolling per-layer vertex caches: x/y edges on lattice layers z and z+1,
  // z edges between them
  const size_t layer = size_t(np) * np;
  std::vector<int> xe0(layer, -1), ye0(layer, -1), xe1(layer, -1), ye1(layer, -1), ze(layer, -1);

  auto edge_vertex = [&](int cx, int cy, int cz, int edge) -> int {
    const EdgeSlot& slot = kEdgeSlot[edge];
    const int ex = cx + slot.dx, ey = cy + slot.dy;
    std::vector<int>* cache = nullptr;
    if (slot.axis == 2)
      cache = &ze;
    else if (slot.dz == 0)
      cache = slot.axis == 0 ? &xe0 : &ye0;
    else
      cache = slot.axis == 0 ? &xe1 : &ye1;
    int& idx = (*cache)[size_t(ey) * np + ex];
    if (idx >= 0) return idx;

    const int c0 = kEdgeCorner[edge][0], c1 = kEdgeCorner[edge][1];
    const int ax = cx + kCorner[c0][0], ay = cy + kCorner[c0][1], az = cz + kCorner[c0][2];
    const int bx = cx + kCorner[c1][0], by = cy + kCorner[c1][1], bz = cz + kCorner[c1][2];
    const float va = val(ax, ay, az), vb = val(bx, by, bz);
    float t = 0.5f;
    if (std::abs(vb - va) > 1e-12f) t = (iso - va) / (vb - va);
    t = std::clamp(t, 0.f, 1.f);
    const Vec3<float> pa = box.lo + Vec3<float>{ax * step[0], ay * step[1], az * step[2]};
    const Vec3<float> pb = box.lo + Vec3<float>{bx * step[0], by * step[1], bz * step[2]};
    idx = int(out.vertices.size());
    out.vertices.push_back(pa + t * (pb - pa));
    return idx;
  };

  for (int cz = 0; cz < n; ++cz) {
    std::fill(xe1.begin(), xe1.end(), -1);
    std::fill(ye1.begin(), ye1.end(), -1);
    std::fill(ze.begin(), ze.end(), -1);
    for (int cy = 0; cy < n; ++cy)
      for (int cx = 0; cx < n; ++cx) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (val(cx + kCorner[c][0], cy + kCorner[c][1], cz + kCorner[c][2]) < iso)
            cube |= 1 << c;
        if (kEdgeTable[cube] == 0) continue;
        const std::int8_t* tri = kTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3) {
          const int a = edge_vertex(cx, cy, cz, tri[t]);
          const int b = edge_vertex(cx, cy, cz, tri[t + 1]);
          const int c = edge_vertex(cx, cy, cz, tri[t + 2]);
          if (a == b || b == c || a == c) continue;  // degenerate after welding
          out.triangles.push_back({a, b, c});
        }
      }
    std::swap(xe0, xe1);
    std::swap(ye0, ye1);
  }

  if (out.triangles.empty())
    std::cerr << "marching_cubes: no zero crossing found, mesh is empty\n";
  return out;
}

TriangleMesh extract_mesh(const sdf::SdfMlp<float>& mlp, const BoundingBox& box, int resolution,
                          float margin_frac) {
  ScalarField f = [&mlp](const MatX<float>& pts, VecX<float>& values) {
    const sdf::GeoEval<float> e = sdf::eval_geometry(mlp, pts, false);
    values = e.sdf;
  };
  BoundingBox grown = box;
  const Vec3<float> margin = margin_frac * box.extent();
  grown.lo -= margin;
  grown.hi += margin;
  return marching_cubes(f, grown, resolution, 0.f);
}

}  // namespace splatsdf::mesh
