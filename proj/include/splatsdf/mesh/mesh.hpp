#pragma once

#include <vector>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/mesh/mesh_types.hpp"
#include "splatsdf/scene/camera.hpp"

namespace splatsdf::mesh {

// Removes zero-area triangles and unreferenced vertices.
TriangleMesh cleanup(const TriangleMesh& m, float min_area = 1e-12f);

// `count` points uniformly by triangle area; deterministic per seed.
std::vector<Vec3<float>> sample_surface(const TriangleMesh& m, int count, std::uint64_t seed);

// Keeps points lying inside at least one camera frustum (the evaluation
// protocol's crop of unobserved regions).
std::vector<Vec3<float>> frustum_filter(const std::vector<Vec3<float>>& points,
                                        const std::vector<scene::Camera<float>>& cameras,
                                        float near_clip = 0.01f);

}  // namespace splatsdf::mesh
