#pragma once

#include <functional>

#include "splatsdf/core/types.hpp"
#include "splatsdf/mesh/mesh_types.hpp"
#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::mesh {

// Batched scalar field: fills `values` (resized by caller) for each row of `pts`.
using ScalarField = std::function<void(const MatX<float>& pts, VecX<float>& values)>;

// Zero-level-set triangulation on an n^3 cell lattice over `box` using the
// standard 256-case tables; shared vertices by edge identity, linear
// interpolation along edges. Empty mesh (with a warning) if the field never
// changes sign.
TriangleMesh marching_cubes(const ScalarField& field, const BoundingBox& box, int resolution,
                            float iso = 0.f);

// Convenience wrapper evaluating the SDF network over its scene box.
TriangleMesh extract_mesh(const sdf::SdfMlp<float>& mlp, const BoundingBox& box, int resolution,
                          float margin_frac = 0.04f);

}  // namespace splatsdf::mesh
