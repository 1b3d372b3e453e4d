#pragma once

#include <vector>

#include "splatsdf/core/rng.hpp"
#include "splatsdf/priors/maps.hpp"

namespace splatsdf::priors {

// Fraction of a ray batch drawn from the edge-pixel set: min(delta * N_edge/(H*W), 1).
float edge_ray_weight(const EdgeMap& edge, float delta);

// Per-pixel photometric loss weight 2*sigmoid(e) in [1, 2).
float photometric_weight(float edge_strength);

// Sampled pixel indices (flat y*width+x) for one training batch: exactly
// round(omega*q) from the edge set, the rest uniform over all pixels.
std::vector<int> sample_ray_pixels(const EdgeMap& edge, int q, float delta, Rng& rng);

// Mean over valid prior pixels of the component-wise L1 between the two maps.
double normal_residual(const NormalMap& rendered, const NormalMap& prior);

}  // namespace splatsdf::priors
