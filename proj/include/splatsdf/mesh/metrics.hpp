#pragma once

#include <vector>

#include "splatsdf/core/image.hpp"
#include "splatsdf/core/types.hpp"

namespace splatsdf::mesh {

struct GeoMetrics {
  double accuracy = 0;    // mean pred -> gt nearest distance (scene units)
  double completion = 0;  // mean gt -> pred nearest distance
  double precision = 0;   // fraction of pred within tau of gt
  double recall = 0;      // fraction of gt within tau of pred
  double f_score = 0;
  double tau = 0;
};

// Uniform-hash-grid accelerated nearest-neighbor distances (exact).
std::vector<float> nn_distances(const std::vector<Vec3<float>>& queries,
                                const std::vector<Vec3<float>>& targets, float cell);

GeoMetrics geo_metrics(const std::vector<Vec3<float>>& pred,
                       const std::vector<Vec3<float>>& gt, double tau);

// 10*log10(1/MSE) over all pixels/channels of [0,1] images; identical images
// cap at 99 dB.
double psnr(const Image& a, const Image& b);

}  // namespace splatsdf::mesh
