#pragma once

#include "splatsdf/core/image.hpp"
#include "splatsdf/priors/maps.hpp"

namespace splatsdf::scene {

// Built-in edge detector: luminance Sobel magnitude after a 3x3 Gaussian
// pre-blur, scaled by the maximum possible Sobel response so values stay in
// [0,1]. Binary set thresholded at `threshold`.
priors::EdgeMap compute_edges(const Image& rgb, float threshold = 0.3f);

}  // namespace splatsdf::scene
