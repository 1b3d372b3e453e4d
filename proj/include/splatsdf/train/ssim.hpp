#pragma once

#include "splatsdf/core/image.hpp"

namespace splatsdf::train {

// Windowed SSIM over [0,1] images: 11x11 Gaussian window (sigma 1.5),
// k1=0.01, k2=0.03, averaged over channels. Returns a value in [-1, 1].
double ssim(const Image& a, const Image& b);

// SSIM plus d(mean SSIM)/d(a) for the loss 1 - SSIM.
double ssim_with_grad(const Image& a, const Image& b, Image& grad_a);

}  // namespace splatsdf::train
