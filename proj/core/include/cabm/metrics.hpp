#pragma once

#include "cabm/tensor.hpp"

namespace cabm {

// 10*log10(peak^2 / MSE), capped at 99.0 dB (MSE == 0 reports the cap).
double psnr(const TensorF& a, const TensorF& b, double peak = 1.0);

// Windowed SSIM on luminance: 11x11 Gaussian (sigma 1.5), C1 = (0.01 peak)^2,
// C2 = (0.03 peak)^2, mean over valid windows. Images smaller than the
// window fall back to one whole-image window.
double ssim(const TensorF& a, const TensorF& b, double peak = 1.0);

}  // namespace cabm
