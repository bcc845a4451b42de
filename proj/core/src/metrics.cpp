#include "cabm/metrics.hpp"

#include <cmath>
#include <vector>

#include "cabm/edge_score.hpp"

namespace cabm {

double psnr(const TensorF& a, const TensorF& b, double peak) {
  if (!(a.shape == b.shape))
    throw ShapeError("psnr: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
  if (peak <= 0.0) throw Error("psnr: peak must be positive");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr int kWindow = 11;

const std::vector<double>& gaussian_kernel() {
  static const std::vector<double> kernel = [] {
    std::vector<double> k(kWindow * kWindow);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int y = 0; y < kWindow; ++y)
      for (int x = 0; x < kWindow; ++x) {
        const double dy = y - (kWindow - 1) / 2.0;
        const double dx = x - (kWindow - 1) / 2.0;
        k[y * kWindow + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        sum += k[y * kWindow + x];
      }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

double ssim_term(double mu1, double mu2, double s11, double s22, double s12, double c1,
                 double c2) {
  return ((2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)) /
         ((mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2));
}

}  // namespace

double ssim(const TensorF& a_in, const TensorF& b_in, double peak) {
  if (!(a_in.shape == b_in.shape))
    throw ShapeError("ssim: shape mismatch " + a_in.shape.str() + " vs " + b_in.shape.str());
  const TensorF a = to_luminance(a_in);
  const TensorF b = to_luminance(b_in);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int64_t N = a.shape.n, H = a.shape.h, W = a.shape.w;

  if (H < kWindow || W < kWindow) {
    // whole-image statistics
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      double mu1 = 0, mu2 = 0;
      const int64_t cnt = H * W;
      for (int64_t i = 0; i < cnt; ++i) {
        mu1 += a.data[n * cnt + i];
        mu2 += b.data[n * cnt + i];
      }
      mu1 /= cnt;
      mu2 /= cnt;
      double s11 = 0, s22 = 0, s12 = 0;
      for (int64_t i = 0; i < cnt; ++i) {
        const double d1 = a.data[n * cnt + i] - mu1;
        const double d2 = b.data[n * cnt + i] - mu2;
        s11 += d1 * d1;
        s22 += d2 * d2;
        s12 += d1 * d2;
      }
      s11 /= cnt;
      s22 /= cnt;
      s12 /= cnt;
      acc += ssim_term(mu1, mu2, s11, s22, s12, c1, c2);
    }
    return acc / static_cast<double>(N);
  }

  const std::vector<double>& kernel = gaussian_kernel();
  double acc = 0.0;
  int64_t windows = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t wy = 0; wy + kWindow <= H; ++wy) {
      for (int64_t wx = 0; wx + kWindow <= W; ++wx) {
        double mu1 = 0, mu2 = 0, s11 = 0, s22 = 0, s12 = 0;
        for (int y = 0; y < kWindow; ++y)
          for (int x = 0; x < kWindow; ++x) {
            const double k = kernel[y * kWindow + x];
            const double v1 = a.at(n, 0, wy + y, wx + x);
            const double v2 = b.at(n, 0, wy + y, wx + x);
            mu1 += k * v1;
            mu2 += k * v2;
            s11 += k * v1 * v1;
            s22 += k * v2 * v2;
            s12 += k * v1 * v2;
          }
        s11 -= mu1 * mu1;
        s22 -= mu2 * mu2;
        s12 -= mu1 * mu2;
        acc += ssim_term(mu1, mu2, s11, s22, s12, c1, c2);
        ++windows;
      }
    }
  }
  return acc / static_cast<double>(windows);
}

}  // namespace cabm
