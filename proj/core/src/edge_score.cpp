#include "cabm/edge_score.hpp"

#include <cmath>

namespace cabm {

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

TensorF to_luminance(const TensorF& rgb) {
  if (rgb.shape.c == 1) return rgb;
  if (rgb.shape.c != 3)
    throw ShapeError("to_luminance: expected 1 or 3 channels, got " +
                     std::to_string(rgb.shape.c));
  const int64_t N = rgb.shape.n, H = rgb.shape.h, W = rgb.shape.w;
  TensorF out({N, 1, H, W});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        const double y = 0.299 * rgb.at(n, 0, h, w) + 0.587 * rgb.at(n, 1, h, w) +
                         0.114 * rgb.at(n, 2, h, w);
        out.at(n, 0, h, w) = static_cast<float>(y);
      }
  return out;
}

TensorF laplacian_response(const TensorF& gray) {
  if (gray.shape.c != 1)
    throw ShapeError("laplacian_response: expected single channel, got " +
                     std::to_string(gray.shape.c));
  const int64_t N = gray.shape.n, H = gray.shape.h, W = gray.shape.w;
  TensorF out(gray.shape);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        const double up = gray.at(n, 0, reflect_index(h - 1, H), w);
        const double down = gray.at(n, 0, reflect_index(h + 1, H), w);
        const double left = gray.at(n, 0, h, reflect_index(w - 1, W));
        const double right = gray.at(n, 0, h, reflect_index(w + 1, W));
        const double center = gray.at(n, 0, h, w);
        out.at(n, 0, h, w) = static_cast<float>(up + down + left + right - 4.0 * center);
      }
  return out;
}

EdgeScore edge_score(const TensorF& patch, double F) {
  if (F <= 0.0) throw Error("edge_score: precision F must be positive");
  const TensorF resp = laplacian_response(to_luminance(patch));
  double acc = 0.0;
  for (const float v : resp.data) acc += std::abs(static_cast<double>(v));
  const double mean = acc / static_cast<double>(resp.numel());
  const int64_t k = std::llround(mean / F);
  return EdgeScore{static_cast<double>(k) * F, F};
}

}  // namespace cabm
