#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cabm/autograd.hpp"
#include "cabm/tensor.hpp"

namespace cabm {

// Bit width meaning "leave this layer in full precision".
inline constexpr int kFullPrecisionBits = 32;

// Per-layer activation quantization state: trainable clamp bound alpha and
// the currently selected bit width. alpha > 0; bit 32 bypasses quantization.
struct QuantParams {
  double alpha = 1.0;
  int bit = 8;

  void validate() const {
    if (alpha <= 0.0) throw Error("QuantParams: alpha must be positive");
    if (bit != kFullPrecisionBits && bit < 2)
      throw Error("QuantParams: bit must be >= 2 or the 32 sentinel");
  }
};

// Fixed-bit per-tensor weight quantization; alpha is max|w| at call time.
struct WeightQuantSpec {
  int bit = 8;
};

// s(n) = alpha / (2^(n-1) - 1)
inline double step_size(double alpha, int n) {
  if (alpha <= 0.0) throw Error("step_size: alpha must be positive");
  if (n < 2) throw Error("step_size: bit width must be >= 2, got " + std::to_string(n));
  const double levels = std::ldexp(1.0, n - 1) - 1.0;
  return alpha / levels;
}

namespace qdetail {

// round half away from zero, matching the sign symmetry of the clamp
inline double round_half_away(double x) { return std::round(x); }

template <typename T>
T fake_quantize_one(double x, double alpha, double step, double levels) {
  const double clamped = std::clamp(x, -alpha, alpha);
  double k = round_half_away(clamped / step);
  k = std::clamp(k, -levels, levels);
  return static_cast<T>(k * step);
}

}  // namespace qdetail

// Eq.-1 style symmetric fake quantization of activations. bit 32 passes the
// input through untouched.
template <typename T>
Tensor<T> quantize_activation(const Tensor<T>& x, const QuantParams& q) {
  q.validate();
  if (q.bit == kFullPrecisionBits) return x;
  const double s = step_size(q.alpha, q.bit);
  const double levels = std::ldexp(1.0, q.bit - 1) - 1.0;
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = qdetail::fake_quantize_one<T>(static_cast<double>(x.data[i]), q.alpha, s, levels);
  return out;
}

// Symmetric per-tensor weight quantization with alpha = max|w|. An all-zero
// tensor maps to itself.
template <typename T>
Tensor<T> quantize_weight(const Tensor<T>& w, const WeightQuantSpec& spec) {
  if (spec.bit == kFullPrecisionBits) return w;
  if (spec.bit < 2) throw Error("quantize_weight: bit must be >= 2");
  double alpha = 0.0;
  for (const T v : w.data) alpha = std::max(alpha, std::abs(static_cast<double>(v)));
  if (alpha == 0.0) return w;
  const double s = step_size(alpha, spec.bit);
  const double levels = std::ldexp(1.0, spec.bit - 1) - 1.0;
  Tensor<T> out(w.shape);
  for (size_t i = 0; i < w.data.size(); ++i)
    out.data[i] = qdetail::fake_quantize_one<T>(static_cast<double>(w.data[i]), alpha, s, levels);
  return out;
}

// Straight-through gradients for quantize_activation: upstream passes where
// |x| < alpha, and alpha collects +-upstream on the clamped elements.
template <typename T>
std::pair<Tensor<T>, T> ste_backward(const Tensor<T>& upstream, const Tensor<T>& x,
                                     const QuantParams& q) {
  q.validate();
  if (!(upstream.shape == x.shape)) throw ShapeError("ste_backward: shape mismatch");
  Tensor<T> grad_x(x.shape);
  double grad_alpha = 0.0;
  if (q.bit == kFullPrecisionBits) {
    grad_x = upstream;
    return {grad_x, T(0)};
  }
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double xi = static_cast<double>(x.data[i]);
    if (std::abs(xi) < q.alpha) {
      grad_x.data[i] = upstream.data[i];
    } else {
      grad_alpha += (xi >= 0.0 ? 1.0 : -1.0) * static_cast<double>(upstream.data[i]);
    }
  }
  return {grad_x, static_cast<T>(grad_alpha)};
}

namespace ag {

// Tape op for activation quantization. alpha is a trainable scalar leaf.
// bit 32 returns x unchanged (no node recorded).
template <typename T>
Value<T> quantize_act_ste(Value<T> x, Value<T> alpha, int bit) {
  if (bit == kFullPrecisionBits) return x;
  detail::check_same_tape(x, alpha);
  const double a = static_cast<double>(alpha.val().item());
  QuantParams q{a, bit};
  q.validate();
  const double s = step_size(a, bit);
  const double levels = std::ldexp(1.0, bit - 1) - 1.0;
  const Tensor<T>& in = x.val();
  Tensor<T> out(in.shape);
  for (size_t i = 0; i < in.data.size(); ++i)
    out.data[i] = qdetail::fake_quantize_one<T>(static_cast<double>(in.data[i]), a, s, levels);
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx, ai = alpha.idx;
  return t.emplace_backward(oi, [oi, xi, ai, a](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& in = tp.value(xi);
    Tensor<T>& gx = tp.grad_mut(xi);
    Tensor<T>& ga = tp.grad_mut(ai);
    double acc = 0.0;
    for (size_t i = 0; i < g.data.size(); ++i) {
      const double xi_ = static_cast<double>(in.data[i]);
      if (std::abs(xi_) < a)
        gx.data[i] += g.data[i];
      else
        acc += (xi_ >= 0.0 ? 1.0 : -1.0) * static_cast<double>(g.data[i]);
    }
    ga.data[0] += static_cast<T>(acc);
  });
}

// Tape op for weight quantization. alpha = max|w| is recomputed every call;
// since every weight lies inside the clamp, the gradient passes through.
template <typename T>
Value<T> quantize_weight_ste(Value<T> w, int bit) {
  if (bit == kFullPrecisionBits) return w;
  Tensor<T> out = quantize_weight(w.val(), WeightQuantSpec{bit});
  Tape<T>& t = *w.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, wi = w.idx;
  return t.emplace_backward(oi, [oi, wi](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    Tensor<T>& gw = tp.grad_mut(wi);
    for (size_t i = 0; i < g.data.size(); ++i) gw.data[i] += g.data[i];
  });
}

}  // namespace ag

// 99.9th percentile of |values|; used to initialize clamp bounds from a
// calibration batch.
template <typename T>
double abs_percentile(const std::vector<const Tensor<T>*>& tensors, double pct) {
  std::vector<double> mags;
  for (const auto* t : tensors)
    for (const T v : t->data) mags.push_back(std::abs(static_cast<double>(v)));
  if (mags.empty()) throw Error("abs_percentile: no data");
  std::sort(mags.begin(), mags.end());
  const double pos = pct / 100.0 * static_cast<double>(mags.size() - 1);
  const size_t idx = static_cast<size_t>(std::llround(pos));
  return mags[std::min(idx, mags.size() - 1)];
}

}  // namespace cabm
