#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cabm/errors.hpp"

namespace cabm {

// Dense NCHW shape. All tensors in this library are 4-D; vectors and scalars
// use degenerate dimensions (1,1,1,k) and (1,1,1,1).
struct Shape4 {
  int64_t n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense row-major 4-D tensor. `grad` is empty unless the tensor is used as a
// trainable parameter; operations never touch it, only Tape::apply_leaf_grads
// and the optimizers do.
template <typename T>
struct Tensor {
  Shape4 shape{0, 0, 0, 0};
  std::vector<T> data;
  std::vector<T> grad;  // empty, or same length as data

  Tensor() = default;
  explicit Tensor(Shape4 s) : shape(s), data(static_cast<size_t>(s.numel()), T(0)) {}
  Tensor(Shape4 s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != shape.numel())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
  }

  static Tensor scalar(T v) { return Tensor({1, 1, 1, 1}, {v}); }
  static Tensor vec(std::vector<T> values) {
    Shape4 s{1, 1, 1, static_cast<int64_t>(values.size())};
    return Tensor(s, std::move(values));
  }

  int64_t numel() const { return shape.numel(); }

  T& at(int64_t n_, int64_t c_, int64_t h_, int64_t w_) {
    return data[static_cast<size_t>(((n_ * shape.c + c_) * shape.h + h_) * shape.w + w_)];
  }
  const T& at(int64_t n_, int64_t c_, int64_t h_, int64_t w_) const {
    return data[static_cast<size_t>(((n_ * shape.c + c_) * shape.h + h_) * shape.w + w_)];
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape.str());
    return data[0];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) grad.assign(grad.size(), T(0));
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Geometry of one convolution. Output spatial size follows the usual
// floor((H + 2*padding - kernel)/stride) + 1 law.
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;   // odd
  int stride = 1;
  int padding = 0;

  int64_t out_dim(int64_t in_dim) const {
    return (in_dim + 2 * padding - kernel) / stride + 1;
  }

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0)
      throw ShapeError("conv spec: channel counts must be positive");
    if (kernel <= 0 || kernel % 2 == 0)
      throw ShapeError("conv spec: kernel must be a positive odd integer, got " +
                       std::to_string(kernel));
    if (stride <= 0) throw ShapeError("conv spec: stride must be positive");
    if (padding < 0) throw ShapeError("conv spec: padding must be non-negative");
  }
};

}  // namespace cabm
