#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "cabm/tensor.hpp"

namespace cabm {

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
template <typename T>
struct Value {
  Tape<T>* tape = nullptr;
  int32_t idx = -1;

  const Tensor<T>& val() const { return tape->value(idx); }
  const Tensor<T>& grad() const { return tape->grad(idx); }
};

// Define-by-run reverse-mode tape. A fresh tape is built for every forward
// pass; backward() runs the recorded closures in reverse creation order,
// which is a valid topological order by construction.
//
// Leaves bound to parameter tensors collect gradients on the tape; callers
// either apply_leaf_grads() into the parameters (single-writer training) or
// read leaf_grad(i) and reduce across worker tapes in a fixed order.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant input; gradients flow through but are not bound anywhere.
  Value<T> input(Tensor<T> v) { return emplace(std::move(v), nullptr, nullptr); }

  // Trainable leaf. Copies the current value; remembers the parameter so the
  // gradient can be written back after backward().
  Value<T> leaf(Tensor<T>& param) {
    Value<T> v = emplace(param, nullptr, &param);
    leaves_.push_back(v.idx);
    return v;
  }

  void backward(Value<T> loss) {
    if (nodes_.empty() || loss.idx < 0 || loss.idx >= static_cast<int32_t>(nodes_.size()))
      throw Error("backward() without a recorded forward pass");
    if (backward_done_) throw Error("backward() already run on this tape");
    if (nodes_[loss.idx].value.numel() != 1)
      throw ShapeError("backward() seed must be scalar, got " +
                       nodes_[loss.idx].value.shape.str());
    for (auto& n : nodes_) n.grad = Tensor<T>(n.value.shape);
    nodes_[loss.idx].grad.data[0] = T(1);
    for (int32_t i = static_cast<int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      if (nodes_[i].back) nodes_[i].back(*this);
    }
    backward_done_ = true;
  }

  // Accumulates leaf gradients into the bound parameters' grad buffers.
  void apply_leaf_grads() {
    require_backward();
    for (int32_t idx : leaves_) {
      Tensor<T>* p = nodes_[idx].bound;
      p->ensure_grad();
      const auto& g = nodes_[idx].grad.data;
      for (size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
  }

  size_t num_leaves() const { return leaves_.size(); }
  const Tensor<T>& leaf_grad(size_t i) const {
    require_backward();
    return nodes_[leaves_[i]].grad;
  }
  Tensor<T>* leaf_param(size_t i) const { return nodes_[leaves_[i]].bound; }

  const Tensor<T>& value(int32_t idx) const { return nodes_[idx].value; }
  const Tensor<T>& grad(int32_t idx) const {
    require_backward();
    return nodes_[idx].grad;
  }

  // -- used by op builders --
  Value<T> emplace(Tensor<T> v, std::function<void(Tape&)> back, Tensor<T>* bound = nullptr) {
    nodes_.push_back(Node{std::move(v), Tensor<T>(), std::move(back), bound});
    return Value<T>{this, static_cast<int32_t>(nodes_.size()) - 1};
  }
  Value<T> emplace_backward(int32_t idx, std::function<void(Tape&)> back) {
    nodes_[idx].back = std::move(back);
    return Value<T>{this, idx};
  }
  Tensor<T>& grad_mut(int32_t idx) { return nodes_[idx].grad; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Tape&)> back;
    Tensor<T>* bound = nullptr;
  };

  void require_backward() const {
    if (!backward_done_) throw Error("gradients requested before backward()");
  }

  std::vector<Node> nodes_;
  std::vector<int32_t> leaves_;
  bool backward_done_ = false;
};

namespace ag {

namespace detail {

inline int64_t floor_div(int64_t a, int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}
inline int64_t ceil_div(int64_t a, int64_t b) {
  return a > 0 ? (a + b - 1) / b : -(-a / b);
}

template <typename T>
void check_same_tape(const Value<T>& a, const Value<T>& b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

}  // namespace detail

// Cross-correlation with bias, 64-bit accumulation. weight is (Co,Ci,k,k),
// bias is (1,1,1,Co).
template <typename T>
Value<T> conv2d(Value<T> x, Value<T> w, Value<T> b, const ConvSpec& spec) {
  detail::check_same_tape(x, w);
  detail::check_same_tape(x, b);
  spec.validate();
  const Tensor<T>& in = x.val();
  const Tensor<T>& wt = w.val();
  const Tensor<T>& bt = b.val();
  if (in.shape.c != spec.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(in.shape.c) +
                     " channels, spec expects " + std::to_string(spec.in_channels));
  Shape4 want_w{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
  if (wt.shape != want_w)
    throw ShapeError("conv2d: weight shape " + wt.shape.str() + " != expected " + want_w.str());
  if (bt.numel() != spec.out_channels)
    throw ShapeError("conv2d: bias length " + std::to_string(bt.numel()) +
                     " != out_channels " + std::to_string(spec.out_channels));
  const int64_t N = in.shape.n, Ci = in.shape.c, H = in.shape.h, W = in.shape.w;
  const int64_t Co = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding;
  const int64_t Ho = spec.out_dim(H), Wo = spec.out_dim(W);
  if (Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d: non-positive output dims for input " + in.shape.str());

  Tensor<T> out({N, Co, Ho, Wo});
  std::vector<double> plane(static_cast<size_t>(Ho * Wo));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Co; ++co) {
      std::fill(plane.begin(), plane.end(), static_cast<double>(bt.data[co]));
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const T* in_ch = &in.data[static_cast<size_t>(((n * Ci + ci) * H) * W)];
        for (int64_t kh = 0; kh < K; ++kh) {
          for (int64_t kw = 0; kw < K; ++kw) {
            const double wv = static_cast<double>(wt.at(co, ci, kh, kw));
            if (wv == 0.0) continue;
            const int64_t ho_lo = std::max<int64_t>(0, detail::ceil_div(P - kh, S));
            const int64_t ho_hi = std::min<int64_t>(Ho - 1, detail::floor_div(H - 1 + P - kh, S));
            const int64_t wo_lo = std::max<int64_t>(0, detail::ceil_div(P - kw, S));
            const int64_t wo_hi = std::min<int64_t>(Wo - 1, detail::floor_div(W - 1 + P - kw, S));
            for (int64_t ho = ho_lo; ho <= ho_hi; ++ho) {
              const int64_t hi = ho * S - P + kh;
              const T* in_row = in_ch + hi * W - P + kw;
              double* out_row = plane.data() + ho * Wo;
              for (int64_t wo = wo_lo; wo <= wo_hi; ++wo)
                out_row[wo] += wv * static_cast<double>(in_row[wo * S]);
            }
          }
        }
      }
      T* dst = &out.data[static_cast<size_t>(((n * Co + co) * Ho) * Wo)];
      for (int64_t i = 0; i < Ho * Wo; ++i) dst[i] = static_cast<T>(plane[i]);
    }
  }

  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx, wi = w.idx, bi = b.idx;
  auto backward = [oi, xi, wi, bi, N, Ci, H, W, Co, K, S, P, Ho, Wo](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& in = tp.value(xi);
    const Tensor<T>& wt = tp.value(wi);
    Tensor<T>& gx = tp.grad_mut(xi);
    Tensor<T>& gw = tp.grad_mut(wi);
    Tensor<T>& gb = tp.grad_mut(bi);

    // bias
    for (int64_t co = 0; co < Co; ++co) {
      double acc = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const T* gp = &g.data[static_cast<size_t>(((n * Co + co) * Ho) * Wo)];
        for (int64_t i = 0; i < Ho * Wo; ++i) acc += static_cast<double>(gp[i]);
      }
      gb.data[co] += static_cast<T>(acc);
    }
    // weights
    for (int64_t co = 0; co < Co; ++co) {
      for (int64_t ci = 0; ci < Ci; ++ci) {
        for (int64_t kh = 0; kh < K; ++kh) {
          for (int64_t kw = 0; kw < K; ++kw) {
            double acc = 0.0;
            const int64_t ho_lo = std::max<int64_t>(0, detail::ceil_div(P - kh, S));
            const int64_t ho_hi = std::min<int64_t>(Ho - 1, detail::floor_div(H - 1 + P - kh, S));
            const int64_t wo_lo = std::max<int64_t>(0, detail::ceil_div(P - kw, S));
            const int64_t wo_hi = std::min<int64_t>(Wo - 1, detail::floor_div(W - 1 + P - kw, S));
            for (int64_t n = 0; n < N; ++n) {
              const T* in_ch = &in.data[static_cast<size_t>(((n * Ci + ci) * H) * W)];
              const T* g_ch = &g.data[static_cast<size_t>(((n * Co + co) * Ho) * Wo)];
              for (int64_t ho = ho_lo; ho <= ho_hi; ++ho) {
                const int64_t hi = ho * S - P + kh;
                const T* in_row = in_ch + hi * W - P + kw;
                const T* g_row = g_ch + ho * Wo;
                for (int64_t wo = wo_lo; wo <= wo_hi; ++wo)
                  acc += static_cast<double>(g_row[wo]) * static_cast<double>(in_row[wo * S]);
              }
            }
            gw.at(co, ci, kh, kw) += static_cast<T>(acc);
          }
        }
      }
    }
    // input (scatter into a per-channel double plane, then add once)
    std::vector<double> plane(static_cast<size_t>(H * W));
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t ci = 0; ci < Ci; ++ci) {
        std::fill(plane.begin(), plane.end(), 0.0);
        for (int64_t co = 0; co < Co; ++co) {
          const T* g_ch = &g.data[static_cast<size_t>(((n * Co + co) * Ho) * Wo)];
          for (int64_t kh = 0; kh < K; ++kh) {
            for (int64_t kw = 0; kw < K; ++kw) {
              const double wv = static_cast<double>(wt.at(co, ci, kh, kw));
              if (wv == 0.0) continue;
              const int64_t ho_lo = std::max<int64_t>(0, detail::ceil_div(P - kh, S));
              const int64_t ho_hi = std::min<int64_t>(Ho - 1, detail::floor_div(H - 1 + P - kh, S));
              const int64_t wo_lo = std::max<int64_t>(0, detail::ceil_div(P - kw, S));
              const int64_t wo_hi = std::min<int64_t>(Wo - 1, detail::floor_div(W - 1 + P - kw, S));
              for (int64_t ho = ho_lo; ho <= ho_hi; ++ho) {
                const int64_t hi = ho * S - P + kh;
                double* p_row = plane.data() + hi * W - P + kw;
                const T* g_row = g_ch + ho * Wo;
                for (int64_t wo = wo_lo; wo <= wo_hi; ++wo)
                  p_row[wo * S] += wv * static_cast<double>(g_row[wo]);
              }
            }
          }
        }
        T* gx_ch = &gx.data[static_cast<size_t>(((n * Ci + ci) * H) * W)];
        for (int64_t i = 0; i < H * W; ++i) gx_ch[i] += static_cast<T>(plane[i]);
      }
    }
  };
  // patch the node's backward in place
  return t.emplace_backward(oi, std::move(backward));
}

template <typename T>
Value<T> relu(Value<T> x) {
  const Tensor<T>& in = x.val();
  Tensor<T> out(in.shape);
  for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx;
  return t.emplace_backward(oi, [oi, xi](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& in = tp.value(xi);
    Tensor<T>& gx = tp.grad_mut(xi);
    for (size_t i = 0; i < g.data.size(); ++i)
      if (in.data[i] > T(0)) gx.data[i] += g.data[i];
  });
}

// out(n, c, h*s+i, w*s+j) = in(n, c*s^2 + i*s + j, h, w)
template <typename T>
Value<T> pixel_shuffle(Value<T> x, int scale) {
  if (scale <= 0) throw ShapeError("pixel_shuffle: scale must be positive");
  const Tensor<T>& in = x.val();
  const int64_t s = scale, s2 = static_cast<int64_t>(scale) * scale;
  if (in.shape.c % s2 != 0)
    throw ShapeError("pixel_shuffle: channels " + std::to_string(in.shape.c) +
                     " not divisible by scale^2 = " + std::to_string(s2));
  const int64_t N = in.shape.n, C = in.shape.c / s2, H = in.shape.h, W = in.shape.w;
  Tensor<T> out({N, C, H * s, W * s});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < s; ++i)
        for (int64_t j = 0; j < s; ++j)
          for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
              out.at(n, c, h * s + i, w * s + j) = in.at(n, c * s2 + i * s + j, h, w);
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx;
  return t.emplace_backward(oi, [oi, xi, s, s2, N, C, H, W](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    Tensor<T>& gx = tp.grad_mut(xi);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < s; ++i)
          for (int64_t j = 0; j < s; ++j)
            for (int64_t h = 0; h < H; ++h)
              for (int64_t w = 0; w < W; ++w)
                gx.at(n, c * s2 + i * s + j, h, w) += g.at(n, c, h * s + i, w * s + j);
  });
}

template <typename T>
Value<T> add(Value<T> a, Value<T> b) {
  detail::check_same_tape(a, b);
  const Tensor<T>& av = a.val();
  const Tensor<T>& bv = b.val();
  if (!(av.shape == bv.shape))
    throw ShapeError("add: shape mismatch " + av.shape.str() + " vs " + bv.shape.str());
  Tensor<T> out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  Tape<T>& t = *a.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, ai = a.idx, bi = b.idx;
  return t.emplace_backward(oi, [oi, ai, bi](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    Tensor<T>& ga = tp.grad_mut(ai);
    Tensor<T>& gb = tp.grad_mut(bi);
    for (size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
}

// Same element order, different logical shape.
template <typename T>
Value<T> reshape(Value<T> x, Shape4 shape) {
  const Tensor<T>& in = x.val();
  if (shape.numel() != in.numel())
    throw ShapeError("reshape: " + in.shape.str() + " -> " + shape.str() +
                     " changes the element count");
  Tensor<T> out(shape, in.data);
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx;
  return t.emplace_backward(oi, [oi, xi](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    Tensor<T>& gx = tp.grad_mut(xi);
    for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
  });
}

template <typename T>
Value<T> scale(Value<T> x, double c) {
  const Tensor<T>& in = x.val();
  Tensor<T> out(in.shape);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<T>(c * static_cast<double>(in.data[i]));
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx;
  return t.emplace_backward(oi, [oi, xi, c](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    Tensor<T>& gx = tp.grad_mut(xi);
    for (size_t i = 0; i < g.data.size(); ++i)
      gx.data[i] += static_cast<T>(c * static_cast<double>(g.data[i]));
  });
}

// x:(1,1,1,In) @ W:(1,1,Out,In) + b:(1,1,1,Out)
template <typename T>
Value<T> linear(Value<T> x, Value<T> w, Value<T> b) {
  detail::check_same_tape(x, w);
  detail::check_same_tape(x, b);
  const Tensor<T>& xv = x.val();
  const Tensor<T>& wv = w.val();
  const Tensor<T>& bv = b.val();
  const int64_t in_dim = xv.shape.w, out_dim = wv.shape.h;
  if (xv.shape.n != 1 || xv.shape.c != 1 || xv.shape.h != 1)
    throw ShapeError("linear: input must be (1,1,1,in), got " + xv.shape.str());
  if (wv.shape.w != in_dim || bv.numel() != out_dim)
    throw ShapeError("linear: weight " + wv.shape.str() + " / bias incompatible with input " +
                     xv.shape.str());
  Tensor<T> out({1, 1, 1, out_dim});
  for (int64_t o = 0; o < out_dim; ++o) {
    double acc = static_cast<double>(bv.data[o]);
    for (int64_t i = 0; i < in_dim; ++i)
      acc += static_cast<double>(wv.data[o * in_dim + i]) * static_cast<double>(xv.data[i]);
    out.data[o] = static_cast<T>(acc);
  }
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx, wi = w.idx, bi = b.idx;
  return t.emplace_backward(oi, [oi, xi, wi, bi, in_dim, out_dim](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& xv = tp.value(xi);
    const Tensor<T>& wv = tp.value(wi);
    Tensor<T>& gx = tp.grad_mut(xi);
    Tensor<T>& gw = tp.grad_mut(wi);
    Tensor<T>& gb = tp.grad_mut(bi);
    for (int64_t o = 0; o < out_dim; ++o) {
      const double go = static_cast<double>(g.data[o]);
      gb.data[o] += static_cast<T>(go);
      for (int64_t i = 0; i < in_dim; ++i) {
        gw.data[o * in_dim + i] += static_cast<T>(go * static_cast<double>(xv.data[i]));
        gx.data[i] += static_cast<T>(go * static_cast<double>(wv.data[o * in_dim + i]));
      }
    }
  });
}

// softmax over the last dimension of a (1,1,1,K) vector
template <typename T>
Value<T> softmax(Value<T> x) {
  const Tensor<T>& in = x.val();
  if (in.shape.n != 1 || in.shape.c != 1 || in.shape.h != 1)
    throw ShapeError("softmax: expected (1,1,1,K), got " + in.shape.str());
  const int64_t K = in.shape.w;
  Tensor<T> out(in.shape);
  double m = -1e300;
  for (int64_t i = 0; i < K; ++i) m = std::max(m, static_cast<double>(in.data[i]));
  double z = 0.0;
  std::vector<double> e(static_cast<size_t>(K));
  for (int64_t i = 0; i < K; ++i) {
    e[i] = std::exp(static_cast<double>(in.data[i]) - m);
    z += e[i];
  }
  for (int64_t i = 0; i < K; ++i) out.data[i] = static_cast<T>(e[i] / z);
  Tape<T>& t = *x.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, xi = x.idx;
  return t.emplace_backward(oi, [oi, xi, K](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& p = tp.value(oi);
    Tensor<T>& gx = tp.grad_mut(xi);
    double dot = 0.0;
    for (int64_t i = 0; i < K; ++i)
      dot += static_cast<double>(g.data[i]) * static_cast<double>(p.data[i]);
    for (int64_t i = 0; i < K; ++i)
      gx.data[i] += static_cast<T>(static_cast<double>(p.data[i]) *
                                   (static_cast<double>(g.data[i]) - dot));
  });
}

// out = sum_k p[k] * branches[k], p a (1,1,1,K) probability vector
template <typename T>
Value<T> mix(const std::vector<Value<T>>& branches, Value<T> p) {
  if (branches.empty()) throw ShapeError("mix: no branches");
  const int64_t K = p.val().shape.w;
  if (static_cast<int64_t>(branches.size()) != K)
    throw ShapeError("mix: " + std::to_string(branches.size()) + " branches but " +
                     std::to_string(K) + " weights");
  const Shape4 shape = branches[0].val().shape;
  for (const auto& b : branches) {
    detail::check_same_tape(b, p);
    if (!(b.val().shape == shape)) throw ShapeError("mix: branch shape mismatch");
  }
  const int64_t n = shape.numel();
  std::vector<double> acc(static_cast<size_t>(n), 0.0);
  for (int64_t k = 0; k < K; ++k) {
    const double pk = static_cast<double>(p.val().data[k]);
    const auto& bd = branches[k].val().data;
    for (int64_t i = 0; i < n; ++i) acc[i] += pk * static_cast<double>(bd[i]);
  }
  Tensor<T> out(shape);
  for (int64_t i = 0; i < n; ++i) out.data[i] = static_cast<T>(acc[i]);
  Tape<T>& t = *p.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, pi = p.idx;
  std::vector<int32_t> bids(branches.size());
  for (size_t k = 0; k < branches.size(); ++k) bids[k] = branches[k].idx;
  return t.emplace_backward(oi, [oi, pi, bids, n](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad_mut(oi);
    const Tensor<T>& p = tp.value(pi);
    Tensor<T>& gp = tp.grad_mut(pi);
    for (size_t k = 0; k < bids.size(); ++k) {
      const double pk = static_cast<double>(p.data[k]);
      const Tensor<T>& bv = tp.value(bids[k]);
      Tensor<T>& gb = tp.grad_mut(bids[k]);
      double dot = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        gb.data[i] += static_cast<T>(pk * static_cast<double>(g.data[i]));
        dot += static_cast<double>(g.data[i]) * static_cast<double>(bv.data[i]);
      }
      gp.data[k] += static_cast<T>(dot);
    }
  });
}

// mean absolute difference against a constant target; returns a scalar node
template <typename T>
Value<T> l1_loss(Value<T> pred, const Tensor<T>& target) {
  const Tensor<T>& pv = pred.val();
  if (!(pv.shape == target.shape))
    throw ShapeError("l1_loss: shape mismatch " + pv.shape.str() + " vs " + target.shape.str());
  const int64_t n = pv.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i)
    acc += std::abs(static_cast<double>(pv.data[i]) - static_cast<double>(target.data[i]));
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  Tape<T>& t = *pred.tape;
  Value<T> out_v = t.emplace(std::move(out), nullptr);
  const int32_t oi = out_v.idx, pi = pred.idx;
  Tensor<T> tgt = target;
  return t.emplace_backward(oi, [oi, pi, tgt = std::move(tgt), n](Tape<T>& tp) {
    const double gs = static_cast<double>(tp.grad_mut(oi).data[0]) / static_cast<double>(n);
    const Tensor<T>& pv = tp.value(pi);
    Tensor<T>& gp = tp.grad_mut(pi);
    for (int64_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(pv.data[i]) - static_cast<double>(tgt.data[i]);
      if (d > 0.0)
        gp.data[i] += static_cast<T>(gs);
      else if (d < 0.0)
        gp.data[i] -= static_cast<T>(gs);
    }
  });
}

// scalar = sum_i p[i] * c[i] for a constant coefficient vector
template <typename T>
Value<T> dot_const(Value<T> p, const std::vector<double>& c) {
  const Tensor<T>& pv = p.val();
  if (pv.numel() != static_cast<int64_t>(c.size()))
    throw ShapeError("dot_const: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < c.size(); ++i) acc += static_cast<double>(pv.data[i]) * c[i];
  Tape<T>& t = *p.tape;
  Value<T> out_v = t.emplace(Tensor<T>::scalar(static_cast<T>(acc)), nullptr);
  const int32_t oi = out_v.idx, pi = p.idx;
  return t.emplace_backward(oi, [oi, pi, c](Tape<T>& tp) {
    const double gs = static_cast<double>(tp.grad_mut(oi).data[0]);
    Tensor<T>& gp = tp.grad_mut(pi);
    for (size_t i = 0; i < c.size(); ++i) gp.data[i] += static_cast<T>(gs * c[i]);
  });
}

}  // namespace ag
}  // namespace cabm
