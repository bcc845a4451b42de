#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cabm/autograd.hpp"
#include "cabm/bitops.hpp"
#include "cabm/quantizer.hpp"
#include "cabm/rng.hpp"
#include "cabm/supernet_spec.hpp"

namespace cabm {

// Standard deviation of a quantized layer's input feature; one of the two
// selector inputs.
struct LayerStats {
  double stddev = 0.0;
};

template <typename T>
double tensor_stddev(const Tensor<T>& t) {
  const int64_t n = t.numel();
  if (n == 0) return 0.0;
  double mean = 0.0;
  for (const T v : t.data) mean += static_cast<double>(v);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const T v : t.data) {
    const double d = static_cast<double>(v) - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(n));
}

template <typename T>
struct ConvLayer {
  Tensor<T> w, b;
  ConvSpec spec;
};

template <typename T>
struct ResBlock {
  ConvLayer<T> conv1, conv2;
  Tensor<T> alpha1, alpha2;  // trainable clamp bounds for the two conv inputs
};

// What a quantization hook hands back for one layer: the (possibly
// quantized) activation to feed the conv, and the bit width to quantize the
// conv's weights with (32 leaves them untouched).
template <typename T>
struct HookOut {
  Value<T> x;
  int weight_bit = 32;
};

// EDSR-style toy supernet: head conv, num_blocks residual blocks whose conv
// inputs are fake-quantized, pixel-shuffle upsampler tail, output conv. One
// weight set serves every bit configuration.
template <typename T>
class SuperNet {
 public:
  SuperNet(const SupernetSpec& spec, uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng = Rng::seeded(seed);
    const int C = spec_.channels;
    head_ = make_conv(3, C, rng);
    blocks_.resize(spec_.num_blocks);
    for (auto& blk : blocks_) {
      blk.conv1 = make_conv(C, C, rng);
      blk.conv2 = make_conv(C, C, rng);
      blk.alpha1 = Tensor<T>::scalar(T(1));
      blk.alpha2 = Tensor<T>::scalar(T(1));
    }
    const int stages = spec_.scale == 4 ? 2 : 1;
    for (int s = 0; s < stages; ++s) ups_.push_back(make_conv(C, 4 * C, rng));
    out_ = make_conv(C, 3, rng);
  }

  const SupernetSpec& spec() const { return spec_; }

  // Core forward pass. `hook` runs once per quantized layer, in layer order:
  //   HookOut<T> hook(int layer, Value<T> x, Value<T> alpha, double stddev)
  template <typename Hook>
  Value<T> forward_hooked(Tape<T>& tape, const Tensor<T>& lr, Hook&& hook,
                          std::vector<LayerStats>* stats_out = nullptr) {
    if (lr.shape.c != 3)
      throw ShapeError("supernet: expected 3-channel input, got " + lr.shape.str());
    auto h = conv_full(tape, tape.input(lr), head_);
    int layer = 0;
    for (auto& blk : blocks_) {
      auto skip = h;
      h = hooked_conv(tape, h, blk.conv1, blk.alpha1, layer, hook, stats_out);
      h = ag::relu(h);
      h = hooked_conv(tape, h, blk.conv2, blk.alpha2, layer, hook, stats_out);
      h = ag::add(skip, h);
    }
    for (auto& up : ups_) {
      h = conv_full(tape, h, up);
      h = ag::pixel_shuffle(h, 2);
    }
    return conv_full(tape, h, out_);
  }

  Value<T> forward_with_bits_on_tape(Tape<T>& tape, const Tensor<T>& lr, const BitConfig& config,
                                     std::vector<LayerStats>* stats_out = nullptr) {
    check_config(config);
    const int wbit = spec_.weight_bit;
    return forward_hooked(
        tape, lr,
        [&config, wbit](int layer, Value<T> x, Value<T> alpha, double) {
          const int bit = config[layer];
          if (bit == kFullPrecisionBits) return HookOut<T>{x, kFullPrecisionBits};
          return HookOut<T>{ag::quantize_act_ste(x, alpha, bit), wbit};
        },
        stats_out);
  }

  // Inference-style forward: fresh tape, no gradient plumbing exposed.
  std::pair<Tensor<T>, std::vector<LayerStats>> forward_with_bits(const Tensor<T>& lr,
                                                                  const BitConfig& config) {
    Tape<T> tape;
    std::vector<LayerStats> stats;
    Value<T> sr = forward_with_bits_on_tape(tape, lr, config, &stats);
    return {sr.val(), std::move(stats)};
  }

  void check_config(const BitConfig& config) const {
    if (static_cast<int>(config.size()) != spec_.quantized_layers())
      throw ShapeError("bit config has " + std::to_string(config.size()) +
                       " entries, network has " + std::to_string(spec_.quantized_layers()) +
                       " quantized layers");
    for (int b : config)
      if (b != kFullPrecisionBits && b < 2)
        throw Error("bit config entry " + std::to_string(b) + " out of range");
  }

  // Trainable tensors in a fixed, checkpoint-stable order.
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    out.emplace_back("head.w", &head_.w);
    out.emplace_back("head.b", &head_.b);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i);
      out.emplace_back(p + ".conv1.w", &blocks_[i].conv1.w);
      out.emplace_back(p + ".conv1.b", &blocks_[i].conv1.b);
      out.emplace_back(p + ".conv2.w", &blocks_[i].conv2.w);
      out.emplace_back(p + ".conv2.b", &blocks_[i].conv2.b);
      out.emplace_back(p + ".alpha1", &blocks_[i].alpha1);
      out.emplace_back(p + ".alpha2", &blocks_[i].alpha2);
    }
    for (size_t i = 0; i < ups_.size(); ++i) {
      const std::string p = "up" + std::to_string(i);
      out.emplace_back(p + ".w", &ups_[i].w);
      out.emplace_back(p + ".b", &ups_[i].b);
    }
    out.emplace_back("out.w", &out_.w);
    out.emplace_back("out.b", &out_.b);
    return out;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  // Per-quantized-layer clamp bounds, in layer order.
  std::vector<Tensor<T>*> alphas() {
    std::vector<Tensor<T>*> out;
    for (auto& blk : blocks_) {
      out.push_back(&blk.alpha1);
      out.push_back(&blk.alpha2);
    }
    return out;
  }

  std::vector<ResBlock<T>>& blocks() { return blocks_; }

 private:
  ConvLayer<T> make_conv(int in_ch, int out_ch, Rng& rng) {
    ConvLayer<T> layer;
    layer.spec = ConvSpec{in_ch, out_ch, 3, 1, 1};
    layer.w = Tensor<T>({out_ch, in_ch, 3, 3});
    const double stddev = std::sqrt(2.0 / (in_ch * 9.0));
    for (auto& v : layer.w.data) v = static_cast<T>(rng.normal(0.0, stddev));
    layer.b = Tensor<T>({1, 1, 1, out_ch});
    return layer;
  }

  Value<T> conv_full(Tape<T>& tape, Value<T> x, ConvLayer<T>& conv) {
    return ag::conv2d(x, tape.leaf(conv.w), tape.leaf(conv.b), conv.spec);
  }

  template <typename Hook>
  Value<T> hooked_conv(Tape<T>& tape, Value<T> x, ConvLayer<T>& conv, Tensor<T>& alpha,
                       int& layer, Hook&& hook, std::vector<LayerStats>* stats_out) {
    const double sd = tensor_stddev(x.val());
    if (stats_out) stats_out->push_back(LayerStats{sd});
    HookOut<T> h = hook(layer, x, tape.leaf(alpha), sd);
    ++layer;
    auto w = tape.leaf(conv.w);
    if (h.weight_bit != kFullPrecisionBits) w = ag::quantize_weight_ste(w, h.weight_bit);
    return ag::conv2d(h.x, w, tape.leaf(conv.b), conv.spec);
  }

  SupernetSpec spec_;
  ConvLayer<T> head_;
  std::vector<ResBlock<T>> blocks_;
  std::vector<ConvLayer<T>> ups_;
  ConvLayer<T> out_;
};

using SuperNetF = SuperNet<float>;
using SuperNetD = SuperNet<double>;

// mean absolute difference
template <typename T>
double l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape == b.shape))
    throw ShapeError("l1_loss: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return acc / static_cast<double>(a.numel());
}

}  // namespace cabm
