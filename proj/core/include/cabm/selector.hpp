#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cabm/bitops.hpp"
#include "cabm/edge_score.hpp"
#include "cabm/rng.hpp"
#include "cabm/supernet.hpp"

namespace cabm {

// Per-layer bit selector: (stddev, edge) -> probabilities over the candidate
// bits. The output layer is zero-initialized so an untrained selector is
// uniform over candidates.
template <typename T>
struct SelectorMLP {
  Tensor<T> w1, b1;  // hidden x 2, hidden
  Tensor<T> w2, b2;  // K x hidden, K

  SelectorMLP() = default;
  SelectorMLP(int hidden, int num_candidates, Rng& rng) {
    w1 = Tensor<T>({1, 1, hidden, 2});
    const double stddev = std::sqrt(2.0 / 2.0);
    for (auto& v : w1.data) v = static_cast<T>(rng.normal(0.0, stddev));
    b1 = Tensor<T>({1, 1, 1, hidden});
    w2 = Tensor<T>({1, 1, num_candidates, hidden});
    b2 = Tensor<T>({1, 1, 1, num_candidates});
  }

  int hidden() const { return static_cast<int>(w1.shape.h); }
  int num_candidates() const { return static_cast<int>(w2.shape.h); }

  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters(const std::string& prefix) {
    return {{prefix + ".w1", &w1}, {prefix + ".b1", &b1}, {prefix + ".w2", &w2},
            {prefix + ".b2", &b2}};
  }
};

using SelectorMLPF = SelectorMLP<float>;

template <typename T>
std::vector<SelectorMLP<T>> make_selectors(const SupernetSpec& spec, uint64_t seed,
                                           int hidden = 16) {
  Rng rng = Rng::seeded(seed);
  std::vector<SelectorMLP<T>> out;
  for (int i = 0; i < spec.quantized_layers(); ++i)
    out.emplace_back(hidden, static_cast<int>(spec.candidate_bits.size()), rng);
  return out;
}

// Probabilities on a tape (selector weights become trainable leaves).
template <typename T>
Value<T> selector_probs_on_tape(Tape<T>& tape, SelectorMLP<T>& mlp, double stddev, double edge) {
  auto in = tape.input(Tensor<T>::vec({static_cast<T>(stddev), static_cast<T>(edge)}));
  auto h = ag::relu(ag::linear(in, tape.leaf(mlp.w1), tape.leaf(mlp.b1)));
  auto logits = ag::linear(h, tape.leaf(mlp.w2), tape.leaf(mlp.b2));
  return ag::softmax(logits);
}

// Plain forward, no gradients.
template <typename T>
std::vector<double> selector_forward(SelectorMLP<T>& mlp, double stddev, double edge) {
  Tape<T> tape;
  Value<T> p = selector_probs_on_tape(tape, mlp, stddev, edge);
  std::vector<double> out;
  for (const T v : p.val().data) out.push_back(static_cast<double>(v));
  return out;
}

// Layer-by-layer argmax selection; the chosen quantization feeds the rest of
// the forward pass. Ties resolve to the first (lowest-bit) candidate.
template <typename T>
BitConfig select_bits(SuperNet<T>& net, std::vector<SelectorMLP<T>>& selectors,
                      const Tensor<T>& lr_patch, double F = 0.01) {
  if (static_cast<int>(selectors.size()) != net.spec().quantized_layers())
    throw ShapeError("select_bits: selector count does not match quantized layer count");
  const EdgeScore e = edge_score(lr_patch.template cast<float>(), F);
  const std::vector<int>& candidates = net.spec().candidate_bits;
  const int wbit = net.spec().weight_bit;
  BitConfig config;
  Tape<T> tape;
  net.forward_hooked(tape, lr_patch,
                     [&](int layer, Value<T> x, Value<T> alpha, double stddev) {
                       std::vector<double> p =
                           selector_forward(selectors[layer], stddev, e.value);
                       size_t best = 0;
                       for (size_t i = 1; i < p.size(); ++i)
                         if (p[i] > p[best]) best = i;
                       const int bit = candidates[best];
                       config.push_back(bit);
                       return HookOut<T>{ag::quantize_act_ste(x, alpha, bit), wbit};
                     });
  return config;
}

// Softmax-gated mixture forward used during supernet training: each
// quantized layer feeds the probability-weighted sum of the K quantized
// branches onward, so selector weights receive gradients.
template <typename T>
struct MixtureForward {
  Value<T> sr;
  std::vector<Value<T>> probs;  // one (1,1,1,K) node per quantized layer
  std::vector<LayerStats> stats;
};

template <typename T>
MixtureForward<T> forward_mixture(Tape<T>& tape, SuperNet<T>& net,
                                  std::vector<SelectorMLP<T>>& selectors, const Tensor<T>& lr,
                                  double edge) {
  if (static_cast<int>(selectors.size()) != net.spec().quantized_layers())
    throw ShapeError("forward_mixture: selector count does not match quantized layer count");
  const std::vector<int>& candidates = net.spec().candidate_bits;
  const int wbit = net.spec().weight_bit;
  MixtureForward<T> out;
  out.sr = net.forward_hooked(
      tape, lr,
      [&](int layer, Value<T> x, Value<T> alpha, double stddev) {
        Value<T> p = selector_probs_on_tape(tape, selectors[layer], stddev, edge);
        out.probs.push_back(p);
        out.stats.push_back(LayerStats{stddev});
        std::vector<Value<T>> branches;
        for (int bit : candidates) branches.push_back(ag::quantize_act_ste(x, alpha, bit));
        return HookOut<T>{ag::mix(branches, p), wbit};
      },
      nullptr);
  return out;
}

// ---- BitOPs-weighted difficulty sampling ----

struct ConfigSample {
  BitConfig config;
  double bitops = 0.0;
};

// easy / medium / hard buckets; they partition the sample set
struct DifficultyLevels {
  std::array<std::vector<ConfigSample>, 3> buckets;

  size_t total() const { return buckets[0].size() + buckets[1].size() + buckets[2].size(); }
};

// All K^L configurations when that is small enough, otherwise `cap` random
// draws. BitOPs evaluated for an in_h x in_w input.
std::vector<ConfigSample> enumerate_configs(const SupernetSpec& spec, int64_t in_h, int64_t in_w,
                                            size_t cap = 20000, uint64_t seed = 0);

// Split by BitOPs terciles: lowest third is "easy".
DifficultyLevels bucket_by_terciles(std::vector<ConfigSample> samples);

// l^m = N_m * sum_k BitOPs_k^2, normalized across the three levels.
std::array<double, 3> level_probabilities(const DifficultyLevels& levels);

// Draw a level according to level_probabilities, then a config uniformly
// inside it.
const ConfigSample& sample_config(const DifficultyLevels& levels, Rng& rng);

}  // namespace cabm
