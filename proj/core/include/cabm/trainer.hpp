#pragma once

#include <string>
#include <vector>

#include "cabm/dataset.hpp"
#include "cabm/lut.hpp"
#include "cabm/selector.hpp"
#include "cabm/supernet.hpp"

namespace cabm {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-3;
  double momentum = 0.9;
  bool cosine = true;           // cosine decay over epochs
  double lambda_bitops = 0.05;  // weight of the normalized BitOPs penalty
  double selector_lr_mult = 25.0;  // selector MLPs train faster than the backbone
  double edge_precision = 0.01;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double l1 = 0.0;
  double penalty = 0.0;
  double lr = 0.0;
};
using LossCurve = std::vector<EpochLog>;

std::string loss_curve_csv(const LossCurve& curve);
void save_loss_curve(const std::string& path, const LossCurve& curve);

// Initializes every clamp bound to the 99.9th percentile of that layer's
// input magnitudes over a calibration batch.
void calibrate_alphas(SuperNetF& net, const Dataset& data, size_t max_samples = 16);

// Joint supernet + selector training. Loss per patch:
//   l1(SR, HR) + lambda * E_p[BitOPs] / BitOPs(all-8)
// with the softmax-gated mixture feeding each quantized layer. Throws
// DivergenceError when the loss stops being finite.
LossCurve train_supernet(SuperNetF& net, std::vector<SelectorMLPF>& selectors, const Dataset& data,
                         const TrainConfig& cfg);

// Shared-weight training where each step draws a difficulty level by the
// squared-BitOPs rule and then a configuration uniformly inside it.
LossCurve train_with_bitops_sampling(SuperNetF& net, const Dataset& data,
                                     const DifficultyLevels& levels, const TrainConfig& cfg);

// Fine-tuning with configurations frozen to lookup(edge score); selectors
// are out of the loop.
LossCurve finetune_cabm(SuperNetF& net, const EdgeToBitLUT& lut, const Dataset& data,
                        const TrainConfig& cfg);

}  // namespace cabm
