#pragma once

#include <string>
#include <vector>

#include "cabm/rng.hpp"
#include "cabm/tensor.hpp"

namespace cabm {

struct SamplePair {
  TensorF lr, hr;
};

struct Dataset {
  int scale = 2;
  std::vector<SamplePair> items;
};

enum class PatternKind { Flat, Ramp, Blob, Checker, BandNoise };

// Synthetic RGB image in [0, 1]. Flat/Ramp/Blob are smooth (low edge score);
// Checker and BandNoise carry texture.
TensorF synth_image(PatternKind kind, int64_t h, int64_t w, Rng& rng);

// Box-average downsampling; HR dims must be divisible by scale.
TensorF downsample_box(const TensorF& hr, int scale);

// count (LR, HR) pairs of lr_size x lr_size patches cycling through the
// pattern kinds.
Dataset make_synthetic_dataset(int count, int64_t lr_size, int scale, uint64_t seed);

// HR image whose left half is smooth and right half is textured; used for
// flat-vs-textured patch comparisons.
TensorF make_half_split_image(int64_t h, int64_t w, uint64_t seed);

// Loads pairs from <dir>/lr/<name> and <dir>/hr/<name>; every LR file must
// have an HR partner with dims scaled by `scale`.
Dataset load_dataset_dir(const std::string& dir, int scale);

// Writes dataset items as <dir>/lr/NNN.png and <dir>/hr/NNN.png.
void save_dataset_dir(const std::string& dir, const Dataset& data);

}  // namespace cabm
