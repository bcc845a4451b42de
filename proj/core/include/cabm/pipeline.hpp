#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cabm/lut.hpp"
#include "cabm/metrics.hpp"
#include "cabm/patches.hpp"
#include "cabm/supernet.hpp"

namespace cabm {

struct PatchEval {
  EdgeScore edge;
  int64_t r = 0;  // subinterval index
  BitConfig config;
  double bitops = 0.0;
};

struct EvalResult {
  double psnr = std::numeric_limits<double>::quiet_NaN();  // NaN until a reference is supplied
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double fab = 0.0;
  double total_bitops = 0.0;
  std::vector<PatchEval> per_patch;

  std::string to_csv() const;
};

struct RunResult {
  TensorF sr;
  EvalResult eval;
};

// Full patch pipeline: split -> edge score -> LUT lookup -> quantized
// forward -> merge. With `hr` given, PSNR (RGB) and SSIM (luminance) are
// filled in. Patches are processed on a worker pool; outputs are identical
// for any thread count.
RunResult run_sr(const TensorF& image, SuperNetF& net, const EdgeToBitLUT& lut,
                 int64_t patch_size = 96, const TensorF* hr = nullptr, int threads = 0);

void save_eval_csv(const std::string& path, const EvalResult& eval);

}  // namespace cabm
