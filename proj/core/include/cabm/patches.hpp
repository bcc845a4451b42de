#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cabm/tensor.hpp"

namespace cabm {

// Non-overlapping tiling of a (possibly reflect-padded) image. Padding is
// applied on the bottom and right edges only, so merge crops from the
// top-left corner.
struct PatchGrid {
  int64_t patch_size = 96;
  int64_t img_h = 0, img_w = 0;
  int64_t padded_h = 0, padded_w = 0;
  std::vector<std::pair<int64_t, int64_t>> positions;  // (row, col) origins, row-major

  int64_t pad_bottom() const { return padded_h - img_h; }
  int64_t pad_right() const { return padded_w - img_w; }
  int64_t rows() const { return padded_h / patch_size; }
  int64_t cols() const { return padded_w / patch_size; }
};

// Reflect-pads the image up to multiples of `size` and cuts size x size
// patches in row-major order.
std::pair<PatchGrid, std::vector<TensorF>> split_patches(const TensorF& image, int64_t size);

// Places SR patches at (row*scale, col*scale) and crops the padding.
TensorF merge_patches(const PatchGrid& grid, const std::vector<TensorF>& sr_patches, int scale);

}  // namespace cabm
