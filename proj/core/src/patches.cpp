#include "cabm/patches.hpp"

#include "cabm/edge_score.hpp"

namespace cabm {

std::pair<PatchGrid, std::vector<TensorF>> split_patches(const TensorF& image, int64_t size) {
  if (size <= 0) throw Error("split_patches: patch size must be positive");
  if (image.shape.n != 1) throw ShapeError("split_patches: expected a single image (N = 1)");
  if (image.shape.h < 1 || image.shape.w < 1)
    throw ShapeError("split_patches: empty image " + image.shape.str());

  PatchGrid grid;
  grid.patch_size = size;
  grid.img_h = image.shape.h;
  grid.img_w = image.shape.w;
  grid.padded_h = (image.shape.h + size - 1) / size * size;
  grid.padded_w = (image.shape.w + size - 1) / size * size;

  const int64_t C = image.shape.c;
  std::vector<TensorF> patches;
  for (int64_t row = 0; row < grid.padded_h; row += size) {
    for (int64_t col = 0; col < grid.padded_w; col += size) {
      TensorF patch({1, C, size, size});
      for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < size; ++y) {
          const int64_t sy = reflect_index(row + y, image.shape.h);
          for (int64_t x = 0; x < size; ++x)
            patch.at(0, c, y, x) = image.at(0, c, sy, reflect_index(col + x, image.shape.w));
        }
      grid.positions.emplace_back(row, col);
      patches.push_back(std::move(patch));
    }
  }
  return {std::move(grid), std::move(patches)};
}

TensorF merge_patches(const PatchGrid& grid, const std::vector<TensorF>& sr_patches, int scale) {
  if (scale <= 0) throw Error("merge_patches: scale must be positive");
  if (sr_patches.size() != grid.positions.size())
    throw ShapeError("merge_patches: " + std::to_string(sr_patches.size()) + " patches for " +
                     std::to_string(grid.positions.size()) + " grid positions");
  const int64_t ps = grid.patch_size * scale;
  const int64_t C = sr_patches.empty() ? 0 : sr_patches[0].shape.c;
  for (const auto& p : sr_patches)
    if (!(p.shape == Shape4{1, C, ps, ps}))
      throw ShapeError("merge_patches: patch shape " + p.shape.str() + " != expected (1," +
                       std::to_string(C) + "," + std::to_string(ps) + "," + std::to_string(ps) +
                       ")");

  TensorF canvas({1, C, grid.padded_h * scale, grid.padded_w * scale});
  for (size_t i = 0; i < sr_patches.size(); ++i) {
    const auto [row, col] = grid.positions[i];
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < ps; ++y)
        for (int64_t x = 0; x < ps; ++x)
          canvas.at(0, c, row * scale + y, col * scale + x) = sr_patches[i].at(0, c, y, x);
  }
  // crop the reflected padding
  TensorF out({1, C, grid.img_h * scale, grid.img_w * scale});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < out.shape.h; ++y)
      for (int64_t x = 0; x < out.shape.w; ++x) out.at(0, c, y, x) = canvas.at(0, c, y, x);
  return out;
}

}  // namespace cabm
