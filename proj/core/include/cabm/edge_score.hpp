#pragma once

#include <cmath>
#include <cstdint>

#include "cabm/tensor.hpp"

namespace cabm {

// Scalar edge score of a patch: mean absolute Laplacian response of the
// luminance, rounded to the nearest multiple of the precision F. value/F is
// always an integer; grid_index() recovers it.
struct EdgeScore {
  double value = 0.0;
  double precision = 0.01;

  int64_t grid_index() const { return static_cast<int64_t>(std::llround(value / precision)); }
};

// BT.601 luma for C==3 inputs; C==1 passes through.
TensorF to_luminance(const TensorF& rgb);

// 4-neighbor Laplacian [[0,1,0],[1,-4,1],[0,1,0]] with reflect padding.
// Input and output are single-channel and the same size.
TensorF laplacian_response(const TensorF& gray);

EdgeScore edge_score(const TensorF& patch, double F = 0.01);

// symmetric reflection (edge pixels repeated) for any pad distance
int64_t reflect_index(int64_t i, int64_t n);

}  // namespace cabm
