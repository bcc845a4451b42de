#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cabm/supernet_spec.hpp"
#include "cabm/tensor.hpp"

namespace cabm {

// Activation bit widths, one per quantized layer, in network order.
using BitConfig = std::vector<int>;

struct LayerCost {
  std::string name;
  int64_t macs = 0;
  int a_bit = 0;
  int w_bit = 0;
  double bitops = 0.0;  // macs * a_bit * w_bit
};

// Analytic cost of one bit configuration over the quantized backbone.
// total_bitops is the exact sum of the per-layer entries; gbitops() is the
// display-scale view. Head/tail layers stay out of the report: they are
// identical 32x32 terms in every configuration, and keeping them out makes
// totals directly comparable across configurations (and against the
// full-precision sentinel).
struct CostReport {
  double total_bitops = 0.0;
  double fab = 0.0;
  std::vector<LayerCost> per_layer;

  double gbitops() const { return total_bitops / 1e9; }
  std::string to_csv() const;
  std::string to_table() const;
};

// in_channels * out_channels * kernel^2 * out_h * out_w
int64_t layer_macs(const ConvSpec& spec, int64_t out_h, int64_t out_w);

double layer_bitops(int64_t macs, int a_bit, int w_bit);

// Cost of running the backbone on an H x W input. A 32 entry marks a layer
// left in full precision (32-bit activations and weights).
CostReport network_bitops(const SupernetSpec& spec, const BitConfig& config, int64_t in_h,
                          int64_t in_w);

// Mean bit width of a configuration.
double config_fab(const BitConfig& config);

}  // namespace cabm
