#include "cabm/bitops.hpp"

#include <cstdio>
#include <numeric>

#include "cabm/text.hpp"

namespace cabm {

int64_t layer_macs(const ConvSpec& spec, int64_t out_h, int64_t out_w) {
  spec.validate();
  if (out_h <= 0 || out_w <= 0) throw ShapeError("layer_macs: non-positive output dims");
  return static_cast<int64_t>(spec.in_channels) * spec.out_channels * spec.kernel * spec.kernel *
         out_h * out_w;
}

double layer_bitops(int64_t macs, int a_bit, int w_bit) {
  if (a_bit < 1 || w_bit < 1) throw Error("layer_bitops: bits must be >= 1");
  return static_cast<double>(macs) * a_bit * w_bit;
}

CostReport network_bitops(const SupernetSpec& spec, const BitConfig& config, int64_t in_h,
                          int64_t in_w) {
  spec.validate();
  if (static_cast<int>(config.size()) != spec.quantized_layers())
    throw ShapeError("network_bitops: config has " + std::to_string(config.size()) +
                     " entries, network has " + std::to_string(spec.quantized_layers()) +
                     " quantized layers");
  const ConvSpec body{spec.channels, spec.channels, 3, 1, 1};
  const int64_t macs = layer_macs(body, in_h, in_w);  // stride 1, pad 1: same dims

  CostReport report;
  for (size_t i = 0; i < config.size(); ++i) {
    const int a_bit = config[i];
    const int w_bit = a_bit == 32 ? 32 : spec.weight_bit;
    LayerCost lc;
    lc.name = "block" + std::to_string(i / 2) + ".conv" + std::to_string(i % 2 + 1);
    lc.macs = macs;
    lc.a_bit = a_bit;
    lc.w_bit = w_bit;
    lc.bitops = layer_bitops(macs, a_bit, w_bit);
    report.total_bitops += lc.bitops;
    report.per_layer.push_back(std::move(lc));
  }
  report.fab = config_fab(config);
  return report;
}

double config_fab(const BitConfig& config) {
  if (config.empty()) throw Error("config_fab: empty configuration");
  double acc = 0.0;
  for (int b : config) acc += b;
  return acc / static_cast<double>(config.size());
}

std::string CostReport::to_csv() const {
  std::string out = "layer,macs,a_bit,w_bit,bitops\n";
  for (const auto& lc : per_layer) {
    out += lc.name + "," + std::to_string(lc.macs) + "," + std::to_string(lc.a_bit) + "," +
           std::to_string(lc.w_bit) + "," + format_double(lc.bitops) + "\n";
  }
  return out;
}

std::string CostReport::to_table() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-16s %14s %6s %6s %16s\n", "layer", "macs", "a_bit", "w_bit",
                "bitops");
  out += buf;
  for (const auto& lc : per_layer) {
    std::snprintf(buf, sizeof(buf), "%-16s %14lld %6d %6d %16.0f\n", lc.name.c_str(),
                  static_cast<long long>(lc.macs), lc.a_bit, lc.w_bit, lc.bitops);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-16s %14s %6s %6s %16.0f  (%.4f G, FAB %.2f)\n", "total", "",
                "", "", total_bitops, gbitops(), fab);
  out += buf;
  return out;
}

}  // namespace cabm
