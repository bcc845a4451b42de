#include "cabm/bitops.hpp"
#include "cabm/rng.hpp"
#include "doctest.h"

using namespace cabm;

TEST_CASE("layer_macs: hand multiplication and linearity") {
  ConvSpec spec{16, 16, 3, 1, 1};
  CHECK(layer_macs(spec, 24, 24) == 1327104);  // 16*16*9*576

  ConvSpec unit{1, 1, 1, 1, 0};
  CHECK(layer_macs(unit, 1, 1) == 1);

  ConvSpec doubled{16, 32, 3, 1, 1};
  CHECK(layer_macs(doubled, 24, 24) == 2 * layer_macs(spec, 24, 24));
}

TEST_CASE("layer_bitops: definitional values") {
  CHECK(layer_bitops(100, 8, 8) == 6400.0);
  CHECK(layer_bitops(100, 32, 32) == 102400.0);
  CHECK(layer_bitops(100, 4, 8) == 0.5 * layer_bitops(100, 8, 8));
  CHECK_THROWS_AS(layer_bitops(100, 0, 8), Error);
}

TEST_CASE("network_bitops: fab, additivity, monotonicity") {
  SupernetSpec spec;  // 4 blocks, 16 channels, weight bit 8
  BitConfig all8(spec.quantized_layers(), 8);
  CostReport r8 = network_bitops(spec, all8, 24, 24);
  CHECK(r8.fab == 8.0);
  CHECK(static_cast<int>(r8.per_layer.size()) == spec.quantized_layers());

  double sum = 0.0;
  for (const auto& lc : r8.per_layer) sum += lc.bitops;
  CHECK(sum == r8.total_bitops);  // exact additivity

  // raising one layer's bit never lowers the total
  Rng rng = Rng::seeded(17);
  for (int trial = 0; trial < 50; ++trial) {
    BitConfig cfg(spec.quantized_layers());
    for (auto& b : cfg) b = spec.candidate_bits[rng.uniform_int(3)];
    const double before = network_bitops(spec, cfg, 24, 24).total_bitops;
    const size_t which = rng.uniform_int(cfg.size());
    BitConfig raised = cfg;
    if (raised[which] < 8) raised[which] += 2;
    const double after = network_bitops(spec, raised, 24, 24).total_bitops;
    CHECK(after >= before);
    // fab bounds
    CostReport rep = network_bitops(spec, cfg, 24, 24);
    int lo = 8, hi = 4;
    for (int b : cfg) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    CHECK(rep.fab >= lo);
    CHECK(rep.fab <= hi);
  }
}

TEST_CASE("network_bitops: two-layer toy net hand sum") {
  SupernetSpec spec;
  spec.num_blocks = 1;  // two quantized layers
  spec.channels = 4;
  BitConfig cfg{4, 6};
  CostReport r = network_bitops(spec, cfg, 5, 5);
  const int64_t macs = 4 * 4 * 9 * 25;  // 3600
  CHECK(r.per_layer[0].bitops == macs * 4.0 * 8.0);
  CHECK(r.per_layer[1].bitops == macs * 6.0 * 8.0);
  CHECK(r.total_bitops == macs * 4.0 * 8.0 + macs * 6.0 * 8.0);
  CHECK(r.fab == 5.0);
}

TEST_CASE("network_bitops: full-precision sentinel is exactly 16x the all-8 cost") {
  SupernetSpec spec;
  BitConfig all8(spec.quantized_layers(), 8);
  BitConfig all32(spec.quantized_layers(), 32);
  const double q = network_bitops(spec, all8, 96, 96).total_bitops;
  const double fp = network_bitops(spec, all32, 96, 96).total_bitops;
  CHECK(fp / q == 16.0);
}

TEST_CASE("network_bitops: config length mismatch throws") {
  SupernetSpec spec;
  BitConfig wrong(spec.quantized_layers() - 1, 8);
  CHECK_THROWS_AS(network_bitops(spec, wrong, 24, 24), ShapeError);
}

TEST_CASE("mean of per-patch FABs equals FAB of the pooled configs") {
  Rng rng = Rng::seeded(23);
  std::vector<BitConfig> configs;
  double acc = 0.0;
  int64_t total_bits = 0;
  for (int i = 0; i < 20; ++i) {
    BitConfig c(8);
    for (auto& b : c) b = 4 + 2 * static_cast<int>(rng.uniform_int(3));
    acc += config_fab(c);
    for (int b : c) total_bits += b;
    configs.push_back(c);
  }
  CHECK(acc / 20.0 == doctest::Approx(static_cast<double>(total_bits) / (20.0 * 8.0)));
}

TEST_CASE("cost report serializes to CSV with the documented columns") {
  SupernetSpec spec;
  spec.num_blocks = 1;
  BitConfig cfg{4, 8};
  CostReport r = network_bitops(spec, cfg, 4, 4);
  const std::string csv = r.to_csv();
  CHECK(csv.find("layer,macs,a_bit,w_bit,bitops\n") == 0);
  CHECK(csv.find("block0.conv1") != std::string::npos);
  CHECK(csv.find("block0.conv2") != std::string::npos);
  CHECK(r.to_table().find("FAB") != std::string::npos);
}
