#include "cabm/selector.hpp"

#include <algorithm>
#include <cmath>

namespace cabm {

std::vector<ConfigSample> enumerate_configs(const SupernetSpec& spec, int64_t in_h, int64_t in_w,
                                            size_t cap, uint64_t seed) {
  spec.validate();
  const int L = spec.quantized_layers();
  const size_t K = spec.candidate_bits.size();
  double full = 1.0;
  for (int i = 0; i < L; ++i) full *= static_cast<double>(K);

  std::vector<ConfigSample> out;
  if (full <= static_cast<double>(cap)) {
    // odometer over all K^L configurations
    std::vector<size_t> digits(L, 0);
    while (true) {
      BitConfig cfg(L);
      for (int i = 0; i < L; ++i) cfg[i] = spec.candidate_bits[digits[i]];
      const double bops = network_bitops(spec, cfg, in_h, in_w).total_bitops;
      out.push_back(ConfigSample{std::move(cfg), bops});
      int pos = L - 1;
      while (pos >= 0 && ++digits[pos] == K) digits[pos--] = 0;
      if (pos < 0) break;
    }
  } else {
    Rng rng = Rng::seeded(seed);
    for (size_t i = 0; i < cap; ++i) {
      BitConfig cfg(L);
      for (int j = 0; j < L; ++j)
        cfg[j] = spec.candidate_bits[static_cast<size_t>(rng.uniform_int(K))];
      const double bops = network_bitops(spec, cfg, in_h, in_w).total_bitops;
      out.push_back(ConfigSample{std::move(cfg), bops});
    }
  }
  return out;
}

DifficultyLevels bucket_by_terciles(std::vector<ConfigSample> samples) {
  if (samples.empty()) throw Error("bucket_by_terciles: no samples");
  std::stable_sort(samples.begin(), samples.end(),
                   [](const ConfigSample& a, const ConfigSample& b) { return a.bitops < b.bitops; });
  DifficultyLevels levels;
  const size_t n = samples.size();
  const size_t c1 = n / 3, c2 = 2 * n / 3;
  for (size_t i = 0; i < n; ++i) {
    const int bucket = i < c1 ? 0 : (i < c2 ? 1 : 2);
    levels.buckets[bucket].push_back(std::move(samples[i]));
  }
  return levels;
}

std::array<double, 3> level_probabilities(const DifficultyLevels& levels) {
  if (levels.total() == 0) throw Error("level_probabilities: all buckets empty");
  std::array<double, 3> mass{};
  double z = 0.0;
  for (int m = 0; m < 3; ++m) {
    double sq = 0.0;
    for (const auto& s : levels.buckets[m]) sq += s.bitops * s.bitops;
    mass[m] = static_cast<double>(levels.buckets[m].size()) * sq;
    z += mass[m];
  }
  if (z <= 0.0) throw Error("level_probabilities: zero total mass");
  for (auto& v : mass) v /= z;
  return mass;
}

const ConfigSample& sample_config(const DifficultyLevels& levels, Rng& rng) {
  const std::array<double, 3> p = level_probabilities(levels);
  const double u = rng.uniform();
  int m = 0;
  double acc = p[0];
  while (m < 2 && u >= acc) acc += p[++m];
  while (m > 0 && levels.buckets[m].empty()) --m;  // guard against rounding at the top end
  while (m < 2 && levels.buckets[m].empty()) ++m;
  const auto& bucket = levels.buckets[m];
  return bucket[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(bucket.size())))];
}

}  // namespace cabm
