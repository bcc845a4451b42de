#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cabm/bitops.hpp"
#include "cabm/edge_score.hpp"
#include "cabm/selector.hpp"
#include "cabm/supernet.hpp"

namespace cabm {

// One calibration observation: a patch's edge score, the bit configuration
// the selectors chose for it, and that configuration's BitOPs.
struct BitRecord {
  EdgeScore edge;
  BitConfig config;
  double bitops = 0.0;
};

// Subinterval r of the edge-score axis. Base bounds follow
//   [F*(r-1)/2, F*(5r-1)/10]
// and are kept in integer units of F/10 (lo = 5(r-1), hi = 5r-1) so width,
// stride and membership tests are exact. Expansion widens intervals with
// r > beta by delta_e grid steps (delta_e * F) on each side.
struct Subinterval {
  int64_t r = 1;
  double F = 0.01;
  int64_t lo_units = 0, hi_units = 0;
  int64_t exp_lo_units = 0, exp_hi_units = 0;

  double lo() const { return static_cast<double>(lo_units) * (F / 10.0); }
  double hi() const { return static_cast<double>(hi_units) * (F / 10.0); }
  double expanded_lo() const { return static_cast<double>(exp_lo_units) * (F / 10.0); }
  double expanded_hi() const { return static_cast<double>(exp_hi_units) * (F / 10.0); }
};

enum class Strategy { S1, S2, S3 };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Edge-to-Bit lookup table: R subintervals, one bit configuration each.
struct EdgeToBitLUT {
  double F = 0.01;
  int64_t R = 0;
  int layers = 0;
  Strategy strategy = Strategy::S1;
  int64_t delta_e = 0;  // expansion in F-grid steps
  int64_t beta = 0;     // last unexpanded subinterval index
  std::vector<BitConfig> entries;  // size R, indexed by r-1
};

// R = ceil((10*max_e + F) / (5*F)), at least 1.
int64_t num_subintervals(double max_e, double F);

// beta used by "--beta auto": 45% of the table stays unexpanded.
int64_t default_beta(int64_t R);

Subinterval subinterval_bounds(int64_t r, double F, int64_t delta_e, int64_t beta);

// Maps an edge score to its subinterval. Scores inside a base interval map
// exactly; scores in the 0.1*F gaps go to the nearest interval (lower index
// on ties); everything clamps to [1, R].
int64_t subinterval_index(double e, double F, int64_t R);

// Run the trained selectors over a calibration patch set.
std::vector<BitRecord> collect_records(SuperNetF& net, std::vector<SelectorMLPF>& selectors,
                                       const std::vector<TensorF>& patches, double F = 0.01);

// Build the table: per expanded subinterval S1 takes the minimum-BitOPs
// configuration (ties -> lexicographically smallest), S2 the maximum, S3 a
// uniform draw seeded per subinterval. Subintervals with no candidates
// inherit from the nearest non-empty one (lower index on ties).
EdgeToBitLUT build_lut(const std::vector<BitRecord>& records, Strategy strategy, double F,
                       int64_t delta_e, int64_t beta, uint64_t seed = 0);

const BitConfig& lookup(const EdgeToBitLUT& lut, const EdgeScore& e);

// Line-oriented text format with a versioned header; serialize/deserialize
// round-trips are byte-exact for tables produced by build_lut.
std::string serialize(const EdgeToBitLUT& lut);
EdgeToBitLUT deserialize(const std::string& text);
void save_lut(const std::string& path, const EdgeToBitLUT& lut);
EdgeToBitLUT load_lut(const std::string& path);

// BitRecords CSV: header "edge,bitops,b1,...,bL".
std::string records_to_csv(const std::vector<BitRecord>& records);
std::vector<BitRecord> records_from_csv(const std::string& text, double F);
void save_records(const std::string& path, const std::vector<BitRecord>& records);
std::vector<BitRecord> load_records(const std::string& path, double F);

}  // namespace cabm
