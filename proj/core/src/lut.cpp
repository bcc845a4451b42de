#include "cabm/lut.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cabm/text.hpp"

namespace cabm {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::S1: return "S1";
    case Strategy::S2: return "S2";
    case Strategy::S3: return "S3";
  }
  throw Error("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "S1") return Strategy::S1;
  if (name == "S2") return Strategy::S2;
  if (name == "S3") return Strategy::S3;
  throw Error("unknown strategy '" + name + "' (expected S1, S2 or S3)");
}

int64_t num_subintervals(double max_e, double F) {
  if (F <= 0.0) throw Error("num_subintervals: F must be positive");
  if (max_e < 0.0) throw Error("num_subintervals: max_e must be non-negative");
  const double q = (10.0 * max_e + F) / (5.0 * F);
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(q)));
}

int64_t default_beta(int64_t R) { return std::llround(0.45 * static_cast<double>(R)); }

Subinterval subinterval_bounds(int64_t r, double F, int64_t delta_e, int64_t beta) {
  if (r < 1) throw Error("subinterval_bounds: r must be >= 1, got " + std::to_string(r));
  if (F <= 0.0) throw Error("subinterval_bounds: F must be positive");
  if (delta_e < 0) throw Error("subinterval_bounds: delta_e must be non-negative");
  Subinterval s;
  s.r = r;
  s.F = F;
  s.lo_units = 5 * (r - 1);
  s.hi_units = 5 * r - 1;
  if (r > beta) {
    s.exp_lo_units = s.lo_units - 10 * delta_e;
    s.exp_hi_units = s.hi_units + 10 * delta_e;
  } else {
    s.exp_lo_units = s.lo_units;
    s.exp_hi_units = s.hi_units;
  }
  return s;
}

int64_t subinterval_index(double e, double F, int64_t R) {
  if (F <= 0.0) throw Error("subinterval_index: F must be positive");
  if (R < 1) throw Error("subinterval_index: R must be >= 1");
  if (e < 0.0) e = 0.0;
  // interval r covers [r-1, r-0.2] in u = 2e/F; gaps split at their midpoint
  const double u = 2.0 * e / F;
  const double k = std::floor(u);
  const double frac = u - k;
  int64_t r = static_cast<int64_t>(k) + (frac > 0.9 ? 2 : 1);
  return std::clamp<int64_t>(r, 1, R);
}

namespace {

// exact grid position of a record in F/10 units
int64_t record_units(const BitRecord& rec, double F, int line_no = 0) {
  const double ratio = rec.edge.value / F;
  const int64_t k = std::llround(ratio);
  if (std::abs(ratio - static_cast<double>(k)) > 1e-6)
    throw ParseError("edge score " + format_double(rec.edge.value) +
                         " is not a multiple of F = " + format_double(F),
                     line_no);
  return 10 * k;
}

}  // namespace

std::vector<BitRecord> collect_records(SuperNetF& net, std::vector<SelectorMLPF>& selectors,
                                       const std::vector<TensorF>& patches, double F) {
  if (patches.empty()) throw Error("collect_records: empty patch set");
  std::vector<BitRecord> records;
  records.reserve(patches.size());
  for (const TensorF& patch : patches) {
    BitRecord rec;
    rec.edge = edge_score(patch, F);
    rec.config = select_bits(net, selectors, patch, F);
    rec.bitops = network_bitops(net.spec(), rec.config, patch.shape.h, patch.shape.w).total_bitops;
    records.push_back(std::move(rec));
  }
  return records;
}

EdgeToBitLUT build_lut(const std::vector<BitRecord>& records, Strategy strategy, double F,
                       int64_t delta_e, int64_t beta, uint64_t seed) {
  if (records.empty()) throw Error("build_lut: no records");
  if (F <= 0.0) throw Error("build_lut: F must be positive");
  const size_t layers = records.front().config.size();
  for (const auto& rec : records)
    if (rec.config.size() != layers) throw Error("build_lut: records have mixed config lengths");

  double max_e = 0.0;
  for (const auto& rec : records) max_e = std::max(max_e, rec.edge.value);
  const int64_t R = num_subintervals(max_e, F);
  if (beta < 0) beta = default_beta(R);

  // records sorted by exact grid position
  struct Indexed {
    int64_t units;
    const BitRecord* rec;
  };
  std::vector<Indexed> sorted;
  sorted.reserve(records.size());
  for (const auto& rec : records) sorted.push_back({record_units(rec, F), &rec});
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Indexed& a, const Indexed& b) { return a.units < b.units; });

  Rng rng = Rng::seeded(seed);
  std::vector<const BitRecord*> chosen(static_cast<size_t>(R), nullptr);
  for (int64_t r = 1; r <= R; ++r) {
    const Subinterval s = subinterval_bounds(r, F, delta_e, beta);
    auto lo_it = std::lower_bound(sorted.begin(), sorted.end(), s.exp_lo_units,
                                  [](const Indexed& a, int64_t v) { return a.units < v; });
    auto hi_it = std::upper_bound(sorted.begin(), sorted.end(), s.exp_hi_units,
                                  [](int64_t v, const Indexed& a) { return v < a.units; });
    if (lo_it == hi_it) continue;  // empty, fill later

    const BitRecord* pick = nullptr;
    switch (strategy) {
      case Strategy::S1:
        for (auto it = lo_it; it != hi_it; ++it) {
          if (!pick || it->rec->bitops < pick->bitops ||
              (it->rec->bitops == pick->bitops && it->rec->config < pick->config))
            pick = it->rec;
        }
        break;
      case Strategy::S2:
        for (auto it = lo_it; it != hi_it; ++it) {
          if (!pick || it->rec->bitops > pick->bitops ||
              (it->rec->bitops == pick->bitops && pick->config < it->rec->config))
            pick = it->rec;
        }
        break;
      case Strategy::S3: {
        Rng sub = rng.fork(static_cast<uint64_t>(r));
        const int64_t count = hi_it - lo_it;
        pick = (lo_it + sub.uniform_int(count))->rec;
        break;
      }
    }
    chosen[static_cast<size_t>(r - 1)] = pick;
  }

  // fill empties from the nearest populated subinterval, lower index on ties
  std::vector<int64_t> left(static_cast<size_t>(R), -1), right(static_cast<size_t>(R), -1);
  int64_t last = -1;
  for (int64_t i = 0; i < R; ++i) {
    if (chosen[i]) last = i;
    left[i] = last;
  }
  last = -1;
  for (int64_t i = R - 1; i >= 0; --i) {
    if (chosen[i]) last = i;
    right[i] = last;
  }
  EdgeToBitLUT lut;
  lut.F = F;
  lut.R = R;
  lut.layers = static_cast<int>(layers);
  lut.strategy = strategy;
  lut.delta_e = delta_e;
  lut.beta = beta;
  lut.entries.resize(static_cast<size_t>(R));
  for (int64_t i = 0; i < R; ++i) {
    const BitRecord* src = chosen[i];
    if (!src) {
      const int64_t l = left[i], rgt = right[i];
      int64_t from;
      if (l < 0)
        from = rgt;
      else if (rgt < 0)
        from = l;
      else
        from = (i - l <= rgt - i) ? l : rgt;
      src = chosen[from];
    }
    lut.entries[i] = src->config;
  }
  return lut;
}

const BitConfig& lookup(const EdgeToBitLUT& lut, const EdgeScore& e) {
  if (lut.entries.empty()) throw Error("lookup: empty LUT");
  const int64_t r = subinterval_index(e.value, lut.F, lut.R);
  return lut.entries[static_cast<size_t>(r - 1)];
}

std::string serialize(const EdgeToBitLUT& lut) {
  if (static_cast<int64_t>(lut.entries.size()) != lut.R)
    throw Error("serialize: entry count does not match R");
  std::string out = "CABM-LUT v1; F=" + format_double(lut.F) + "; R=" + std::to_string(lut.R) +
                    "; layers=" + std::to_string(lut.layers) +
                    "; strategy=" + strategy_name(lut.strategy) +
                    "; de=" + std::to_string(lut.delta_e) + "; beta=" + std::to_string(lut.beta) +
                    "\n";
  for (int64_t r = 1; r <= lut.R; ++r) {
    const Subinterval s = subinterval_bounds(r, lut.F, 0, 0);
    out += std::to_string(r) + " " + format_double(s.lo()) + " " + format_double(s.hi());
    const BitConfig& cfg = lut.entries[static_cast<size_t>(r - 1)];
    out += " ";
    for (size_t i = 0; i < cfg.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(cfg[i]);
    }
    out += "\n";
  }
  return out;
}

namespace {

std::string_view expect_field(std::string_view token, std::string_view key, int line_no) {
  if (token.substr(0, key.size()) != key)
    throw ParseError("expected header field '" + std::string(key) + "', got '" +
                         std::string(token) + "'",
                     line_no);
  return token.substr(key.size());
}

}  // namespace

EdgeToBitLUT deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty LUT file", 1);

  auto fields = split(trim(line), ';');
  for (auto& f : fields) f = trim(f);
  if (fields.size() != 7 || fields[0] != "CABM-LUT v1")
    throw ParseError("bad header, expected 'CABM-LUT v1; F=..; R=..; layers=..; strategy=..; "
                     "de=..; beta=..'",
                     1);
  EdgeToBitLUT lut;
  lut.F = parse_double(expect_field(fields[1], "F=", 1), 1);
  lut.R = parse_int(expect_field(fields[2], "R=", 1), 1);
  lut.layers = static_cast<int>(parse_int(expect_field(fields[3], "layers=", 1), 1));
  lut.strategy = strategy_from_name(std::string(expect_field(fields[4], "strategy=", 1)));
  lut.delta_e = parse_int(expect_field(fields[5], "de=", 1), 1);
  lut.beta = parse_int(expect_field(fields[6], "beta=", 1), 1);
  if (lut.F <= 0.0) throw ParseError("header F must be positive", 1);
  if (lut.R < 1) throw ParseError("header R must be >= 1", 1);
  if (lut.layers < 1) throw ParseError("header layers must be >= 1", 1);

  lut.entries.resize(static_cast<size_t>(lut.R));
  for (int64_t r = 1; r <= lut.R; ++r) {
    const int line_no = static_cast<int>(r) + 1;
    if (!std::getline(in, line))
      throw ParseError("missing subinterval line (expected R = " + std::to_string(lut.R) + ")",
                       line_no);
    auto parts = split(trim(line), ' ');
    if (parts.size() != 4)
      throw ParseError("expected 'r lo hi b1,...,bL'", line_no);
    if (parse_int(parts[0], line_no) != r)
      throw ParseError("subinterval index out of order: expected " + std::to_string(r), line_no);
    const Subinterval want = subinterval_bounds(r, lut.F, 0, 0);
    const double lo = parse_double(parts[1], line_no);
    const double hi = parse_double(parts[2], line_no);
    const double tol = 1e-12 + 1e-9 * std::abs(want.hi());
    if (std::abs(lo - want.lo()) > tol || std::abs(hi - want.hi()) > tol)
      throw ParseError("bounds [" + std::string(parts[1]) + ", " + std::string(parts[2]) +
                           "] do not match F = " + format_double(lut.F) + " (expected [" +
                           format_double(want.lo()) + ", " + format_double(want.hi()) + "])",
                       line_no);
    auto bits = split(parts[3], ',');
    if (static_cast<int>(bits.size()) != lut.layers)
      throw ParseError("expected " + std::to_string(lut.layers) + " bit entries", line_no);
    BitConfig cfg;
    for (auto b : bits) {
      const int64_t bit = parse_int(b, line_no);
      if (bit < 2 || bit > 32) throw ParseError("bit width out of range", line_no);
      cfg.push_back(static_cast<int>(bit));
    }
    lut.entries[static_cast<size_t>(r - 1)] = std::move(cfg);
  }
  while (std::getline(in, line))
    if (!trim(line).empty())
      throw ParseError("trailing content after " + std::to_string(lut.R) + " subintervals", 0);
  return lut;
}

void save_lut(const std::string& path, const EdgeToBitLUT& lut) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << serialize(lut);
}

EdgeToBitLUT load_lut(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

std::string records_to_csv(const std::vector<BitRecord>& records) {
  if (records.empty()) throw Error("records_to_csv: no records");
  const size_t layers = records.front().config.size();
  std::string out = "edge,bitops";
  for (size_t i = 1; i <= layers; ++i) out += ",b" + std::to_string(i);
  out += "\n";
  for (const auto& rec : records) {
    out += format_double(rec.edge.value) + "," + format_double(rec.bitops);
    for (int b : rec.config) out += "," + std::to_string(b);
    out += "\n";
  }
  return out;
}

std::vector<BitRecord> records_from_csv(const std::string& text, double F) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty records file", 1);
  auto header = split(trim(line), ',');
  if (header.size() < 3 || header[0] != "edge" || header[1] != "bitops")
    throw ParseError("bad records header, expected 'edge,bitops,b1,...'", 1);
  const size_t layers = header.size() - 2;
  for (size_t i = 0; i < layers; ++i)
    if (header[i + 2] != "b" + std::to_string(i + 1))
      throw ParseError("bad records header column '" + std::string(header[i + 2]) + "'", 1);

  std::vector<BitRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto parts = split(trim(line), ',');
    if (parts.size() != layers + 2)
      throw ParseError("expected " + std::to_string(layers + 2) + " columns", line_no);
    BitRecord rec;
    rec.edge = EdgeScore{parse_double(parts[0], line_no), F};
    rec.bitops = parse_double(parts[1], line_no);
    for (size_t i = 0; i < layers; ++i)
      rec.config.push_back(static_cast<int>(parse_int(parts[i + 2], line_no)));
    record_units(rec, F, line_no);  // grid validation
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError("records file has a header but no rows", line_no);
  return records;
}

void save_records(const std::string& path, const std::vector<BitRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << records_to_csv(records);
}

std::vector<BitRecord> load_records(const std::string& path, double F) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return records_from_csv(ss.str(), F);
}

}  // namespace cabm
