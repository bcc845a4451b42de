#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cabm/selector.hpp"
#include "cabm/supernet.hpp"

namespace cabm {

// Binary container: versioned header, the architecture spec, then named f32
// blobs for every net parameter (clamp bounds included) and, optionally, the
// selector MLPs. Round-trips are bit-exact.
void save_checkpoint(const std::string& path, SuperNetF& net,
                     const std::vector<SelectorMLPF>* selectors = nullptr);

struct LoadedCheckpoint {
  SupernetSpec spec;
  SuperNetF net;
  bool has_selectors = false;
  std::vector<SelectorMLPF> selectors;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace cabm
