#pragma once

#include "regionvad/heatmap.hpp"
#include "regionvad/normalcy.hpp"
#include "regionvad/regions.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace regionvad {

struct SelectKResult {
  int best_k = 0;
  // (K, mu_KL) per candidate; failed candidates carry -infinity.
  std::vector<std::pair<int, double>> table;
  std::optional<RegionMap> best_map;
};

/// For every candidate K: discover regions, train regional models on the
/// grouped tracklet features and score the split by mean pairwise symmetric
/// KL. Returns the K with the largest value (ties and all-failed runs go to
/// the smallest candidate).
SelectKResult select_k(const ActivityHeatmap& heatmap, std::span<const Tracklet> tracklets,
                       std::span<const int> candidates, const DiscoveryOptions& discovery,
                       const NormalcyOptions& normalcy);

}  // namespace regionvad
