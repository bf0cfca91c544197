#include "regionvad/select_k.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regionvad {

SelectKResult select_k(const ActivityHeatmap& heatmap, std::span<const Tracklet> tracklets,
                       std::span<const int> candidates, const DiscoveryOptions& discovery,
                       const NormalcyOptions& normalcy) {
  if (candidates.empty()) throw std::invalid_argument("select_k: no candidates");
  for (int k : candidates) {
    if (k < 2) throw std::invalid_argument("select_k: candidates must be >= 2");
  }
  std::vector<int> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  SelectKResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (int k : sorted) {
    double mu = -std::numeric_limits<double>::infinity();
    std::optional<RegionMap> map;
    try {
      map = discover_regions(heatmap, k, discovery);
      const auto grouped = group_features_by_region(tracklets, *map, normalcy.encoding);
      const RegionalModelSet models = train_regional_models(grouped, normalcy);
      mu = regional_mu_kl(models, grouped);
      if (!std::isfinite(mu)) mu = -std::numeric_limits<double>::infinity();
      map->provenance().mu_kl = mu;
    } catch (const std::exception&) {
      mu = -std::numeric_limits<double>::infinity();
      map.reset();
    }
    result.table.emplace_back(k, mu);
    if (result.best_k == 0 || mu > best) {
      best = mu;
      result.best_k = k;
      result.best_map = std::move(map);
    }
  }
  return result;
}

}  // namespace regionvad
