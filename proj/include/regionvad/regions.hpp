#pragma once

#include "regionvad/gmm.hpp"
#include "regionvad/heatmap.hpp"
#include "regionvad/types.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace regionvad {

enum class ClusterMethod { gmm_full, gmm_diagonal, gmm_spherical, gmm_tied, kmeans };

std::string_view to_string(ClusterMethod method);
ClusterMethod parse_cluster_method(std::string_view name);

struct DiscoveryOptions {
  double spatial_affinity = 0.0;  // weight of appended (x/W, y/H) columns; 0 disables
  ClusterMethod method = ClusterMethod::gmm_full;
  std::size_t subsample = 200000;
  std::uint64_t seed = 0;
  double min_mass = 1e-3;
  EmConfig em;
};

struct RegionProvenance {
  std::uint64_t seed = 0;
  int requested_k = 0;
  std::string method = "grid";
  // Mean pairwise symmetric KL between regional normalcy models; NaN until a
  // model set has been evaluated on this map.
  double mu_kl = std::numeric_limits<double>::quiet_NaN();
  // Mean pairwise closed-form symmetric KL between the clustering components
  // in pixel-feature space; close to zero when the clusters are not separable.
  double component_separation = std::numeric_limits<double>::quiet_NaN();
  std::size_t subsample_size = 0;
  std::size_t active_pixels = 0;
  double spatial_affinity = 0.0;
};

/// H x W field of region labels in [0, K); every label occurs at least once.
class RegionMap {
 public:
  RegionMap() = default;
  RegionMap(int height, int width, std::vector<int> labels, RegionProvenance provenance = {});
  /// Same as above but with a declared K, validated against the labels.
  RegionMap(int height, int width, int k, std::vector<int> labels, RegionProvenance provenance);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_regions() const { return k_; }
  int label_at(int x, int y) const {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<int>& labels() const { return labels_; }
  const RegionProvenance& provenance() const { return provenance_; }
  RegionProvenance& provenance() { return provenance_; }
  std::vector<std::size_t> region_sizes() const;

  friend bool operator==(const RegionMap& a, const RegionMap& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.k_ == b.k_ &&
           a.labels_ == b.labels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int k_ = 0;
  std::vector<int> labels_;
  RegionProvenance provenance_;
};

/// Clusters active-pixel vectors into K regions, labels inactive pixels by
/// their nearest active pixel and orders labels by descending region size.
RegionMap discover_regions(const ActivityHeatmap& heatmap, int k, const DiscoveryOptions& options);

/// Nearest-active-pixel completion of a partial label field (-1 = unlabeled).
/// Equidistant candidates resolve to the smaller label.
std::vector<int> fill_nearest_labels(int height, int width, const std::vector<int>& partial);

/// Relabels so that label 0 is the largest region; empty labels are dropped.
/// Returns the number of regions.
int relabel_by_size(std::vector<int>& labels, int k);

/// Non-overlapping rectangular cells, labelled row-major.
RegionMap grid_region_map(int height, int width, int cell = 80);

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::vector<Rgb>;

/// K distinct deterministic colours.
Palette default_palette(int k);

/// Binary PPM (P6) rendering of a region map.
std::vector<std::uint8_t> render_region_map(const RegionMap& map, const Palette& palette);

/// Inverse of render_region_map for images produced with the same palette.
std::vector<int> decode_rendered_labels(const std::vector<std::uint8_t>& ppm,
                                        const Palette& palette);

}  // namespace regionvad
