#pragma once

#include "regionvad/gmm.hpp"
#include "regionvad/motion.hpp"
#include "regionvad/regions.hpp"
#include "regionvad/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace regionvad {

/// How the motion attribute enters the normalcy feature: raw radians
/// (dimension 6) or (cos, sin) of the orientation (dimension 7).
enum class OrientationEncoding { radians, cos_sin };

int feature_dimension(OrientationEncoding encoding);

/// Category one-hot plus dominant orientation and speed.
struct ObjectFeature {
  Category category = Category::person;
  MotionAttribute motion;

  Vector to_vector(OrientationEncoding encoding = OrientationEncoding::radians) const;
};

/// Fixed-length window of one tracked object.
struct Tracklet {
  std::string video_id;
  std::int64_t track_id = 0;
  std::int64_t start_frame = 0;
  std::vector<BoundingBox> boxes;  // one per frame, contiguous from start_frame
  ObjectFeature feature;

  std::int64_t length() const { return static_cast<std::int64_t>(boxes.size()); }
  std::int64_t end_frame() const { return start_frame + length(); }  // exclusive
};

/// Heatmap with one deposit per per-frame box of every tracklet, carrying
/// the tracklet's category and motion.
ActivityHeatmap build_heatmap(int height, int width, std::span<const Tracklet> tracklets,
                              KernelPolicy kernel = KernelPolicy::adaptive_sigma());

/// Region under the first centre, clamped to the frame and rounded half-up.
int assign_region(const Tracklet& tracklet, const RegionMap& map);

enum class ModelTier { mixture, single_gaussian, pooled };
std::string_view to_string(ModelTier tier);
ModelTier parse_model_tier(std::string_view name);

struct RegionModel {
  int label = 0;
  ModelTier tier = ModelTier::pooled;
  std::size_t sample_count = 0;
  std::optional<GaussianMixture> model;  // absent for the pooled tier
};

struct NormalcyOptions {
  int k_max = 20;
  std::size_t min_samples = 50;
  EmConfig em;
  OrientationEncoding encoding = OrientationEncoding::radians;
};

/// One normalcy mixture (or fallback entry) per region.
class RegionalModelSet {
 public:
  RegionalModelSet() = default;
  RegionalModelSet(std::vector<RegionModel> regions, std::optional<GaussianMixture> pooled,
                   OrientationEncoding encoding);

  int num_regions() const { return static_cast<int>(regions_.size()); }
  const RegionModel& region(int label) const;
  const std::vector<RegionModel>& regions() const { return regions_; }
  const std::optional<GaussianMixture>& pooled() const { return pooled_; }
  OrientationEncoding encoding() const { return encoding_; }
  int dimension() const;

  /// Model used to score region `label` (the pooled model for pooled tiers).
  const GaussianMixture& model_for(int label) const;
  double nll(int label, const Eigen::Ref<const Vector>& feature) const;

  const std::string& region_map_hash() const { return region_map_hash_; }
  void set_region_map_hash(std::string hash) { region_map_hash_ = std::move(hash); }

 private:
  std::vector<RegionModel> regions_;
  std::optional<GaussianMixture> pooled_;
  OrientationEncoding encoding_ = OrientationEncoding::radians;
  std::string region_map_hash_;
};

/// Feature rows grouped by the region of each tracklet; result has one
/// matrix per region (possibly with zero rows). `source_index`, when given,
/// receives the tracklet index of every row per region.
std::vector<Matrix> group_features_by_region(std::span<const Tracklet> tracklets, const RegionMap& map,
                                             OrientationEncoding encoding,
                                             std::vector<std::vector<std::size_t>>* source_index = nullptr);

/// BIC-selected full-covariance mixture for regions with >= min_samples, a
/// single Gaussian for D+2 <= n < min_samples and the pooled global model
/// below that.
RegionalModelSet train_regional_models(const std::vector<Matrix>& features_by_region,
                                       const NormalcyOptions& options);

struct Prototype {
  int component = 0;
  double weight = 0.0;
  Vector mean;
  std::size_t sample_index = 0;  // row of the supplied training features
  double distance = 0.0;         // Mahalanobis distance to the component mean
};

/// Nearest training sample to every component mean, components by
/// descending weight. Empty for regions without their own mixture.
std::vector<Prototype> prototypical_events(const RegionalModelSet& models, int region,
                                           const Matrix& training_features);

/// Mean pairwise symmetric KL between regions that have their own model
/// (mixture or single Gaussian), each scored on its own training rows.
/// Returns -infinity when fewer than two such regions exist.
double regional_mu_kl(const RegionalModelSet& models, const std::vector<Matrix>& features_by_region);

}  // namespace regionvad
