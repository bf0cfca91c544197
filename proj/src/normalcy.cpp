#include "regionvad/normalcy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace regionvad {

int feature_dimension(OrientationEncoding encoding) {
  return encoding == OrientationEncoding::radians ? kNumCategories + 2 : kNumCategories + 3;
}

Vector ObjectFeature::to_vector(OrientationEncoding encoding) const {
  if (!is_valid_category(category)) throw std::invalid_argument("ObjectFeature: unknown category");
  Vector f = Vector::Zero(feature_dimension(encoding));
  f[static_cast<int>(category)] = 1.0;
  const double orientation = motion.stationary ? 0.0 : motion.orientation;
  const double speed = motion.stationary ? 0.0 : motion.speed;
  if (encoding == OrientationEncoding::radians) {
    f[kNumCategories] = orientation;
    f[kNumCategories + 1] = speed;
  } else {
    f[kNumCategories] = motion.stationary ? 0.0 : std::cos(orientation);
    f[kNumCategories + 1] = motion.stationary ? 0.0 : std::sin(orientation);
    f[kNumCategories + 2] = speed;
  }
  return f;
}

ActivityHeatmap build_heatmap(int height, int width, std::span<const Tracklet> tracklets,
                              KernelPolicy kernel) {
  ActivityHeatmap heatmap(height, width, kernel);
  for (const Tracklet& t : tracklets) {
    for (const BoundingBox& box : t.boxes) {
      heatmap.accumulate({box, t.feature.category, t.feature.motion});
    }
  }
  return heatmap;
}

int assign_region(const Tracklet& tracklet, const RegionMap& map) {
  if (tracklet.boxes.empty()) throw std::invalid_argument("assign_region: tracklet has no centres");
  const double cx = tracklet.boxes.front().center_x();
  const double cy = tracklet.boxes.front().center_y();
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("assign_region: non-finite centre");
  }
  const double x = std::clamp(cx, 0.0, static_cast<double>(map.width() - 1));
  const double y = std::clamp(cy, 0.0, static_cast<double>(map.height() - 1));
  const int px = std::min(map.width() - 1, static_cast<int>(std::floor(x + 0.5)));
  const int py = std::min(map.height() - 1, static_cast<int>(std::floor(y + 0.5)));
  return map.label_at(px, py);
}

std::string_view to_string(ModelTier tier) {
  switch (tier) {
    case ModelTier::mixture: return "mixture";
    case ModelTier::single_gaussian: return "single_gaussian";
    case ModelTier::pooled: return "pooled";
  }
  return "pooled";
}

ModelTier parse_model_tier(std::string_view name) {
  if (name == "mixture") return ModelTier::mixture;
  if (name == "single_gaussian") return ModelTier::single_gaussian;
  if (name == "pooled") return ModelTier::pooled;
  throw std::invalid_argument("unknown model tier: " + std::string(name));
}

RegionalModelSet::RegionalModelSet(std::vector<RegionModel> regions,
                                   std::optional<GaussianMixture> pooled,
                                   OrientationEncoding encoding)
    : regions_(std::move(regions)), pooled_(std::move(pooled)), encoding_(encoding) {
  const int d = feature_dimension(encoding_);
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const RegionModel& r = regions_[i];
    if (r.label != static_cast<int>(i)) throw std::invalid_argument("RegionalModelSet: labels out of order");
    if (r.tier == ModelTier::pooled) {
      if (!pooled_) throw std::invalid_argument("RegionalModelSet: pooled tier without a pooled model");
    } else if (!r.model) {
      throw std::invalid_argument("RegionalModelSet: region " + std::to_string(i) + " has no model");
    }
    if (r.model && r.model->dimension() != d) {
      throw std::invalid_argument("RegionalModelSet: model dimension does not match the encoding");
    }
  }
  if (pooled_ && pooled_->dimension() != d) {
    throw std::invalid_argument("RegionalModelSet: pooled model dimension does not match the encoding");
  }
}

const RegionModel& RegionalModelSet::region(int label) const {
  if (label < 0 || label >= num_regions()) {
    throw std::out_of_range("RegionalModelSet: unknown region " + std::to_string(label));
  }
  return regions_[static_cast<std::size_t>(label)];
}

int RegionalModelSet::dimension() const { return feature_dimension(encoding_); }

const GaussianMixture& RegionalModelSet::model_for(int label) const {
  const RegionModel& r = region(label);
  if (r.tier == ModelTier::pooled) {
    if (!pooled_) throw std::logic_error("RegionalModelSet: missing pooled model");
    return *pooled_;
  }
  if (!r.model) throw std::logic_error("RegionalModelSet: region without a model");
  return *r.model;
}

double RegionalModelSet::nll(int label, const Eigen::Ref<const Vector>& feature) const {
  return -model_for(label).log_pdf(feature);
}

std::vector<Matrix> group_features_by_region(std::span<const Tracklet> tracklets, const RegionMap& map,
                                             OrientationEncoding encoding,
                                             std::vector<std::vector<std::size_t>>* source_index) {
  const int k = map.num_regions();
  const int d = feature_dimension(encoding);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    members[static_cast<std::size_t>(assign_region(tracklets[i], map))].push_back(i);
  }
  std::vector<Matrix> out(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r) {
    const auto& m = members[static_cast<std::size_t>(r)];
    Matrix rows(static_cast<Eigen::Index>(m.size()), d);
    for (std::size_t j = 0; j < m.size(); ++j) {
      rows.row(static_cast<Eigen::Index>(j)) = tracklets[m[j]].feature.to_vector(encoding).transpose();
    }
    out[static_cast<std::size_t>(r)] = std::move(rows);
  }
  if (source_index != nullptr) *source_index = std::move(members);
  return out;
}

RegionalModelSet train_regional_models(const std::vector<Matrix>& features_by_region,
                                       const NormalcyOptions& options) {
  if (features_by_region.empty()) throw std::invalid_argument("train_regional_models: no regions");
  const int d = feature_dimension(options.encoding);
  Eigen::Index total = 0;
  for (const Matrix& m : features_by_region) {
    if (m.rows() > 0 && m.cols() != d) {
      throw std::invalid_argument("train_regional_models: feature dimension mismatch");
    }
    total += m.rows();
  }
  if (total == 0) throw std::invalid_argument("train_regional_models: no training samples");

  const std::size_t single_floor = static_cast<std::size_t>(d) + 2;
  std::vector<RegionModel> regions;
  bool need_pooled = false;
  for (std::size_t r = 0; r < features_by_region.size(); ++r) {
    const Matrix& x = features_by_region[r];
    RegionModel rm;
    rm.label = static_cast<int>(r);
    rm.sample_count = static_cast<std::size_t>(x.rows());
    if (rm.sample_count >= options.min_samples && rm.sample_count > 0) {
      rm.tier = ModelTier::mixture;
      rm.model = select_components_bic(x, options.k_max, CovarianceMode::full, options.em);
    } else if (rm.sample_count >= single_floor) {
      rm.tier = ModelTier::single_gaussian;
      rm.model = fit_em(x, 1, CovarianceMode::full, options.em);
    } else {
      rm.tier = ModelTier::pooled;
      need_pooled = true;
    }
    regions.push_back(std::move(rm));
  }

  std::optional<GaussianMixture> pooled;
  if (need_pooled) {
    Matrix all(total, d);
    Eigen::Index row = 0;
    for (const Matrix& m : features_by_region) {
      if (m.rows() == 0) continue;
      all.middleRows(row, m.rows()) = m;
      row += m.rows();
    }
    pooled = select_components_bic(all, options.k_max, CovarianceMode::full, options.em);
  }
  return RegionalModelSet(std::move(regions), std::move(pooled), options.encoding);
}

std::vector<Prototype> prototypical_events(const RegionalModelSet& models, int region,
                                           const Matrix& training_features) {
  const RegionModel& rm = models.region(region);
  if (rm.tier == ModelTier::pooled || !rm.model) return {};
  const GaussianMixture& gmm = *rm.model;
  if (training_features.rows() == 0) return {};
  if (training_features.cols() != gmm.dimension()) {
    throw std::invalid_argument("prototypical_events: feature dimension mismatch");
  }
  std::vector<int> order(static_cast<std::size_t>(gmm.num_components()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gmm.weight(a) > gmm.weight(b); });
  std::vector<Prototype> out;
  for (int c : order) {
    Prototype p;
    p.component = c;
    p.weight = gmm.weight(c);
    p.mean = gmm.mean(c);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < training_features.rows(); ++i) {
      const double dist = gmm.mahalanobis_squared(c, training_features.row(i).transpose());
      if (dist < best) {
        best = dist;
        p.sample_index = static_cast<std::size_t>(i);
      }
    }
    p.distance = std::sqrt(best);
    out.push_back(std::move(p));
  }
  return out;
}

double regional_mu_kl(const RegionalModelSet& models, const std::vector<Matrix>& features_by_region) {
  std::vector<GaussianMixture> own;
  std::vector<Matrix> samples;
  for (const RegionModel& r : models.regions()) {
    if (r.tier == ModelTier::pooled || !r.model) continue;
    const Matrix& x = features_by_region.at(static_cast<std::size_t>(r.label));
    if (x.rows() == 0) continue;
    own.push_back(*r.model);
    samples.push_back(x);
  }
  if (own.size() < 2) return -std::numeric_limits<double>::infinity();
  return mean_pairwise_divergence(own, samples);
}

}  // namespace regionvad
