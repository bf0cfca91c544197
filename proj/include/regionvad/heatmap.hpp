#pragma once

#include "regionvad/motion.hpp"
#include "regionvad/types.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace regionvad {

/// Channel layout of the activity heatmap: 4 category, 12 direction,
/// 4 log-speed and 1 stationary channel.
struct AttributeLayout {
  static constexpr int category_offset = 0;
  static constexpr int category_count = kNumCategories;
  static constexpr int direction_offset = category_offset + category_count;
  static constexpr int direction_count = kOrientationBins;
  static constexpr int speed_offset = direction_offset + direction_count;
  static constexpr int speed_count = kLogSpeedBins;
  static constexpr int stationary_offset = speed_offset + speed_count;
  static constexpr int channels = stationary_offset + 1;

  static nlohmann::json to_json();
};

/// Spatial spread of one deposit. Adaptive uses max(box width, height) / 4.
struct KernelPolicy {
  bool adaptive = true;
  double sigma = 0.0;

  static KernelPolicy adaptive_sigma() { return {}; }
  static KernelPolicy fixed_sigma(double sigma) { return {false, sigma}; }
  double sigma_for(const BoundingBox& box) const;
};

struct HeatmapObservation {
  BoundingBox box;
  Category category = Category::person;
  MotionAttribute motion;
};

/// H x W x D accumulator of Gaussian-weighted attribute evidence.
class ActivityHeatmap {
 public:
  ActivityHeatmap(int height, int width, KernelPolicy kernel = KernelPolicy::adaptive_sigma());

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return AttributeLayout::channels; }
  const KernelPolicy& kernel() const { return kernel_; }

  /// Adds exp(-r^2 / 2 sigma^2) around the box centre to every in-box pixel
  /// of the observation's active channels.
  void accumulate(const HeatmapObservation& obs);

  double at(int x, int y, int channel) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * AttributeLayout::channels + channel];
  }
  std::span<const double> pixel(int x, int y) const {
    return {data_.data() + (static_cast<std::size_t>(y) * width_ + x) * AttributeLayout::channels,
            static_cast<std::size_t>(AttributeLayout::channels)};
  }
  const std::vector<double>& data() const { return data_; }

 private:
  int height_;
  int width_;
  KernelPolicy kernel_;
  std::vector<double> data_;
};

/// Active channels touched by an observation (category plus either the
/// stationary channel or direction + log-speed channels).
std::vector<int> active_channels(const HeatmapObservation& obs);

struct PixelFeatures {
  std::vector<int> pixels;  // linear index y * W + x of each active pixel
  Matrix features;          // one L1-normalised row per active pixel
  bool empty() const { return pixels.empty(); }
};

/// Pixels whose channel sum reaches `min_mass`, with L1-normalised vectors.
PixelFeatures pixel_features(const ActivityHeatmap& heatmap, double min_mass = 1e-3);

}  // namespace regionvad
