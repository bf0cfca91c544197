#pragma once

#include "regionvad/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace regionvad {

inline constexpr double kDefaultMagnitudeThreshold = 1.5;
inline constexpr double kDefaultStationaryRatio = 0.9;
inline constexpr int kLogSpeedBins = 4;

/// Dense flow raster, (u, v) in pixels/frame, row-major.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);
  FlowField(int width, int height, std::vector<float> u, std::vector<float> v);

  int width() const { return width_; }
  int height() const { return height_; }
  float u(int x, int y) const { return u_[index(x, y)]; }
  float v(int x, int y) const { return v_[index(x, y)]; }
  void set(int x, int y, float u, float v) {
    u_[index(x, y)] = u;
    v_[index(x, y)] = v;
  }
  /// Fills every in-box pixel with (u, v).
  void fill(const BoundingBox& box, float u, float v);

  const std::vector<float>& u_data() const { return u_; }
  const std::vector<float>& v_data() const { return v_; }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<float> u_;
  std::vector<float> v_;
};

struct OrientationBin {
  std::int64_t pixel_count = 0;
  double speed_sum = 0.0;
  double mean_speed() const {
    return pixel_count > 0 ? speed_sum / static_cast<double>(pixel_count) : 0.0;
  }
};

/// 12 orientation bins plus a background bin for sub-threshold pixels.
struct FlowHistogram {
  std::array<OrientationBin, kOrientationBins> bins{};
  std::int64_t background_count = 0;
  std::int64_t total_pixels = 0;

  double background_ratio() const {
    return total_pixels > 0
               ? static_cast<double>(background_count) / static_cast<double>(total_pixels)
               : 1.0;
  }
  void merge(const FlowHistogram& other);
};

struct MotionAttribute {
  double orientation = 0.0;  // bin centre, radians in [0, 2pi)
  double speed = 0.0;        // pixels/frame
  bool stationary = true;

  static MotionAttribute still() { return {}; }
  int orientation_bin() const { return regionvad::orientation_bin(orientation); }
  friend bool operator==(const MotionAttribute&, const MotionAttribute&) = default;
};

/// Histogram of flow over the pixels of `box`. Throws std::invalid_argument if
/// the box does not intersect the raster.
FlowHistogram hof(const FlowField& flow, const BoundingBox& box,
                  double mag_threshold = kDefaultMagnitudeThreshold);

struct FlowWindowEntry {
  const FlowField* flow;
  BoundingBox box;
};

/// Single histogram over the union of per-frame boxes of a tracklet window.
FlowHistogram hof_window(std::span<const FlowWindowEntry> entries,
                         double mag_threshold = kDefaultMagnitudeThreshold);

/// Dominant orientation bin (by pixel count, ties to the smaller bin) and its
/// mean speed; stationary when the background ratio reaches
/// `stationary_ratio` or every orientation bin is empty.
MotionAttribute dominant_motion(const FlowHistogram& hist,
                                double stationary_ratio = kDefaultStationaryRatio);

/// Log-scale speed bin with edges base*2^j: [b,2b), [2b,4b), [4b,8b), [8b,inf).
/// Speeds below `base` are stationary and rejected.
int quantize_log_speed(double speed, double base = kDefaultMagnitudeThreshold);

}  // namespace regionvad
