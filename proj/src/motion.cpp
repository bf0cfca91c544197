#include "regionvad/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace regionvad {

FlowField::FlowField(int width, int height)
    : width_(width),
      height_(height),
      u_(static_cast<std::size_t>(std::max(0, width)) * static_cast<std::size_t>(std::max(0, height)), 0.0f),
      v_(u_.size(), 0.0f) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("FlowField: dimensions must be > 0");
}

FlowField::FlowField(int width, int height, std::vector<float> u, std::vector<float> v)
    : width_(width), height_(height), u_(std::move(u)), v_(std::move(v)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("FlowField: dimensions must be > 0");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (u_.size() != n || v_.size() != n) throw std::invalid_argument("FlowField: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) {
      throw std::invalid_argument("FlowField: non-finite flow value");
    }
  }
}

void FlowField::fill(const BoundingBox& box, float u, float v) {
  const PixelSpan xs = pixel_span(box.x1, box.x2, width_);
  const PixelSpan ys = pixel_span(box.y1, box.y2, height_);
  for (int y = ys.begin; y < ys.end; ++y) {
    for (int x = xs.begin; x < xs.end; ++x) set(x, y, u, v);
  }
}

void FlowHistogram::merge(const FlowHistogram& other) {
  for (int b = 0; b < kOrientationBins; ++b) {
    bins[b].pixel_count += other.bins[b].pixel_count;
    bins[b].speed_sum += other.bins[b].speed_sum;
  }
  background_count += other.background_count;
  total_pixels += other.total_pixels;
}

FlowHistogram hof(const FlowField& flow, const BoundingBox& box, double mag_threshold) {
  if (!(mag_threshold > 0.0)) throw std::invalid_argument("hof: mag_threshold must be > 0");
  const PixelSpan xs = pixel_span(box.x1, box.x2, flow.width());
  const PixelSpan ys = pixel_span(box.y1, box.y2, flow.height());
  if (xs.empty() || ys.empty()) throw std::invalid_argument("hof: box does not intersect the raster");
  FlowHistogram h;
  for (int y = ys.begin; y < ys.end; ++y) {
    for (int x = xs.begin; x < xs.end; ++x) {
      const double u = flow.u(x, y);
      const double v = flow.v(x, y);
      const double mag = std::sqrt(u * u + v * v);
      ++h.total_pixels;
      if (mag < mag_threshold) {
        ++h.background_count;
        continue;
      }
      const int bin = orientation_bin(std::atan2(v, u));
      ++h.bins[bin].pixel_count;
      h.bins[bin].speed_sum += mag;
    }
  }
  return h;
}

FlowHistogram hof_window(std::span<const FlowWindowEntry> entries, double mag_threshold) {
  if (entries.empty()) throw std::invalid_argument("hof_window: no entries");
  FlowHistogram total;
  for (const FlowWindowEntry& e : entries) {
    if (e.flow == nullptr) throw std::invalid_argument("hof_window: missing flow raster");
    total.merge(hof(*e.flow, e.box, mag_threshold));
  }
  return total;
}

MotionAttribute dominant_motion(const FlowHistogram& hist, double stationary_ratio) {
  int best = -1;
  std::int64_t best_count = 0;
  for (int b = 0; b < kOrientationBins; ++b) {
    if (hist.bins[b].pixel_count > best_count) {
      best_count = hist.bins[b].pixel_count;
      best = b;
    }
  }
  if (best < 0 || hist.background_ratio() >= stationary_ratio) return MotionAttribute::still();
  return MotionAttribute{orientation_bin_center(best), hist.bins[best].mean_speed(), false};
}

int quantize_log_speed(double speed, double base) {
  if (!(base > 0.0)) throw std::invalid_argument("quantize_log_speed: base must be > 0");
  if (!(speed >= base)) {
    throw std::invalid_argument("quantize_log_speed: speed below the stationary threshold");
  }
  if (speed < 2.0 * base) return 0;
  if (speed < 4.0 * base) return 1;
  if (speed < 8.0 * base) return 2;
  return 3;
}

}  // namespace regionvad
