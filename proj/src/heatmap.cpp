#include "regionvad/heatmap.hpp"

#include <cmath>
#include <stdexcept>

namespace regionvad {

nlohmann::json AttributeLayout::to_json() {
  return {{"channels", channels},
          {"category", {category_offset, category_count}},
          {"direction", {direction_offset, direction_count}},
          {"log_speed", {speed_offset, speed_count}},
          {"stationary", {stationary_offset, 1}}};
}

double KernelPolicy::sigma_for(const BoundingBox& box) const {
  if (!adaptive) return sigma;
  return std::max(box.width(), box.height()) / 4.0;
}

ActivityHeatmap::ActivityHeatmap(int height, int width, KernelPolicy kernel)
    : height_(height), width_(width), kernel_(kernel) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("ActivityHeatmap: empty frame");
  if (!kernel_.adaptive && !(kernel_.sigma > 0.0)) {
    throw std::invalid_argument("ActivityHeatmap: fixed sigma must be > 0");
  }
  data_.assign(static_cast<std::size_t>(height) * width * AttributeLayout::channels, 0.0);
}

std::vector<int> active_channels(const HeatmapObservation& obs) {
  if (!is_valid_category(obs.category)) {
    throw std::invalid_argument("heatmap: unknown category");
  }
  std::vector<int> channels{AttributeLayout::category_offset + static_cast<int>(obs.category)};
  if (obs.motion.stationary) {
    channels.push_back(AttributeLayout::stationary_offset);
  } else {
    channels.push_back(AttributeLayout::direction_offset + obs.motion.orientation_bin());
    channels.push_back(AttributeLayout::speed_offset + quantize_log_speed(obs.motion.speed));
  }
  return channels;
}

void ActivityHeatmap::accumulate(const HeatmapObservation& obs) {
  const std::vector<int> channels = active_channels(obs);
  const double xc = obs.box.center_x();
  const double yc = obs.box.center_y();
  if (!(xc >= 0.0 && xc < width_ && yc >= 0.0 && yc < height_)) {
    throw std::invalid_argument("heatmap: observation centre outside the frame");
  }
  const double sigma = kernel_.sigma_for(obs.box);
  if (!(sigma > 0.0)) throw std::invalid_argument("heatmap: kernel sigma must be > 0");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const PixelSpan xs = pixel_span(obs.box.x1, obs.box.x2, width_);
  const PixelSpan ys = pixel_span(obs.box.y1, obs.box.y2, height_);
  for (int y = ys.begin; y < ys.end; ++y) {
    const double dy = y - yc;
    for (int x = xs.begin; x < xs.end; ++x) {
      const double dx = x - xc;
      const double g = std::exp(-(dx * dx + dy * dy) * inv);
      double* px = data_.data() + (static_cast<std::size_t>(y) * width_ + x) * AttributeLayout::channels;
      for (int c : channels) px[c] += g;
    }
  }
}

PixelFeatures pixel_features(const ActivityHeatmap& heatmap, double min_mass) {
  PixelFeatures out;
  const int d = heatmap.channels();
  std::vector<double> rows;
  for (int y = 0; y < heatmap.height(); ++y) {
    for (int x = 0; x < heatmap.width(); ++x) {
      const auto px = heatmap.pixel(x, y);
      double sum = 0.0;
      for (double v : px) sum += v;
      if (!(sum >= min_mass) || sum <= 0.0) continue;
      out.pixels.push_back(y * heatmap.width() + x);
      for (double v : px) rows.push_back(v / sum);
    }
  }
  out.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      rows.data(), static_cast<Eigen::Index>(out.pixels.size()), d);
  return out;
}

}  // namespace regionvad
