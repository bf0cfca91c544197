#include "regionvad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regionvad {

TrackletScore score_tracklet(const RegionalModelSet& models, const RegionMap& map,
                             const Tracklet& tracklet) {
  TrackletScore s;
  s.video_id = tracklet.video_id;
  s.track_id = tracklet.track_id;
  s.start_frame = tracklet.start_frame;
  s.boxes = tracklet.boxes;
  s.region = assign_region(tracklet, map);
  if (s.region >= models.num_regions()) {
    throw std::logic_error("score_tracklet: region " + std::to_string(s.region) +
                           " has no model");
  }
  s.nll = models.nll(s.region, tracklet.feature.to_vector(models.encoding()));
  if (!std::isfinite(s.nll)) throw std::runtime_error("score_tracklet: non-finite NLL");
  return s;
}

FrameScoreSeries frame_scores(std::span<const TrackletScore> scores, std::int64_t video_length,
                              double empty_value, const std::string& video_id) {
  if (video_length < 0) throw std::invalid_argument("frame_scores: negative video length");
  FrameScoreSeries out;
  out.video_id = video_id.empty() && !scores.empty() ? scores.front().video_id : video_id;
  const double lowest = -std::numeric_limits<double>::infinity();
  std::vector<double> best(static_cast<std::size_t>(video_length), lowest);
  double min_nll = std::numeric_limits<double>::infinity();
  for (const TrackletScore& s : scores) {
    min_nll = std::min(min_nll, s.nll);
    const std::int64_t lo = std::max<std::int64_t>(0, s.start_frame);
    const std::int64_t hi = std::min(video_length, s.end_frame());
    for (std::int64_t f = lo; f < hi; ++f) {
      best[static_cast<std::size_t>(f)] = std::max(best[static_cast<std::size_t>(f)], s.nll);
    }
  }
  out.floor = scores.empty() ? empty_value : min_nll;
  for (double& v : best) {
    if (v == lowest) v = out.floor;
  }
  out.scores = std::move(best);
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

namespace {

// Index into [0, n) under symmetric reflection: ... c b a | a b c ... (repeats
// for offsets longer than the series).
std::size_t reflect_index(std::int64_t i, std::int64_t n) {
  const std::int64_t period = 2 * n;
  std::int64_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

}  // namespace

std::vector<double> gaussian_smooth(std::span<const double> values, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("smooth: sigma must be >= 0");
  std::vector<double> out(values.begin(), values.end());
  if (sigma == 0.0 || values.empty()) return out;
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<std::int64_t>(kernel.size() / 2);
  const auto n = static_cast<std::int64_t>(values.size());
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t j = -radius; j <= radius; ++j) {
      acc += kernel[static_cast<std::size_t>(j + radius)] * values[reflect_index(i + j, n)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

FrameScoreSeries smooth(const FrameScoreSeries& series, double sigma) {
  FrameScoreSeries out = series;
  out.scores = gaussian_smooth(series.scores, sigma);
  out.sigma = sigma;
  return out;
}

}  // namespace regionvad
