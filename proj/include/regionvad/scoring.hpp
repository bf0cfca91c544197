#pragma once

#include "regionvad/normalcy.hpp"
#include "regionvad/regions.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace regionvad {

struct TrackletScore {
  std::string video_id;
  std::int64_t track_id = 0;
  std::int64_t start_frame = 0;
  std::vector<BoundingBox> boxes;  // per frame from start_frame
  int region = 0;
  double nll = 0.0;

  std::int64_t end_frame() const { return start_frame + static_cast<std::int64_t>(boxes.size()); }
};

/// Negative log-likelihood of the tracklet feature under its region's model.
TrackletScore score_tracklet(const RegionalModelSet& models, const RegionMap& map,
                             const Tracklet& tracklet);

struct FrameScoreSeries {
  std::string video_id;
  std::vector<double> scores;
  double floor = 0.0;  // value given to frames no tracklet covers
  double sigma = 0.0;  // smoothing applied so far
};

/// Per-frame maximum NLL over covering tracklets. Uncovered frames get the
/// minimum NLL seen in the video, or `empty_value` when there are no scores.
FrameScoreSeries frame_scores(std::span<const TrackletScore> scores, std::int64_t video_length,
                              double empty_value = 0.0, const std::string& video_id = {});

/// Normalised Gaussian kernel with radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Gaussian smoothing with symmetric (edge-repeating) reflection at the
/// borders. sigma = 0 returns the input.
std::vector<double> gaussian_smooth(std::span<const double> values, double sigma);

FrameScoreSeries smooth(const FrameScoreSeries& series, double sigma = 7.0);

}  // namespace regionvad
