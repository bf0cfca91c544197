#include "regionvad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace regionvad {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

std::optional<double> frame_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("frame_auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0) ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double detection_curve_area(std::span<const CurvePoint> curve, bool hold_to_full_range) {
  if (curve.empty()) return 0.0;
  double area = 0.0;
  double prev_f = curve.front().fpr;
  double prev_d = curve.front().detection_rate;
  if (prev_f >= 1.0) return 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double f = curve[i].fpr;
    const double d = curve[i].detection_rate;
    if (f > 1.0) {
      const double d_at_one = prev_d + (d - prev_d) * (1.0 - prev_f) / (f - prev_f);
      area += 0.5 * (prev_d + d_at_one) * (1.0 - prev_f);
      return area;
    }
    area += 0.5 * (prev_d + d) * (f - prev_f);
    prev_f = f;
    prev_d = d;
  }
  if (hold_to_full_range && prev_f < 1.0) area += prev_d * (1.0 - prev_f);
  return area;
}

namespace {

using FrameKey = std::pair<std::string, std::int64_t>;

struct Matching {
  std::vector<std::vector<std::size_t>> matches;  // GT indices per prediction
  std::vector<std::size_t> order;                 // predictions by descending score
};

Matching match_predictions(std::span<const Prediction> predictions,
                           std::span<const GroundTruthRegion> ground_truth, double iou_threshold) {
  std::map<FrameKey, std::vector<std::size_t>> gt_by_frame;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    gt_by_frame[{ground_truth[g].video_id, ground_truth[g].frame}].push_back(g);
  }
  Matching m;
  m.matches.resize(predictions.size());
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    if (!std::isfinite(predictions[p].score)) {
      throw std::invalid_argument("detection criteria: non-finite prediction score");
    }
    const auto it = gt_by_frame.find({predictions[p].video_id, predictions[p].frame});
    if (it == gt_by_frame.end()) continue;
    for (std::size_t g : it->second) {
      if (iou(predictions[p].box, ground_truth[g].box) >= iou_threshold) m.matches[p].push_back(g);
    }
  }
  m.order.resize(predictions.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::stable_sort(m.order.begin(), m.order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });
  return m;
}

// Shared threshold sweep. `track_of` maps each GT region to a track slot, or
// is empty for the region-based criterion.
DetectionResult sweep(std::span<const Prediction> predictions,
                      std::span<const GroundTruthRegion> ground_truth, std::int64_t total_frames,
                      const DetectionOptions& options, bool by_track) {
  if (total_frames <= 0) throw std::invalid_argument("detection criteria: total_frames must be > 0");
  const Matching m = match_predictions(predictions, ground_truth, options.iou_threshold);

  std::vector<std::size_t> track_of(ground_truth.size(), 0);
  std::vector<std::size_t> track_len;
  if (by_track) {
    std::map<std::pair<std::string, std::int64_t>, std::size_t> slots;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const auto key = std::make_pair(ground_truth[g].video_id, ground_truth[g].track_id);
      auto [it, inserted] = slots.emplace(key, slots.size());
      if (inserted) track_len.push_back(0);
      track_of[g] = it->second;
      ++track_len[it->second];
    }
  }
  std::vector<std::size_t> track_hits(track_len.size(), 0);
  std::vector<bool> detected(ground_truth.size(), false);
  std::size_t regions_detected = 0;
  std::size_t tracks_detected = 0;
  std::size_t false_positives = 0;
  const double denom = by_track ? static_cast<double>(track_len.size())
                                : static_cast<double>(ground_truth.size());
  const double frames = static_cast<double>(total_frames);

  DetectionResult result;
  result.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t i = 0;
  while (i < m.order.size()) {
    const double threshold = predictions[m.order[i]].score;
    while (i < m.order.size() && predictions[m.order[i]].score == threshold) {
      const std::size_t p = m.order[i];
      if (m.matches[p].empty()) ++false_positives;
      for (std::size_t g : m.matches[p]) {
        if (detected[g]) continue;
        detected[g] = true;
        ++regions_detected;
        if (by_track) {
          const std::size_t t = track_of[g];
          const bool was = static_cast<double>(track_hits[t]) / static_cast<double>(track_len[t]) >=
                           options.track_fraction;
          ++track_hits[t];
          const bool now = static_cast<double>(track_hits[t]) / static_cast<double>(track_len[t]) >=
                           options.track_fraction;
          if (now && !was) ++tracks_detected;
        }
      }
      ++i;
    }
    const double hits = by_track ? static_cast<double>(tracks_detected)
                                 : static_cast<double>(regions_detected);
    result.curve.push_back({threshold, static_cast<double>(false_positives) / frames, hits / denom});
  }
  result.area = detection_curve_area(result.curve, options.hold_to_full_range);
  return result;
}

}  // namespace

std::optional<DetectionResult> rbdc(std::span<const Prediction> predictions,
                                    std::span<const GroundTruthRegion> ground_truth,
                                    std::int64_t total_frames, const DetectionOptions& options) {
  if (ground_truth.empty()) return std::nullopt;
  return sweep(predictions, ground_truth, total_frames, options, false);
}

std::optional<DetectionResult> tbdc(std::span<const Prediction> predictions,
                                    std::span<const GroundTruthRegion> ground_truth,
                                    std::int64_t total_frames, const DetectionOptions& options) {
  if (ground_truth.empty()) return std::nullopt;
  return sweep(predictions, ground_truth, total_frames, options, true);
}

}  // namespace regionvad
