#pragma once

#include "regionvad/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace regionvad {

/// Intersection over union with half-open pixel extents; 0 for degenerate boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Rank-based ROC area with average ranks for ties. labels: 1 = anomalous,
/// 0 = normal. nullopt when only one label value is present.
std::optional<double> frame_auc(std::span<const double> scores, std::span<const int> labels);

struct GroundTruthRegion {
  std::string video_id;
  std::int64_t frame = 0;
  BoundingBox box;
  std::int64_t track_id = 0;
};

struct Prediction {
  std::string video_id;
  std::int64_t frame = 0;
  BoundingBox box;
  double score = 0.0;
};

struct CurvePoint {
  double threshold = 0.0;  // +infinity for the empty-prediction point
  double fpr = 0.0;        // false-positive boxes per frame
  double detection_rate = 0.0;
};

struct DetectionOptions {
  double iou_threshold = 0.1;
  double track_fraction = 0.1;
  // Hold the last detection rate out to FPR = 1 when the sweep stops short.
  bool hold_to_full_range = true;
};

struct DetectionResult {
  double area = 0.0;
  std::vector<CurvePoint> curve;
};

/// Trapezoidal area of a detection curve over FPR in [0, 1]. Segments
/// crossing FPR = 1 are clipped by linear interpolation.
double detection_curve_area(std::span<const CurvePoint> curve, bool hold_to_full_range);

/// Region-based detection criterion. nullopt when the ground truth is empty.
std::optional<DetectionResult> rbdc(std::span<const Prediction> predictions,
                                    std::span<const GroundTruthRegion> ground_truth,
                                    std::int64_t total_frames, const DetectionOptions& options = {});

/// Track-based detection criterion: a track counts once the fraction of its
/// regions detected reaches options.track_fraction.
std::optional<DetectionResult> tbdc(std::span<const Prediction> predictions,
                                    std::span<const GroundTruthRegion> ground_truth,
                                    std::int64_t total_frames, const DetectionOptions& options = {});

}  // namespace regionvad
