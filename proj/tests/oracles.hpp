#pragma once

// Straightforward reference computations used to check the library against
// values obtained by a different route.

#include "regionvad/evaluation.hpp"
#include "regionvad/gmm.hpp"
#include "regionvad/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace oracle {

using regionvad::BoundingBox;
using regionvad::Matrix;
using regionvad::Vector;

/// Mixture log-density via explicit inverse and determinant.
inline double mixture_log_pdf(const regionvad::GaussianMixture& m, const Vector& x) {
  double total = 0.0;
  for (int i = 0; i < m.num_components(); ++i) {
    const Matrix& c = m.covariance(i);
    const Vector d = x - m.mean(i);
    const double q = d.dot(c.inverse() * d);
    const double dens = std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * M_PI, x.size()) * c.determinant());
    total += m.weight(i) * dens;
  }
  return std::log(total);
}

/// Area of the half-open pixel intersection over the union.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a.area() <= 0.0 || b.area() <= 0.0) return 0.0;
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

/// AUC by counting every (anomalous, normal) pair; ties count one half.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct NaivePoint {
  double fpr;
  double rate;
};

/// Detection curve recomputed from scratch at every threshold: +inf first,
/// then every distinct prediction score in descending order.
inline std::vector<NaivePoint> naive_curve(const std::vector<regionvad::Prediction>& preds,
                                           const std::vector<regionvad::GroundTruthRegion>& gt,
                                           long total_frames, bool track_based, double iou_threshold = 0.1,
                                           double track_fraction = 0.1) {
  std::set<double> distinct;
  for (const auto& p : preds) distinct.insert(p.score);
  std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
  for (auto it = distinct.rbegin(); it != distinct.rend(); ++it) thresholds.push_back(*it);
  std::vector<NaivePoint> out;
  for (double t : thresholds) {
    std::vector<bool> detected(gt.size(), false);
    double fp = 0.0;
    for (const auto& p : preds) {
      if (!(p.score >= t)) continue;
      bool matched = false;
      for (std::size_t g = 0; g < gt.size(); ++g) {
        if (gt[g].video_id == p.video_id && gt[g].frame == p.frame && oracle::iou(gt[g].box, p.box) >= iou_threshold) {
          detected[g] = true;
          matched = true;
        }
      }
      if (!matched) fp += 1.0;
    }
    double rate = 0.0;
    if (!track_based) {
      rate = static_cast<double>(std::count(detected.begin(), detected.end(), true)) / gt.size();
    } else {
      std::map<std::pair<std::string, long>, std::pair<int, int>> tracks;  // hits, length
      for (std::size_t g = 0; g < gt.size(); ++g) {
        auto& e = tracks[{gt[g].video_id, gt[g].track_id}];
        e.second += 1;
        if (detected[g]) e.first += 1;
      }
      int hit = 0;
      for (const auto& [key, e] : tracks) {
        if (static_cast<double>(e.first) / e.second >= track_fraction) ++hit;
      }
      rate = static_cast<double>(hit) / tracks.size();
    }
    out.push_back({fp / static_cast<double>(total_frames), rate});
  }
  return out;
}

/// Trapezoid area over FPR in [0, 1], clipping at 1 and holding the last
/// rate to 1.
inline double naive_area(const std::vector<NaivePoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const NaivePoint a = pts[i - 1];
    NaivePoint b = pts[i];
    if (a.fpr >= 1.0) return area;
    if (b.fpr > 1.0) {
      const double t = (1.0 - a.fpr) / (b.fpr - a.fpr);
      b = {1.0, a.rate + t * (b.rate - a.rate)};
      area += 0.5 * (a.rate + b.rate) * (b.fpr - a.fpr);
      return area;
    }
    area += 0.5 * (a.rate + b.rate) * (b.fpr - a.fpr);
  }
  const NaivePoint last = pts.back();
  if (last.fpr < 1.0) area += last.rate * (1.0 - last.fpr);
  return area;
}

/// Fraction of pixels on which two label fields agree after the best
/// one-to-one relabelling of `a` (exhaustive over permutations).
inline double permutation_agreement(const std::vector<int>& a, int ka, const std::vector<int>& b, int kb) {
  const int k = std::max(ka, kb);
  std::vector<std::vector<long>> confusion(k, std::vector<long>(k, 0));
  for (std::size_t i = 0; i < a.size(); ++i) ++confusion[a[i]][b[i]];
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  long best = 0;
  do {
    long hit = 0;
    for (int i = 0; i < k; ++i) hit += confusion[i][perm[i]];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(a.size());
}

}  // namespace oracle
