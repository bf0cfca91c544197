#include <doctest.h>

#include "oracles.hpp"
#include "regionvad/evaluation.hpp"
#include "regionvad/rng.hpp"

#include <cmath>

using namespace regionvad;

namespace {

struct Instance {
  std::vector<Prediction> predictions;
  std::vector<GroundTruthRegion> ground_truth;
  long frames = 5;
};

BoundingBox random_box(Rng& rng) {
  const double x = static_cast<double>(rng.below(12));
  const double y = static_cast<double>(rng.below(12));
  return {x, y, x + 2.0 + static_cast<double>(rng.below(6)), y + 2.0 + static_cast<double>(rng.below(6))};
}

// Small random instance over 5 frames: a few GT tracks, predictions that
// either jitter a GT box or land anywhere, scores drawn from a coarse set so
// ties occur.
Instance random_instance(Rng& rng) {
  Instance inst;
  const int tracks = 1 + static_cast<int>(rng.below(3));
  for (int t = 0; t < tracks; ++t) {
    const long first = static_cast<long>(rng.below(5));
    const long len = 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(5 - first)));
    const BoundingBox base = random_box(rng);
    for (long f = first; f < first + len; ++f) inst.ground_truth.push_back({"v", f, base, t});
  }
  const int n_pred = static_cast<int>(rng.below(12));
  for (int i = 0; i < n_pred; ++i) {
    Prediction p;
    p.video_id = "v";
    p.frame = static_cast<long>(rng.below(5));
    if (rng.uniform() < 0.5 && !inst.ground_truth.empty()) {
      const GroundTruthRegion& g = inst.ground_truth[rng.below(inst.ground_truth.size())];
      p.frame = g.frame;
      const double dx = static_cast<double>(rng.below(5)) - 2.0;
      p.box = {g.box.x1 + dx, g.box.y1, g.box.x2 + dx, g.box.y2};
    } else {
      p.box = random_box(rng);
    }
    p.score = static_cast<double>(rng.below(6)) / 2.0;
    inst.predictions.push_back(p);
  }
  return inst;
}

}  // namespace

TEST_CASE("iou") {
  const BoundingBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou(a, {10, 0, 20, 10}) == 0.0);  // touching half-open boxes
  CHECK(iou(a, {3, 3, 3, 8}) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox b = random_box(rng);
    const BoundingBox c = random_box(rng);
    CHECK(iou(b, c) == doctest::Approx(oracle::iou(b, c)).epsilon(1e-14));
    CHECK(iou(b, c) == iou(c, b));
  }
}

TEST_CASE("frame AUC") {
  CHECK(frame_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}).value() == 1.0);
  CHECK(frame_auc(std::vector<double>{3, 3, 3, 3}, std::vector<int>{0, 1, 0, 1}).value() == 0.5);
  CHECK(frame_auc(std::vector<double>{0.1, 0.9, 0.5, 0.7}, std::vector<int>{0, 1, 0, 1}).value() == 1.0);
  CHECK_FALSE(frame_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}).has_value());
  CHECK_THROWS_AS(frame_auc(std::vector<double>{1, 2}, std::vector<int>{1}), std::invalid_argument);

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 == 0 ? rng.normal() : static_cast<double>(rng.below(4));
      l[i] = static_cast<int>(rng.below(2));
    }
    l[0] = 0;
    l[1] = 1;
    const double auc = frame_auc(s, l).value();
    CHECK(auc == doctest::Approx(oracle::pair_count_auc(s, l)).epsilon(1e-12));
    if (trial % 2 == 0) {
      std::vector<double> neg(n);
      for (std::size_t i = 0; i < n; ++i) neg[i] = -s[i];
      CHECK(auc + frame_auc(neg, l).value() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("rbdc examples") {
  const std::vector<GroundTruthRegion> gt{{"v", 0, {0, 0, 10, 10}, 0}, {"v", 1, {0, 0, 10, 10}, 0}};
  SUBCASE("exact predictions with the top score") {
    const std::vector<Prediction> p{{"v", 0, {0, 0, 10, 10}, 1.0}, {"v", 1, {0, 0, 10, 10}, 1.0}};
    CHECK(rbdc(p, gt, 2)->area == 1.0);
    CHECK(tbdc(p, gt, 2)->area == 1.0);
  }
  SUBCASE("no predictions") {
    CHECK(rbdc({}, gt, 2)->area == 0.0);
    CHECK(tbdc({}, gt, 2)->area == 0.0);
  }
  SUBCASE("hand sweep with a held tail") {
    const std::vector<GroundTruthRegion> one{{"v", 0, {0, 0, 10, 10}, 0}};
    // IoU of [0,0,10,10] and [0,0,10,2] is 0.2
    const std::vector<Prediction> p{{"v", 0, {0, 0, 10, 2}, 0.9}, {"v", 1, {50, 50, 60, 60}, 0.5}};
    const DetectionResult r = *rbdc(p, one, 2);
    REQUIRE(r.curve.size() == 3);
    CHECK(r.curve[1].fpr == 0.0);
    CHECK(r.curve[1].detection_rate == 1.0);
    CHECK(r.curve[2].fpr == 0.5);
    CHECK(r.curve[2].detection_rate == 1.0);
    CHECK(r.area == 1.0);
  }
  SUBCASE("empty ground truth is undefined") {
    CHECK_FALSE(rbdc({}, {}, 2).has_value());
    CHECK_FALSE(tbdc({}, {}, 2).has_value());
  }
}

TEST_CASE("tbdc counts a track at exactly the detected fraction") {
  std::vector<GroundTruthRegion> gt;
  for (long f = 0; f < 10; ++f) gt.push_back({"v", f, {0, 0, 10, 10}, 7});
  const std::vector<Prediction> p{{"v", 4, {0, 0, 10, 10}, 1.0}};
  CHECK(tbdc(p, gt, 10)->area == 1.0);
  CHECK(rbdc(p, gt, 10)->area == doctest::Approx(0.1).epsilon(1e-15));
  DetectionOptions stricter;
  stricter.track_fraction = 0.2;
  CHECK(tbdc(p, gt, 10, stricter)->area == 0.0);
}

TEST_CASE("curve area clips at FPR 1 and holds the tail") {
  const std::vector<CurvePoint> c{{INFINITY, 0.0, 0.0}, {2.0, 0.5, 0.5}, {1.0, 1.5, 1.0}};
  // segment (0.5, 0.5) -> (1.5, 1.0) clipped at FPR 1: rate 0.75
  CHECK(detection_curve_area(c, true) == doctest::Approx(0.5 * 0.5 * 0.5 + 0.5 * (0.5 + 0.75) * 0.5).epsilon(1e-15));
  const std::vector<CurvePoint> short_curve{{INFINITY, 0.0, 0.0}, {1.0, 0.0, 0.6}, {0.5, 0.2, 0.8}};
  CHECK(detection_curve_area(short_curve, true) == doctest::Approx(0.2 * 0.7 + 0.8 * 0.8).epsilon(1e-15));
  CHECK(detection_curve_area(short_curve, false) == doctest::Approx(0.2 * 0.7).epsilon(1e-15));
}

TEST_CASE("optimised sweeps equal the brute-force oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance inst = random_instance(rng);
    for (const bool track_based : {false, true}) {
      const DetectionResult r = track_based ? *tbdc(inst.predictions, inst.ground_truth, inst.frames)
                                            : *rbdc(inst.predictions, inst.ground_truth, inst.frames);
      const auto naive = oracle::naive_curve(inst.predictions, inst.ground_truth, inst.frames, track_based);
      REQUIRE(r.curve.size() == naive.size());
      for (std::size_t i = 0; i < naive.size(); ++i) {
        CHECK(r.curve[i].fpr == naive[i].fpr);
        CHECK(r.curve[i].detection_rate == naive[i].rate);
      }
      CHECK(r.area == oracle::naive_area(naive));
    }
  }
}

TEST_CASE("detection criteria are invariant under monotone score transforms") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst = random_instance(rng);
    const double a = rbdc(inst.predictions, inst.ground_truth, inst.frames)->area;
    const double b = tbdc(inst.predictions, inst.ground_truth, inst.frames)->area;
    for (Prediction& p : inst.predictions) p.score = std::exp(3.0 * p.score) - 7.0;
    CHECK(rbdc(inst.predictions, inst.ground_truth, inst.frames)->area == a);
    CHECK(tbdc(inst.predictions, inst.ground_truth, inst.frames)->area == b);
  }
}

TEST_CASE("false positives never help and true matches never hurt") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = random_instance(rng);
    const double r0 = rbdc(inst.predictions, inst.ground_truth, inst.frames)->area;
    const double t0 = tbdc(inst.predictions, inst.ground_truth, inst.frames)->area;

    Instance with_fp = inst;
    with_fp.predictions.push_back({"v", static_cast<long>(rng.below(5)), {100, 100, 104, 104}, rng.uniform() * 3.0});
    CHECK(rbdc(with_fp.predictions, with_fp.ground_truth, with_fp.frames)->area <= r0 + 1e-15);
    CHECK(tbdc(with_fp.predictions, with_fp.ground_truth, with_fp.frames)->area <= t0 + 1e-15);

    Instance with_tp = inst;
    const GroundTruthRegion& g = inst.ground_truth[rng.below(inst.ground_truth.size())];
    with_tp.predictions.push_back({"v", g.frame, g.box, rng.uniform() * 3.0});
    CHECK(rbdc(with_tp.predictions, with_tp.ground_truth, with_tp.frames)->area >= r0 - 1e-15);
    CHECK(tbdc(with_tp.predictions, with_tp.ground_truth, with_tp.frames)->area >= t0 - 1e-15);
  }
}
