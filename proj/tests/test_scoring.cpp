#include <doctest.h>

#include "regionvad/io.hpp"
#include "regionvad/rng.hpp"
#include "regionvad/scoring.hpp"
#include "regionvad/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace regionvad;

namespace {

RegionalModelSet identity_models(std::vector<Vector> means) {
  std::vector<RegionModel> regions;
  for (std::size_t i = 0; i < means.size(); ++i) {
    regions.push_back({static_cast<int>(i), ModelTier::mixture, 100,
                       GaussianMixture(CovarianceMode::full, {1.0}, {means[i]}, {Matrix::Identity(6, 6)})});
  }
  return RegionalModelSet(std::move(regions), std::nullopt, OrientationEncoding::radians);
}

Tracklet make_tracklet(std::int64_t start, int length, ObjectFeature f, double x = 1.0) {
  Tracklet t;
  t.video_id = "v";
  t.start_frame = start;
  for (int i = 0; i < length; ++i) t.boxes.push_back({x, 1.0, x + 2.0, 3.0});
  t.feature = f;
  return t;
}

TrackletScore scored(std::int64_t start, int length, double nll) {
  TrackletScore s;
  s.video_id = "v";
  s.start_frame = start;
  s.boxes.assign(static_cast<std::size_t>(length), BoundingBox{0, 0, 1, 1});
  s.nll = nll;
  return s;
}

}  // namespace

TEST_CASE("tracklet NLL under a unit Gaussian") {
  const ObjectFeature f{Category::car, {orientation_bin_center(2), 3.0, false}};
  const Vector mean = f.to_vector();
  const RegionMap map(4, 8, std::vector<int>(32, 0));
  const RegionalModelSet set = identity_models({mean});
  const TrackletScore s = score_tracklet(set, map, make_tracklet(0, 3, f));
  CHECK(s.nll == doctest::Approx(3.0 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(s.nll == doctest::Approx(5.5135).epsilon(1e-4));
  CHECK(s.boxes.size() == 3);
  // 10 sigma along the speed axis
  const ObjectFeature far{Category::car, {orientation_bin_center(2), 13.0, false}};
  CHECK(score_tracklet(set, map, make_tracklet(0, 3, far)).nll ==
        doctest::Approx(3.0 * std::log(2.0 * M_PI) + 50.0).epsilon(1e-12));
}

TEST_CASE("the same feature scores differently in different regions") {
  const ObjectFeature f{Category::person, {orientation_bin_center(0), 2.0, false}};
  const ObjectFeature g{Category::car, {orientation_bin_center(6), 8.0, false}};
  std::vector<int> labels(32, 0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 4; x < 8; ++x) labels[y * 8 + x] = 1;
  }
  const RegionMap map(4, 8, labels);
  const RegionalModelSet set = identity_models({f.to_vector(), g.to_vector()});
  const TrackletScore left = score_tracklet(set, map, make_tracklet(0, 1, f, 0.0));
  const TrackletScore right = score_tracklet(set, map, make_tracklet(0, 1, f, 5.0));
  CHECK(left.region == 0);
  CHECK(right.region == 1);
  CHECK(right.nll > left.nll + 10.0);
}

TEST_CASE("frame scores take the per-frame maximum and a floor") {
  const std::vector<TrackletScore> s{scored(0, 3, 1.2), scored(1, 3, 5.0), scored(6, 1, 0.7)};
  const FrameScoreSeries series = frame_scores(s, 10, 0.0, "v");
  CHECK(series.scores.size() == 10);
  CHECK(series.scores[0] == 1.2);
  CHECK(series.scores[1] == 5.0);
  CHECK(series.scores[3] == 5.0);
  CHECK(series.scores[4] == 0.7);  // uncovered: video minimum
  CHECK(series.scores[6] == 0.7);
  CHECK(series.scores[9] == 0.7);
  CHECK(series.floor == 0.7);
  const FrameScoreSeries empty = frame_scores({}, 5, -3.0, "v");
  CHECK(std::all_of(empty.scores.begin(), empty.scores.end(), [](double v) { return v == -3.0; }));
}

TEST_CASE("frame scores are monotone in tracklet NLL") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TrackletScore> s;
    for (int i = 0; i < 8; ++i) s.push_back(scored(static_cast<std::int64_t>(rng.below(20)), 1 + static_cast<int>(rng.below(3)), 10 * rng.normal()));
    const FrameScoreSeries before = frame_scores(s, 25);
    s[rng.below(8)].nll += 5.0 * rng.uniform();
    const FrameScoreSeries after = frame_scores(s, 25);
    for (std::size_t f = 0; f < 25; ++f) {
      // the floor is the video minimum, which may rise too; covered frames never drop
      CHECK(after.scores[f] >= before.scores[f]);
    }
  }
}

TEST_CASE("Gaussian smoothing") {
  SUBCASE("sigma 0 is the identity") {
    const std::vector<double> v{1, 5, 2, 8, 3};
    CHECK(gaussian_smooth(v, 0.0) == v);
  }
  SUBCASE("constant series are unchanged") {
    const std::vector<double> v(50, 4.25);
    for (double x : gaussian_smooth(v, 7.0)) CHECK(x == doctest::Approx(4.25).epsilon(1e-14));
  }
  SUBCASE("kernel") {
    const std::vector<double> k = gaussian_kernel(7.0);
    CHECK(k.size() == 2 * 21 + 1);
    double sum = 0.0;
    for (double w : k) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("unit impulse") {
    std::vector<double> v(201, 0.0);
    v[100] = 1.0;
    const std::vector<double> out = gaussian_smooth(v, 7.0);
    // discrete kernel normalised over |i| <= 21
    double norm = 0.0;
    for (int i = -21; i <= 21; ++i) norm += std::exp(-i * i / 98.0);
    CHECK(out[100] == doctest::Approx(1.0 / norm).epsilon(1e-14));
    CHECK(std::abs(out[100] - 1.0 / (std::sqrt(2.0 * M_PI) * 7.0)) < 1e-3);
  }
  SUBCASE("mean preservation and shift equivariance away from the borders") {
    Rng rng(2);
    std::vector<double> v(400, 0.0);
    for (std::size_t i = 100; i < 300; ++i) v[i] = rng.normal();
    const std::vector<double> a = gaussian_smooth(v, 7.0);
    double sv = 0.0;
    double sa = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      sv += v[i];
      sa += a[i];
    }
    CHECK(std::abs(sa - sv) < 1e-9);
    std::vector<double> shifted(400, 0.0);
    for (std::size_t i = 0; i + 5 < 400; ++i) shifted[i + 5] = v[i];
    const std::vector<double> b = gaussian_smooth(shifted, 7.0);
    for (std::size_t i = 60; i < 340; ++i) CHECK(b[i + 5] == doctest::Approx(a[i]).epsilon(1e-12));
  }
  SUBCASE("reflection at the borders") {
    const std::vector<double> v{3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const std::vector<double> k = gaussian_kernel(1.0);  // radius 3
    // out[0] sees v[-1] = v[0] by symmetric reflection
    const double expected = k[3] * 3.0 + k[2] * 3.0;
    CHECK(gaussian_smooth(v, 1.0)[0] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("an injected anomaly outranks normal frames") {
  const SceneLayout layout = SceneLayout::two_lane();
  const SynthOutput train = simulate_scene(layout, 1200, {}, 31, "train");
  const auto train_tracklets = build_tracklets(train.records);
  NormalcyOptions opts;
  opts.k_max = 4;
  const RegionMap& map = train.true_regions;
  const RegionalModelSet models =
      train_regional_models(group_features_by_region(train_tracklets, map, opts.encoding), opts);

  AnomalySpec spec;
  spec.rate = 0.02;
  spec.kinds = {AnomalyKind::wrong_category};
  const SynthOutput test = simulate_scene(layout, 1200, spec, 32, "test");
  std::vector<TrackletScore> scores;
  for (const Tracklet& t : build_tracklets(test.records)) scores.push_back(score_tracklet(models, map, t));
  const std::vector<double> raw = frame_scores(scores, test.n_frames).scores;
  const std::vector<int> labels = frame_labels(test.annotations, "test", test.n_frames);
  std::vector<double> normal;
  for (std::size_t f = 0; f < raw.size(); ++f) {
    if (!labels[f]) normal.push_back(raw[f]);
  }
  REQUIRE(normal.size() < raw.size());
  std::sort(normal.begin(), normal.end());
  const double p95 = normal[static_cast<std::size_t>(0.95 * normal.size())];
  for (std::size_t f = 0; f < raw.size(); ++f) {
    if (labels[f]) CHECK(raw[f] > p95);
  }
}
