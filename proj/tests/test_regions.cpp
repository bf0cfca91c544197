#include <doctest.h>

#include "oracles.hpp"
#include "regionvad/heatmap.hpp"
#include "regionvad/normalcy.hpp"
#include "regionvad/regions.hpp"
#include "regionvad/rng.hpp"
#include "regionvad/select_k.hpp"
#include "regionvad/synth.hpp"

#include <cmath>

using namespace regionvad;

namespace {

MotionAttribute moving(double orientation, double speed) { return {orientation, speed, false}; }

HeatmapObservation obs(BoundingBox box, Category c, MotionAttribute m) { return {box, c, m}; }

}  // namespace

TEST_CASE("heatmap deposit values") {
  ActivityHeatmap hm(20, 20, KernelPolicy::fixed_sigma(2.0));
  hm.accumulate(obs({0, 0, 10, 10}, Category::car, moving(0.1, 4.0)));
  const int car = AttributeLayout::category_offset + static_cast<int>(Category::car);
  const int dir = AttributeLayout::direction_offset + 0;
  const int spd = AttributeLayout::speed_offset + 1;
  SUBCASE("centre pixel gets exactly one per active channel") {
    CHECK(hm.at(5, 5, car) == 1.0);
  }
  SUBCASE("squared distance 2 sigma^2 gives e^-1") {
    ActivityHeatmap h2(20, 20, KernelPolicy::fixed_sigma(2.0));
    h2.accumulate(obs({0, 0, 10, 10}, Category::person, moving(0.1, 4.0)));
    CHECK(h2.at(5, 5, 0) == 1.0);
    // (dx, dy) = (2, 2): r^2 = 8 = 2 sigma^2
    CHECK(h2.at(7, 7, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(h2.at(7, 7, 0) == doctest::Approx(0.3679).epsilon(1e-4));
  }
  SUBCASE("outside the box nothing is added") {
    for (int c = 0; c < AttributeLayout::channels; ++c) {
      CHECK(hm.at(10, 5, c) == 0.0);
      CHECK(hm.at(5, 10, c) == 0.0);
    }
  }
  SUBCASE("only the active channels receive mass") {
    for (int c = 0; c < AttributeLayout::channels; ++c) {
      if (c == car || c == dir || c == spd) continue;
      CHECK(hm.at(5, 5, c) == 0.0);
    }
    CHECK(hm.at(5, 5, dir) == hm.at(5, 5, car));
    CHECK(hm.at(5, 5, spd) == hm.at(5, 5, car));
  }
}

TEST_CASE("stationary deposits use the stationary channel") {
  ActivityHeatmap hm(10, 10, KernelPolicy::fixed_sigma(1.0));
  hm.accumulate(obs({2, 2, 6, 6}, Category::car, MotionAttribute::still()));
  CHECK(hm.at(4, 4, AttributeLayout::stationary_offset) == 1.0);
  for (int c = AttributeLayout::direction_offset; c < AttributeLayout::stationary_offset; ++c) {
    CHECK(hm.at(4, 4, c) == 0.0);
  }
  CHECK_THROWS_AS(hm.accumulate(obs({2, 2, 6, 6}, static_cast<Category>(9), MotionAttribute::still())),
                  std::invalid_argument);
  CHECK(AttributeLayout::channels == 21);
}

TEST_CASE("accumulation order does not matter and one deposit is bounded") {
  Rng rng(3);
  std::vector<HeatmapObservation> list;
  for (int i = 0; i < 200; ++i) {
    const double x = 40.0 * rng.uniform();
    const double y = 30.0 * rng.uniform();
    const auto c = static_cast<Category>(rng.below(4));
    MotionAttribute m = rng.uniform() < 0.3 ? MotionAttribute::still()
                                             : moving(kTwoPi * rng.uniform(), 1.5 + 10.0 * rng.uniform());
    list.push_back(obs({x - 3.0, y - 4.0, x + 3.0, y + 4.0}, c, m));
  }
  ActivityHeatmap a(30, 40);
  ActivityHeatmap b(30, 40);
  for (const auto& o : list) a.accumulate(o);
  for (auto it = list.rbegin(); it != list.rend(); ++it) b.accumulate(*it);
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-9);

  ActivityHeatmap single(30, 40, KernelPolicy::fixed_sigma(2.5));
  single.accumulate(obs({5, 5, 25, 20}, Category::person, moving(1.0, 3.0)));
  double total = 0.0;
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      CHECK(single.at(x, y, 0) <= 1.0);
      total += single.at(x, y, 0);
    }
  }
  CHECK(total <= 2.0 * kPi * 2.5 * 2.5 + 2.0 * (20 + 15));
}

TEST_CASE("pixel features") {
  SUBCASE("untouched heatmap has no active pixels") { CHECK(pixel_features(ActivityHeatmap(5, 5)).empty()); }
  SUBCASE("L1 normalisation") {
    ActivityHeatmap hm(4, 4, KernelPolicy::fixed_sigma(1.0));
    hm.accumulate(obs({1, 1, 2, 2}, Category::person, MotionAttribute::still()));
    hm.accumulate(obs({1, 1, 2, 2}, Category::person, MotionAttribute::still()));
    const PixelFeatures pf = pixel_features(hm);
    REQUIRE(pf.pixels.size() == 1);
    CHECK(pf.pixels[0] == 1 * 4 + 1);
    CHECK(pf.features(0, 0) == 0.5);
    CHECK(pf.features(0, AttributeLayout::stationary_offset) == 0.5);
    CHECK(pf.features.row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("min mass threshold") {
    ActivityHeatmap hm(10, 10, KernelPolicy::fixed_sigma(0.5));
    // centre (1.5, 1.5), pixel (1,1) at r^2 = 0.5: g = e^-1 per channel
    hm.accumulate(obs({1, 1, 2, 2}, Category::person, MotionAttribute::still()));
    CHECK(pixel_features(hm, 1e-3).pixels.size() == 1);
    CHECK(pixel_features(hm, 1.0).pixels.empty());
  }
}

TEST_CASE("nearest-active filling") {
  // 3 x 4 field, two seeds
  std::vector<int> partial(12, -1);
  partial[0] = 1;   // (0, 0)
  partial[11] = 0;  // (3, 2)
  const std::vector<int> full = fill_nearest_labels(3, 4, partial);
  CHECK(full[0] == 1);
  CHECK(full[1] == 1);   // (1,0): d^2 1 vs 8
  CHECK(full[10] == 0);  // (2,2)
  // (1,1): d^2 2 to (0,0) vs 5 to (3,2) -> 1
  CHECK(full[5] == 1);
  // (2,1): d^2 5 vs 2 -> 0
  CHECK(full[6] == 0);
  // brute-force check of every cell, ties to the smaller label
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      const int d1 = x * x + y * y;
      const int d0 = (x - 3) * (x - 3) + (y - 2) * (y - 2);
      const int expected = d0 < d1 ? 0 : (d1 < d0 ? 1 : 0);
      CHECK(full[y * 4 + x] == expected);
    }
  }
}

TEST_CASE("relabel by size puts the largest region first") {
  std::vector<int> labels{2, 2, 2, 0, 1, 1, 2, 1};
  CHECK(relabel_by_size(labels, 3) == 3);
  CHECK(labels == std::vector<int>{0, 0, 0, 2, 1, 1, 0, 1});
}

TEST_CASE("grid baseline") {
  CHECK(grid_region_map(160, 160, 80).num_regions() == 4);
  CHECK(grid_region_map(720, 1280, 80).num_regions() == 144);
  CHECK(grid_region_map(50, 60, 80).num_regions() == 1);
  const RegionMap g = grid_region_map(100, 170, 80);  // partial cells are their own regions
  CHECK(g.num_regions() == 2 * 3);
  CHECK(g.label_at(0, 0) == 0);
  CHECK(g.label_at(169, 0) == 2);
  CHECK(g.label_at(0, 99) == 3);
}

TEST_CASE("rendering") {
  const RegionMap one(3, 3, std::vector<int>(9, 0));
  const Palette p1 = default_palette(1);
  const auto img = render_region_map(one, p1);
  CHECK(decode_rendered_labels(img, p1) == one.labels());
  const RegionMap grid = grid_region_map(40, 60, 10);
  const Palette p = default_palette(grid.num_regions());
  CHECK(p.size() == static_cast<std::size_t>(grid.num_regions()));
  CHECK(std::set<Rgb>(p.begin(), p.end()).size() == p.size());
  CHECK(decode_rendered_labels(render_region_map(grid, p), p) == grid.labels());
  CHECK(render_region_map(grid, p) == render_region_map(grid, p));
}

TEST_CASE("two-lane scene separates into its lanes") {
  const SceneLayout layout = SceneLayout::two_lane();
  const SynthOutput sim = simulate_scene(layout, 1500, {}, 21, "train");
  const auto tracklets = build_tracklets(sim.records);
  const ActivityHeatmap hm = build_heatmap(layout.height, layout.width, tracklets);
  DiscoveryOptions opts;
  opts.seed = 4;
  const RegionMap map = discover_regions(hm, 2, opts);
  CHECK(map.num_regions() == 2);
  CHECK(oracle::permutation_agreement(map.labels(), 2, sim.true_regions.labels(), 2) >= 0.95);
  const auto sizes = map.region_sizes();
  CHECK(sizes[0] >= sizes[1]);
  SUBCASE("deterministic") { CHECK(discover_regions(hm, 2, opts) == map); }
  SUBCASE("k-means and spatial affinity variants run") {
    DiscoveryOptions km = opts;
    km.method = ClusterMethod::kmeans;
    CHECK(oracle::permutation_agreement(discover_regions(hm, 2, km).labels(), 2, sim.true_regions.labels(), 2) >= 0.95);
    DiscoveryOptions sa = opts;
    sa.spatial_affinity = 0.5;
    sa.method = ClusterMethod::gmm_diagonal;
    CHECK(discover_regions(hm, 2, sa).num_regions() == 2);
  }
}

TEST_CASE("degenerate heatmap: identical pixel vectors have no separable structure") {
  ActivityHeatmap hm(20, 20, KernelPolicy::fixed_sigma(1e6));
  for (int y = 0; y < 20; y += 2) {
    for (int x = 0; x < 20; x += 2) hm.accumulate(obs({double(x), double(y), x + 2.0, y + 2.0}, Category::car, MotionAttribute::still()));
  }
  DiscoveryOptions opts;
  const RegionMap map = discover_regions(hm, 2, opts);
  CHECK(map.provenance().component_separation < 1e-6);
  CHECK_THROWS_AS(discover_regions(ActivityHeatmap(5, 5), 2, opts), std::invalid_argument);
}

TEST_CASE("region sizes never increase with the label") {
  const SceneLayout layout = SceneLayout::parking_street();
  const SynthOutput sim = simulate_scene(layout, 800, {}, 5, "v");
  const auto tracklets = build_tracklets(sim.records);
  DiscoveryOptions opts;
  opts.subsample = 3000;
  for (int k : {2, 3, 5}) {
    const auto sizes = discover_regions(build_heatmap(layout.height, layout.width, tracklets), k, opts).region_sizes();
    for (std::size_t i = 1; i < sizes.size(); ++i) CHECK(sizes[i] <= sizes[i - 1]);
  }
}

TEST_CASE("select_k finds the three lanes") {
  const SceneLayout layout = SceneLayout::three_zone();
  const SynthOutput sim = simulate_scene(layout, 1000, {}, 2, "train");
  const auto tracklets = build_tracklets(sim.records);
  const ActivityHeatmap hm = build_heatmap(layout.height, layout.width, tracklets);
  DiscoveryOptions opts;
  opts.seed = 2;
  NormalcyOptions normalcy;
  normalcy.k_max = 5;
  const std::vector<int> candidates{2, 3, 4, 6};
  const SelectKResult r = select_k(hm, tracklets, candidates, opts, normalcy);
  CHECK(r.best_k == 3);
  REQUIRE(r.table.size() == 4);
  REQUIRE(r.best_map.has_value());
  CHECK(r.best_map->num_regions() == 3);

  // The lanes' true feature distributions give the reference divergence:
  // one Gaussian per lane fitted to its generator-labelled tracklets.
  std::vector<Matrix> truth_groups = group_features_by_region(tracklets, sim.true_regions, OrientationEncoding::radians);
  std::vector<GaussianMixture> truth_models;
  for (const Matrix& g : truth_groups) truth_models.push_back(fit_em(g, 1, CovarianceMode::full, {}));
  double closed = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const auto& a = truth_models[i];
      const auto& b = truth_models[j];
      closed += gaussian_kl(a.mean(0), a.covariance(0), b.mean(0), b.covariance(0)) +
                gaussian_kl(b.mean(0), b.covariance(0), a.mean(0), a.covariance(0));
    }
  }
  closed /= 6.0;
  const double chosen = r.table[1].second;
  CHECK(std::abs(chosen - closed) < 0.05 * closed);

  SUBCASE("single candidate") {
    const std::vector<int> only{4};
    const SelectKResult s = select_k(hm, tracklets, only, opts, normalcy);
    CHECK(s.best_k == 4);
    CHECK(s.table.size() == 1);
  }
}

TEST_CASE("select_k with identical activity everywhere returns the smallest candidate") {
  // one category moving east over the whole frame
  SceneLayout layout;
  layout.height = 48;
  layout.width = 96;
  Zone z;
  z.name = "plaza";
  z.rect = {0, 0, 96, 48};
  z.category_probs = {1.0, 0.0, 0.0, 0.0};
  z.heading = 0.0;
  z.speed_mean = 3.0;
  z.spawn_rate = 20.0;
  layout.zones = {z};
  const SynthOutput sim = simulate_scene(layout, 600, {}, 3, "v");
  const auto tracklets = build_tracklets(sim.records);
  const ActivityHeatmap hm = build_heatmap(layout.height, layout.width, tracklets);
  NormalcyOptions normalcy;
  normalcy.k_max = 3;
  const std::vector<int> candidates{2, 3};
  const SelectKResult r = select_k(hm, tracklets, candidates, DiscoveryOptions{}, normalcy);
  for (const auto& [k, mu] : r.table) CHECK(std::abs(mu) < 1.0);
}
