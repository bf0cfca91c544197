#include "regionvad/synth.hpp"

#include "regionvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regionvad {

namespace {

constexpr double kBoxJitter = 0.3;       // pixels, per emitted coordinate
constexpr double kSpeedJitter = 0.03;    // relative, per frame
constexpr int kMinStationaryFrames = 30;
constexpr int kMaxStationaryFrames = 90;

std::pair<double, double> base_box_size(Category c) {
  switch (c) {
    case Category::person: return {6.0, 14.0};
    case Category::bicycle: return {12.0, 11.0};
    case Category::car: return {22.0, 12.0};
    case Category::motorcycle: return {14.0, 10.0};
  }
  return {8.0, 8.0};
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

double angle_difference(double a, double b) {
  const double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

// Unit heading with round-off components snapped to zero, so the axis
// headings land exactly on their orientation bins.
std::pair<double, double> unit_direction(double heading) {
  double ux = std::cos(heading);
  double uy = std::sin(heading);
  if (std::fabs(ux) < 1e-12) ux = 0.0;
  if (std::fabs(uy) < 1e-12) uy = 0.0;
  return {ux, uy};
}

Zone make_zone(std::string name, BoundingBox rect, std::array<double, kNumCategories> probs, double heading,
               double speed_mean, double spawn_rate, double stationary_fraction) {
  Zone z;
  z.name = std::move(name);
  z.rect = rect;
  z.category_probs = probs;
  z.heading = heading;
  z.speed_mean = speed_mean;
  z.speed_log_sd = 0.1;
  z.spawn_rate = spawn_rate;
  z.stationary_fraction = stationary_fraction;
  return z;
}

struct Live {
  std::size_t track = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double ux = 0.0;
  double uy = 0.0;
  int remaining = -1;  // frames left for stationary objects
};

struct Range {
  double lo;
  double hi;
};

Range center_range(double lo, double hi, double extent) {
  const double a = lo + 0.5 * extent;
  const double b = hi - 0.5 * extent;
  if (a > b) return {0.5 * (lo + hi), 0.5 * (lo + hi)};
  return {a, b};
}

}  // namespace

SceneLayout SceneLayout::four_zone() {
  SceneLayout s;
  s.height = 96;
  s.width = 160;
  s.zones = {
      make_zone("sidewalk", {0, 0, 160, 24}, {1.0, 0.0, 0.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
      make_zone("bike_lane", {0, 24, 160, 48}, {0.0, 1.0, 0.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
      make_zone("road", {0, 48, 160, 72}, {0.0, 0.0, 1.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
      make_zone("motorcycle_lane", {0, 72, 160, 96}, {0.0, 0.0, 0.0, 1.0}, 0.0, 4.0, 7.0, 0.0),
  };
  return s;
}

SceneLayout SceneLayout::two_lane() {
  SceneLayout s;
  s.height = 64;
  s.width = 128;
  s.zones = {
      make_zone("road", {0, 0, 128, 32}, {0.0, 0.0, 1.0, 0.0}, 0.0, 6.0, 10.0, 0.0),
      make_zone("sidewalk", {0, 32, 128, 64}, {1.0, 0.0, 0.0, 0.0}, kPi, 2.2, 10.0, 0.0),
  };
  return s;
}

SceneLayout SceneLayout::three_zone() {
  SceneLayout s;
  s.height = 72;
  s.width = 160;
  s.zones = {
      make_zone("sidewalk", {0, 0, 160, 24}, {1.0, 0.0, 0.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
      make_zone("bike_lane", {0, 24, 160, 48}, {0.0, 1.0, 0.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
      make_zone("road", {0, 48, 160, 72}, {0.0, 0.0, 1.0, 0.0}, 0.0, 4.0, 7.0, 0.0),
  };
  return s;
}

SceneLayout SceneLayout::parking_street() {
  SceneLayout s;
  s.height = 96;
  s.width = 160;
  s.zones = {
      make_zone("sidewalk", {0, 0, 160, 20}, {1.0, 0.0, 0.0, 0.0}, kPi, 2.2, 8.0, 0.1),
      make_zone("bike_lane", {0, 20, 160, 40}, {0.0, 1.0, 0.0, 0.0}, 0.0, 4.0, 6.0, 0.0),
      make_zone("road", {0, 40, 160, 68}, {0.0, 0.0, 0.9, 0.1}, 0.0, 8.0, 8.0, 0.0),
      make_zone("parking", {0, 68, 160, 96}, {0.4, 0.0, 0.6, 0.0}, 1.5 * kPi, 2.2, 5.0, 0.6),
  };
  return s;
}

void SceneLayout::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("scene layout: empty frame");
  if (zones.empty()) throw std::invalid_argument("scene layout: no zones");
  for (const Zone& z : zones) {
    const BoundingBox& r = z.rect;
    if (!r.valid() || r.x1 < 0 || r.y1 < 0 || r.x2 > width || r.y2 > height) {
      throw std::invalid_argument("scene layout: zone '" + z.name + "' lies outside the frame");
    }
    double total = 0.0;
    for (double p : z.category_probs) {
      if (p < 0.0) throw std::invalid_argument("scene layout: negative category probability");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("scene layout: category distribution of '" + z.name + "' does not sum to 1");
    }
    if (!(z.speed_mean > 0.0) || z.speed_log_sd < 0.0 || z.spawn_rate < 0.0 || z.spawn_rate > 100.0 ||
        z.stationary_fraction < 0.0 || z.stationary_fraction > 1.0) {
      throw std::invalid_argument("scene layout: invalid parameters for zone '" + z.name + "'");
    }
  }
}

int SceneLayout::zone_at(double x, double y) const {
  for (std::size_t i = 0; i < zones.size(); ++i) {
    const BoundingBox& r = zones[i].rect;
    if (x >= r.x1 && x < r.x2 && y >= r.y1 && y < r.y2) return static_cast<int>(i);
  }
  return -1;
}

std::size_t SceneLayout::gap_pixels() const {
  std::size_t gaps = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (zone_at(x + 0.5, y + 0.5) < 0) ++gaps;
    }
  }
  return gaps;
}

RegionMap SceneLayout::zone_raster() const {
  validate();
  std::vector<int> labels(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  bool gaps = false;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int z = zone_at(x + 0.5, y + 0.5);
      labels[static_cast<std::size_t>(y) * width + x] = z;
      gaps = gaps || z < 0;
    }
  }
  if (gaps) labels = fill_nearest_labels(height, width, labels);
  RegionProvenance prov;
  prov.method = "zones";
  prov.requested_k = static_cast<int>(zones.size());
  return RegionMap(height, width, static_cast<int>(zones.size()), std::move(labels), prov);
}

nlohmann::json SceneLayout::to_json() const {
  nlohmann::json j;
  j["height"] = height;
  j["width"] = width;
  nlohmann::json zs = nlohmann::json::array();
  for (const Zone& z : zones) {
    nlohmann::json e;
    e["name"] = z.name;
    e["rect"] = {z.rect.x1, z.rect.y1, z.rect.x2, z.rect.y2};
    e["category_probs"] = z.category_probs;
    e["heading"] = z.heading;
    e["speed_mean"] = z.speed_mean;
    e["speed_log_sd"] = z.speed_log_sd;
    e["spawn_rate"] = z.spawn_rate;
    e["stationary_fraction"] = z.stationary_fraction;
    zs.push_back(std::move(e));
  }
  j["zones"] = std::move(zs);
  return j;
}

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::wrong_category: return "wrong-category";
    case AnomalyKind::wrong_direction: return "wrong-direction";
    case AnomalyKind::overspeed: return "overspeed";
    case AnomalyKind::cross_zone: return "cross-zone";
  }
  return "overspeed";
}

AnomalyKind parse_anomaly_kind(std::string_view name) {
  if (name == "wrong-category") return AnomalyKind::wrong_category;
  if (name == "wrong-direction") return AnomalyKind::wrong_direction;
  if (name == "overspeed") return AnomalyKind::overspeed;
  if (name == "cross-zone" || name == "cross-zone-path") return AnomalyKind::cross_zone;
  throw std::invalid_argument("unknown anomaly kind: " + std::string(name));
}

SynthOutput simulate_scene(const SceneLayout& layout, std::int64_t n_frames, const AnomalySpec& anomaly,
                           std::uint64_t seed, const std::string& video_id) {
  if (n_frames < 1) throw std::invalid_argument("simulate_scene: n_frames must be >= 1");
  if (!(anomaly.rate >= 0.0 && anomaly.rate <= 1.0)) {
    throw std::invalid_argument("simulate_scene: anomaly rate must lie in [0, 1]");
  }
  if (anomaly.rate > 0.0 && anomaly.kinds.empty()) {
    throw std::invalid_argument("simulate_scene: anomalies requested without kinds");
  }
  if (!(anomaly.overspeed_factor > 1.0)) {
    throw std::invalid_argument("simulate_scene: overspeed factor must exceed 1");
  }
  layout.validate();

  SynthOutput out;
  out.video_id = video_id;
  out.n_frames = n_frames;
  out.height = layout.height;
  out.width = layout.width;
  out.seed = seed;
  out.true_regions = layout.zone_raster();
  out.has_gaps = layout.gap_pixels() > 0;

  Rng rng(seed);
  const double W = layout.width;
  const double H = layout.height;
  std::vector<Live> live;

  auto feasible = [&](AnomalyKind kind, const Zone& z) {
    switch (kind) {
      case AnomalyKind::wrong_category:
        return std::any_of(z.category_probs.begin(), z.category_probs.end(), [](double p) { return p == 0.0; });
      case AnomalyKind::wrong_direction:
      case AnomalyKind::overspeed:
        return z.stationary_fraction < 1.0;
      case AnomalyKind::cross_zone:
        return z.category_probs[static_cast<std::size_t>(Category::person)] > 0.0 && layout.zones.size() > 1;
    }
    return false;
  };

  // Whether a cross-zone walker at (x, y) breaks the profile of the zone it is in.
  auto violates = [&](const SimulatedTrack& t, double x, double y) {
    const int zi = layout.zone_at(x, y);
    if (zi < 0) return true;
    const Zone& z = layout.zones[static_cast<std::size_t>(zi)];
    if (z.category_probs[static_cast<std::size_t>(t.category)] == 0.0) return true;
    return z.stationary_fraction < 1.0 && angle_difference(t.heading, z.heading) > kPi / 4.0;
  };

  for (std::int64_t frame = 0; frame < n_frames; ++frame) {
    for (std::size_t zi = 0; zi < layout.zones.size(); ++zi) {
      const Zone& z = layout.zones[zi];
      if (!rng.bernoulli(z.spawn_rate / 100.0)) continue;

      SimulatedTrack t;
      t.track_id = static_cast<std::int64_t>(out.tracks.size()) + 1;
      t.zone = static_cast<int>(zi);
      t.first_frame = frame;
      t.category = static_cast<Category>(rng.categorical(z.category_probs));
      t.stationary = rng.bernoulli(z.stationary_fraction);
      t.heading = z.heading;
      const double mu = std::log(z.speed_mean) - 0.5 * z.speed_log_sd * z.speed_log_sd;
      t.speed = std::exp(rng.normal(mu, z.speed_log_sd));

      if (rng.bernoulli(anomaly.rate)) {
        const std::size_t first = static_cast<std::size_t>(rng.below(anomaly.kinds.size()));
        for (std::size_t k = 0; k < anomaly.kinds.size(); ++k) {
          const AnomalyKind kind = anomaly.kinds[(first + k) % anomaly.kinds.size()];
          if (feasible(kind, z)) {
            t.anomaly = kind;
            break;
          }
        }
      }
      if (t.anomaly) {
        switch (*t.anomaly) {
          case AnomalyKind::wrong_category: {
            std::array<double, kNumCategories> forbidden{};
            for (int c = 0; c < kNumCategories; ++c) {
              forbidden[static_cast<std::size_t>(c)] = z.category_probs[static_cast<std::size_t>(c)] == 0.0 ? 1.0 : 0.0;
            }
            t.category = static_cast<Category>(rng.categorical(forbidden));
            break;
          }
          case AnomalyKind::wrong_direction:
            t.stationary = false;
            t.heading = wrap_angle(z.heading + kPi);
            break;
          case AnomalyKind::overspeed:
            t.stationary = false;
            t.speed *= anomaly.overspeed_factor;
            break;
          case AnomalyKind::cross_zone:
            t.stationary = false;
            t.category = Category::person;
            t.heading = 0.5 * (z.rect.y1 + z.rect.y2) < 0.5 * H ? 0.5 * kPi : 1.5 * kPi;
            break;
        }
      }

      auto [bw, bh] = base_box_size(t.category);
      bw *= 0.9 + 0.2 * rng.uniform();
      bh *= 0.9 + 0.2 * rng.uniform();
      Live obj;
      obj.track = out.tracks.size();
      obj.w = bw;
      obj.h = bh;
      const Range rx = center_range(z.rect.x1, z.rect.x2, bw);
      const Range ry = center_range(z.rect.y1, z.rect.y2, bh);
      obj.cx = rx.lo + (rx.hi - rx.lo) * rng.uniform();
      obj.cy = ry.lo + (ry.hi - ry.lo) * rng.uniform();
      if (t.stationary) {
        obj.remaining = kMinStationaryFrames +
                        static_cast<int>(rng.below(kMaxStationaryFrames - kMinStationaryFrames + 1));
      } else {
        std::tie(obj.ux, obj.uy) = unit_direction(t.heading);
        // Start at the upstream edge of the zone.
        const double inf = std::numeric_limits<double>::infinity();
        const double tx = obj.ux > 0 ? (obj.cx - rx.lo) / obj.ux : obj.ux < 0 ? (rx.hi - obj.cx) / -obj.ux : inf;
        const double ty = obj.uy > 0 ? (obj.cy - ry.lo) / obj.uy : obj.uy < 0 ? (ry.hi - obj.cy) / -obj.uy : inf;
        const double back = std::min(tx, ty);
        obj.cx -= back * obj.ux;
        obj.cy -= back * obj.uy;
      }
      out.tracks.push_back(std::move(t));
      live.push_back(obj);
    }

    std::vector<Live> next;
    for (Live& obj : live) {
      SimulatedTrack& t = out.tracks[obj.track];
      const Zone& z = layout.zones[static_cast<std::size_t>(t.zone)];
      BoundingBox box{obj.cx - 0.5 * obj.w + rng.normal(0.0, kBoxJitter),
                      obj.cy - 0.5 * obj.h + rng.normal(0.0, kBoxJitter),
                      obj.cx + 0.5 * obj.w + rng.normal(0.0, kBoxJitter),
                      obj.cy + 0.5 * obj.h + rng.normal(0.0, kBoxJitter)};
      box.x1 = std::clamp(box.x1, 0.0, W);
      box.x2 = std::clamp(box.x2, 0.0, W);
      box.y1 = std::clamp(box.y1, 0.0, H);
      box.y2 = std::clamp(box.y2, 0.0, H);
      double u = 0.0;
      double v = 0.0;
      if (!t.stationary) {
        const double s = t.speed * std::max(0.2, 1.0 + rng.normal(0.0, kSpeedJitter));
        u = s * obj.ux;
        v = s * obj.uy;
      }
      t.boxes.push_back(box);
      t.velocity.emplace_back(u, v);

      ObservationRecord rec;
      rec.video_id = video_id;
      rec.track_id = t.track_id;
      rec.frame = frame;
      rec.box = box;
      rec.category = t.category;
      rec.stationary = t.stationary;
      if (!t.stationary) {
        rec.orientation = wrap_angle(std::atan2(v, u));
        rec.speed = std::hypot(u, v);
      }
      out.records.push_back(rec);

      if (t.anomaly) {
        const bool annotate =
            *t.anomaly != AnomalyKind::cross_zone || violates(t, box.center_x(), box.center_y());
        if (annotate) out.annotations.push_back({video_id, frame, box, t.track_id});
      }

      bool alive = true;
      if (t.stationary) {
        alive = --obj.remaining > 0;
      } else {
        obj.cx += u;
        obj.cy += v;
        const BoundingBox& bound = (t.anomaly && *t.anomaly == AnomalyKind::cross_zone)
                                       ? BoundingBox{0.0, 0.0, W, H}
                                       : z.rect;
        const Range rx = center_range(bound.x1, bound.x2, obj.w);
        const Range ry = center_range(bound.y1, bound.y2, obj.h);
        alive = obj.cx >= rx.lo - 1e-9 && obj.cx <= rx.hi + 1e-9 && obj.cy >= ry.lo - 1e-9 &&
                obj.cy <= ry.hi + 1e-9;
      }
      if (alive) next.push_back(obj);
    }
    live = std::move(next);
  }

  nlohmann::json config;
  config["video_id"] = video_id;
  config["n_frames"] = n_frames;
  config["seed"] = seed;
  config["layout"] = layout.to_json();
  config["anomaly_rate"] = anomaly.rate;
  nlohmann::json kinds = nlohmann::json::array();
  for (AnomalyKind k : anomaly.kinds) kinds.push_back(std::string(to_string(k)));
  config["anomaly_kinds"] = kinds;
  config["overspeed_factor"] = anomaly.overspeed_factor;
  out.config = std::move(config);
  return out;
}

FlowField flow_raster(const SynthOutput& output, std::int64_t frame) {
  FlowField flow(output.width, output.height);
  for (const SimulatedTrack& t : output.tracks) {
    const std::int64_t i = frame - t.first_frame;
    if (i < 0 || i >= static_cast<std::int64_t>(t.boxes.size())) continue;
    const auto [u, v] = t.velocity[static_cast<std::size_t>(i)];
    flow.fill(t.boxes[static_cast<std::size_t>(i)], static_cast<float>(u), static_cast<float>(v));
  }
  return flow;
}

std::vector<FlowField> emit_flow_rasters(const SynthOutput& output, std::span<const std::int64_t> frames) {
  std::vector<FlowField> out;
  out.reserve(frames.size());
  for (std::int64_t f : frames) {
    if (f < 0 || f >= output.n_frames) throw std::out_of_range("emit_flow_rasters: frame outside the video");
    out.push_back(flow_raster(output, f));
  }
  return out;
}

std::vector<int> frame_labels(const std::vector<GroundTruthRegion>& annotations, const std::string& video_id,
                              std::int64_t n_frames) {
  std::vector<int> labels(static_cast<std::size_t>(std::max<std::int64_t>(n_frames, 0)), 0);
  for (const GroundTruthRegion& g : annotations) {
    if (g.video_id == video_id && g.frame >= 0 && g.frame < n_frames) labels[static_cast<std::size_t>(g.frame)] = 1;
  }
  return labels;
}

}  // namespace regionvad
