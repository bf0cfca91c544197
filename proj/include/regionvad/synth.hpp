#pragma once

#include "regionvad/evaluation.hpp"
#include "regionvad/io.hpp"
#include "regionvad/motion.hpp"
#include "regionvad/regions.hpp"
#include "regionvad/types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace regionvad {

// ---- tabular toy ------------------------------------------------------------

/// Region -> Object -> Speed generative rules. Hints fix a conditional
/// probability, zero constraints forbid a pair, and the remaining mass of a
/// conditional row is spread over the free entries in proportion to the
/// default marginal of the child variable.
struct ToyRuleSet {
  std::vector<std::string> regions;
  std::vector<std::string> objects;
  std::vector<std::string> speeds;
  std::vector<double> region_defaults;
  std::vector<double> object_defaults;
  std::vector<double> speed_defaults;
  std::map<std::pair<std::string, std::string>, double> region_object_hints;
  std::map<std::pair<std::string, std::string>, double> object_speed_hints;
  std::set<std::pair<std::string, std::string>> region_object_zero;
  std::set<std::pair<std::string, std::string>> object_speed_zero;

  /// The street rules: walkway / bicycle lane / car lane / park lane.
  static ToyRuleSet street_defaults();

  /// P(object | region), rows = regions. Throws std::invalid_argument for an
  /// unknown name or a row that cannot be normalised.
  Matrix object_given_region() const;
  /// P(speed | object), rows = objects.
  Matrix speed_given_object() const;
  /// Every pair of the sample has non-zero conditional probability.
  bool conforms(int region, int object, int speed) const;
  int feature_dimension() const {
    return static_cast<int>(regions.size() + objects.size() + speeds.size());
  }
};

struct ToySample {
  int region = 0;
  int object = 0;
  int speed = 0;
  bool anomalous = false;
};

struct ToyData {
  std::vector<ToySample> train;
  std::vector<ToySample> test;  // n_test rule-conforming, then n_test free draws
};

/// Training draws from the rule joint. The test set holds n_test draws from
/// the joint followed by n_test draws with the region from its marginal and
/// object/speed uniform; each test sample is labelled by re-checking rules.
ToyData generate_toy(const ToyRuleSet& rules, int n_train, int n_test, std::uint64_t seed);

/// Concatenated one-hot encoding (region, object, speed), one row per sample.
Matrix toy_features(const ToyRuleSet& rules, std::span<const ToySample> samples);

struct ToyReport {
  std::optional<double> auc;
  int selected_components = 0;
  std::size_t train_size = 0;
  std::size_t test_normal = 0;
  std::size_t test_anomalous = 0;
  std::vector<std::pair<int, double>> bic_table;
};

/// Fits a BIC-selected full-covariance mixture on the training features and
/// scores the test set by NLL.
ToyReport run_toy_experiment(const ToyRuleSet& rules, int n_train, int n_test, std::uint64_t seed,
                             int k_max = 20);

// ---- spatial scene simulator -----------------------------------------------

struct Zone {
  std::string name;
  BoundingBox rect;
  std::array<double, kNumCategories> category_probs{};
  double heading = 0.0;        // radians, image coordinates (y down)
  double speed_mean = 1.0;     // pixels/frame, mean of the log-normal
  double speed_log_sd = 0.1;   // standard deviation of log(speed)
  double spawn_rate = 5.0;     // objects per 100 frames
  double stationary_fraction = 0.0;
};

struct SceneLayout {
  int height = 0;
  int width = 0;
  std::vector<Zone> zones;

  /// Four one-way lanes on a 160 x 96 frame, one object category per lane,
  /// all traffic heading east.
  static SceneLayout four_zone();
  /// Cars heading east in the top half, pedestrians heading west below.
  static SceneLayout two_lane();
  /// The first three lanes of four_zone.
  static SceneLayout three_zone();
  /// Sidewalk (west), bike lane, road and a parking strip with parked cars
  /// and pedestrians walking towards the sidewalk.
  static SceneLayout parking_street();

  /// Throws std::invalid_argument for out-of-bounds rectangles or
  /// unnormalised distributions.
  void validate() const;
  /// Zone of the pixel centre (first listed zone wins), or -1.
  int zone_at(double x, double y) const;
  /// Pixels covered by no zone.
  std::size_t gap_pixels() const;
  /// Zone label raster; uncovered pixels take the nearest zone.
  RegionMap zone_raster() const;
  nlohmann::json to_json() const;
};

enum class AnomalyKind { wrong_category, wrong_direction, overspeed, cross_zone };
std::string_view to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(std::string_view name);

struct AnomalySpec {
  double rate = 0.0;  // probability that a spawned object is anomalous
  std::vector<AnomalyKind> kinds{AnomalyKind::wrong_category, AnomalyKind::wrong_direction,
                                 AnomalyKind::overspeed, AnomalyKind::cross_zone};
  double overspeed_factor = 3.0;
};

struct SimulatedTrack {
  std::int64_t track_id = 0;
  int zone = 0;  // spawn zone
  Category category = Category::person;
  double heading = 0.0;
  double speed = 0.0;
  bool stationary = false;
  std::optional<AnomalyKind> anomaly;
  std::int64_t first_frame = 0;
  std::vector<BoundingBox> boxes;                    // emitted box per frame
  std::vector<std::pair<double, double>> velocity;  // (u, v) per frame
};

struct SynthOutput {
  std::string video_id;
  std::int64_t n_frames = 0;
  int height = 0;
  int width = 0;
  std::uint64_t seed = 0;
  std::vector<ObservationRecord> records;
  std::vector<GroundTruthRegion> annotations;
  RegionMap true_regions;
  std::vector<SimulatedTrack> tracks;
  bool has_gaps = false;
  nlohmann::json config;
};

/// Spawns objects per zone, moves them with the zone heading and a
/// log-normal speed and injects anomalous tracks per `anomaly`. Anomalous
/// frames are annotated; cross-zone walkers only where the zone they are in
/// forbids their category or heading.
SynthOutput simulate_scene(const SceneLayout& layout, std::int64_t n_frames, const AnomalySpec& anomaly,
                           std::uint64_t seed, const std::string& video_id = "video");

/// Flow raster of one frame: every visible box filled with its object's
/// velocity, later-spawned objects overwriting earlier ones.
FlowField flow_raster(const SynthOutput& output, std::int64_t frame);
std::vector<FlowField> emit_flow_rasters(const SynthOutput& output, std::span<const std::int64_t> frames);

/// Frame-level labels: 1 where any annotation exists.
std::vector<int> frame_labels(const std::vector<GroundTruthRegion>& annotations, const std::string& video_id,
                              std::int64_t n_frames);

}  // namespace regionvad
