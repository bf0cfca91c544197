#pragma once

#include "regionvad/evaluation.hpp"
#include "regionvad/motion.hpp"
#include "regionvad/normalcy.hpp"
#include "regionvad/regions.hpp"
#include "regionvad/scoring.hpp"
#include "regionvad/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace regionvad {

/// Malformed file content. The message names the byte offset or line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semantically invalid records; `issues` lists every offending line.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// One per-frame observation of a tracked object.
struct ObservationRecord {
  std::string video_id;
  std::int64_t track_id = 0;
  std::int64_t frame = 0;
  BoundingBox box;
  Category category = Category::person;
  std::optional<double> orientation;  // radians
  std::optional<double> speed;        // pixels/frame
  bool stationary = false;

  friend bool operator==(const ObservationRecord&, const ObservationRecord&) = default;
};

/// Supplies the flow raster of (video, frame), or nullptr when absent.
using FlowLookup = std::function<const FlowField*(const std::string&, std::int64_t)>;

struct TrackletOptions {
  int window = 3;  // frames per tracklet
  double mag_threshold = kDefaultMagnitudeThreshold;
  double stationary_ratio = kDefaultStationaryRatio;
};

/// Groups records per (video, track) and cuts each run of consecutive frames
/// into non-overlapping windows; a shorter trailing window is kept. Category
/// is the window majority (ties to the smaller category). Motion comes from
/// the records' orientation/speed, or from flow rasters for windows whose
/// moving records lack them.
std::vector<Tracklet> build_tracklets(const std::vector<ObservationRecord>& records,
                                      const TrackletOptions& options = {},
                                      const FlowLookup& flow = {});

// ---- tracklet records -------------------------------------------------------

std::string observation_to_line(const ObservationRecord& record);
std::vector<ObservationRecord> parse_observations(std::istream& in);
std::vector<ObservationRecord> read_observations(const std::filesystem::path& path);
void write_observations(const std::filesystem::path& path,
                        const std::vector<ObservationRecord>& records);
std::vector<Tracklet> read_tracklets(const std::filesystem::path& path,
                                     const TrackletOptions& options = {},
                                     const FlowLookup& flow = {});

// ---- ground-truth annotations ----------------------------------------------

std::vector<GroundTruthRegion> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<GroundTruthRegion>& annotations);

// ---- Middlebury flow --------------------------------------------------------

inline constexpr float kFloMagic = 202021.25f;

std::vector<std::uint8_t> encode_flo(const FlowField& flow);
FlowField decode_flo(const std::vector<std::uint8_t>& bytes);
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

// ---- region maps ------------------------------------------------------------

std::vector<std::uint8_t> encode_pgm(const RegionMap& map);
/// Labels of a P5 graymap; returns (height, width, labels).
std::tuple<int, int, std::vector<int>> decode_pgm(const std::vector<std::uint8_t>& bytes);
nlohmann::json region_map_sidecar(const RegionMap& map);
/// Writes `<stem>.pgm` and `<stem>.json`. K must not exceed 256.
void write_region_map(const std::filesystem::path& stem, const RegionMap& map);
RegionMap read_region_map(const std::filesystem::path& stem);
/// FNV-1a 64-bit digest of the raster and K, as 16 hex digits.
std::string region_map_hash(const RegionMap& map);

// ---- model sets -------------------------------------------------------------

nlohmann::json model_set_to_json(const RegionalModelSet& models);
RegionalModelSet model_set_from_json(const nlohmann::json& doc);
void write_model_set(const std::filesystem::path& path, const RegionalModelSet& models);
RegionalModelSet read_model_set(const std::filesystem::path& path);

// ---- scores -----------------------------------------------------------------

/// Text form of a real with 17 significant digits.
std::string format_real(double value);

void write_tracklet_scores(const std::filesystem::path& path,
                           const std::vector<TrackletScore>& scores);
std::vector<TrackletScore> read_tracklet_scores(const std::filesystem::path& path);

struct FrameScoreRow {
  std::string video_id;
  std::int64_t frame = 0;
  double raw = 0.0;
  double smoothed = 0.0;
};

void write_frame_scores(const std::filesystem::path& path, const std::vector<FrameScoreRow>& rows);
std::vector<FrameScoreRow> read_frame_scores(const std::filesystem::path& path);

/// Per-frame predictions (every box of every tracklet, scored by its NLL).
std::vector<Prediction> predictions_from_scores(const std::vector<TrackletScore>& scores);

// ---- video lengths and run configuration -----------------------------------

using VideoLengths = std::map<std::string, std::int64_t>;
void write_video_lengths(const std::filesystem::path& path, const VideoLengths& lengths);
VideoLengths read_video_lengths(const std::filesystem::path& path);

/// Flat key=value configuration; '#' starts a comment line.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config(std::istream& in);
ConfigMap read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const ConfigMap& config);

// ---- small file helpers -----------------------------------------------------

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace regionvad
