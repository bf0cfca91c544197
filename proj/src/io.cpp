#include "regionvad/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace regionvad {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string msg = "validation failed:";
  for (const std::string& issue : issues) msg += "\n  " + issue;
  return msg;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json box_to_json(const BoundingBox& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

BoundingBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1, y1, x2, y2]");
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument("box coordinates must be numbers");
  }
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) || !std::isfinite(b.y2)) {
    throw std::invalid_argument("box coordinates must be finite");
  }
  if (!b.valid()) throw std::invalid_argument("box needs x1 < x2 and y1 < y2");
  return b;
}

template <typename T>
T require(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw std::invalid_argument(std::string("field '") + key + "' must be a flag");
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) {
      throw std::invalid_argument(std::string("field '") + key + "' must be an integer");
    }
  } else {
    if (!it->is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
  }
  return it->get<T>();
}

std::optional<double> optional_real(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number or null");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument(std::string("field '") + key + "' must be finite");
  return v;
}

nlohmann::json real_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double real_or_nan(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  return it->get<double>();
}

ObservationRecord observation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("record must be an object");
  ObservationRecord r;
  r.video_id = require<std::string>(j, "video_id");
  r.track_id = require<std::int64_t>(j, "track_id");
  r.frame = require<std::int64_t>(j, "frame");
  if (r.frame < 0) throw std::invalid_argument("frame must be >= 0");
  r.box = box_from_json(j.at("box"));
  const std::string cat = require<std::string>(j, "category");
  const auto parsed = parse_category(cat);
  if (!parsed) throw std::invalid_argument("unknown category '" + cat + "'");
  r.category = *parsed;
  r.orientation = optional_real(j, "orientation");
  r.speed = optional_real(j, "speed");
  if (r.speed && *r.speed < 0.0) throw std::invalid_argument("speed must be >= 0");
  r.stationary = j.contains("stationary") ? require<bool>(j, "stationary") : false;
  if (r.orientation.has_value() != r.speed.has_value()) {
    throw std::invalid_argument("orientation and speed must both be given or both be null");
  }
  return r;
}

MotionAttribute window_motion(const std::vector<const ObservationRecord*>& window,
                              const TrackletOptions& options, const FlowLookup& flow) {
  bool needs_flow = false;
  for (const ObservationRecord* r : window) {
    if (!r->stationary && !r->orientation) needs_flow = true;
  }
  if (!needs_flow) {
    FlowHistogram hist;
    for (const ObservationRecord* r : window) {
      ++hist.total_pixels;
      if (r->stationary || *r->speed < options.mag_threshold) {
        ++hist.background_count;
        continue;
      }
      OrientationBin& bin = hist.bins[static_cast<std::size_t>(orientation_bin(*r->orientation))];
      ++bin.pixel_count;
      bin.speed_sum += *r->speed;
    }
    return dominant_motion(hist, options.stationary_ratio);
  }
  if (!flow) {
    throw std::invalid_argument("track " + std::to_string(window.front()->track_id) + " of video '" +
                                window.front()->video_id +
                                "' has moving records without orientation/speed and no flow rasters");
  }
  std::vector<FlowWindowEntry> entries;
  for (const ObservationRecord* r : window) {
    const FlowField* f = flow(r->video_id, r->frame);
    if (f == nullptr) {
      throw std::invalid_argument("no flow raster for video '" + r->video_id + "' frame " +
                                  std::to_string(r->frame));
    }
    entries.push_back({f, r->box});
  }
  return dominant_motion(hof_window(entries, options.mag_threshold), options.stationary_ratio);
}

Category majority_category(const std::vector<const ObservationRecord*>& window) {
  std::array<int, kNumCategories> counts{};
  for (const ObservationRecord* r : window) ++counts[static_cast<std::size_t>(r->category)];
  int best = 0;
  for (int c = 1; c < kNumCategories; ++c) {
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
  }
  return static_cast<Category>(best);
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<Tracklet> build_tracklets(const std::vector<ObservationRecord>& records,
                                      const TrackletOptions& options, const FlowLookup& flow) {
  if (options.window < 1) throw std::invalid_argument("build_tracklets: window must be >= 1");
  std::map<std::pair<std::string, std::int64_t>, std::vector<const ObservationRecord*>> tracks;
  for (const ObservationRecord& r : records) tracks[{r.video_id, r.track_id}].push_back(&r);

  std::vector<Tracklet> out;
  std::vector<std::string> issues;
  for (auto& [key, members] : tracks) {
    std::stable_sort(members.begin(), members.end(),
                     [](const ObservationRecord* a, const ObservationRecord* b) { return a->frame < b->frame; });
    std::size_t i = 0;
    while (i < members.size()) {
      std::vector<const ObservationRecord*> window{members[i]};
      std::size_t j = i + 1;
      while (j < members.size() && static_cast<int>(window.size()) < options.window &&
             members[j]->frame == window.back()->frame + 1) {
        window.push_back(members[j]);
        ++j;
      }
      if (j < members.size() && members[j]->frame == window.back()->frame) {
        issues.push_back("track " + std::to_string(key.second) + " of video '" + key.first +
                         "' repeats frame " + std::to_string(members[j]->frame));
      }
      Tracklet t;
      t.video_id = key.first;
      t.track_id = key.second;
      t.start_frame = window.front()->frame;
      for (const ObservationRecord* r : window) t.boxes.push_back(r->box);
      t.feature.category = majority_category(window);
      try {
        t.feature.motion = window_motion(window, options, flow);
      } catch (const std::invalid_argument& e) {
        issues.push_back(e.what());
      }
      out.push_back(std::move(t));
      i = j;
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

// ---- tracklet records -------------------------------------------------------

std::string observation_to_line(const ObservationRecord& r) {
  nlohmann::json j;
  j["video_id"] = r.video_id;
  j["track_id"] = r.track_id;
  j["frame"] = r.frame;
  j["box"] = box_to_json(r.box);
  j["category"] = std::string(category_name(r.category));
  j["orientation"] = r.orientation ? nlohmann::json(*r.orientation) : nlohmann::json(nullptr);
  j["speed"] = r.speed ? nlohmann::json(*r.speed) : nlohmann::json(nullptr);
  j["stationary"] = r.stationary;
  return j.dump();
}

std::vector<ObservationRecord> parse_observations(std::istream& in) {
  std::vector<ObservationRecord> out;
  std::vector<std::string> issues;
  std::map<std::pair<std::string, std::int64_t>, std::int64_t> last_frame;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ObservationRecord r = observation_from_json(j);
      const auto key = std::make_pair(r.video_id, r.track_id);
      const auto it = last_frame.find(key);
      if (it != last_frame.end() && r.frame <= it->second) {
        throw std::invalid_argument("frame " + std::to_string(r.frame) + " does not follow frame " +
                                    std::to_string(it->second) + " of track " +
                                    std::to_string(r.track_id));
      }
      last_frame[key] = r.frame;
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      issues.push_back("line " + std::to_string(line_no) + ": unparseable record (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

std::vector<ObservationRecord> read_observations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_observations(in);
}

void write_observations(const std::filesystem::path& path,
                        const std::vector<ObservationRecord>& records) {
  auto out = open_output(path);
  for (const ObservationRecord& r : records) out << observation_to_line(r) << '\n';
}

std::vector<Tracklet> read_tracklets(const std::filesystem::path& path, const TrackletOptions& options,
                                     const FlowLookup& flow) {
  return build_tracklets(read_observations(path), options, flow);
}

// ---- ground-truth annotations ----------------------------------------------

std::vector<GroundTruthRegion> read_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<GroundTruthRegion> out;
  std::vector<std::string> issues;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("record must be an object");
      GroundTruthRegion g;
      g.video_id = require<std::string>(j, "video_id");
      g.frame = require<std::int64_t>(j, "frame");
      g.box = box_from_json(j.at("box"));
      g.track_id = require<std::int64_t>(j, "track_id");
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      issues.push_back("line " + std::to_string(line_no) + ": unparseable record (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<GroundTruthRegion>& annotations) {
  auto out = open_output(path);
  for (const GroundTruthRegion& g : annotations) {
    nlohmann::json j;
    j["video_id"] = g.video_id;
    j["frame"] = g.frame;
    j["box"] = box_to_json(g.box);
    j["track_id"] = g.track_id;
    out << j.dump() << '\n';
  }
}

// ---- Middlebury flow --------------------------------------------------------

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  const std::size_t n = static_cast<std::size_t>(flow.width()) * static_cast<std::size_t>(flow.height());
  std::vector<std::uint8_t> bytes(12 + 8 * n);
  const std::int32_t w = flow.width();
  const std::int32_t h = flow.height();
  std::memcpy(bytes.data(), &kFloMagic, 4);
  std::memcpy(bytes.data() + 4, &w, 4);
  std::memcpy(bytes.data() + 8, &h, 4);
  std::uint8_t* p = bytes.data() + 12;
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(p, &flow.u_data()[i], 4);
    std::memcpy(p + 4, &flow.v_data()[i], 4);
    p += 8;
  }
  return bytes;
}

FlowField decode_flo(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) {
    throw FormatError("flow raster truncated at byte offset " + std::to_string(bytes.size()) +
                      " (header needs 12 bytes)");
  }
  float magic = 0.0f;
  std::memcpy(&magic, bytes.data(), 4);
  if (magic != kFloMagic) throw FormatError("flow raster has wrong magic at byte offset 0");
  std::int32_t w = 0;
  std::int32_t h = 0;
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  if (w < 1 || w > (1 << 16)) throw FormatError("flow raster has invalid width at byte offset 4");
  if (h < 1 || h > (1 << 16)) throw FormatError("flow raster has invalid height at byte offset 8");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t expected = 12 + 8 * n;
  if (bytes.size() < expected) {
    throw FormatError("flow raster truncated at byte offset " + std::to_string(bytes.size()) +
                      " (expected " + std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    throw FormatError("flow raster has trailing data at byte offset " + std::to_string(expected));
  }
  std::vector<float> u(n);
  std::vector<float> v(n);
  const std::uint8_t* p = bytes.data() + 12;
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(&u[i], p, 4);
    std::memcpy(&v[i], p + 4, 4);
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      throw FormatError("flow raster has a non-finite value at byte offset " +
                        std::to_string(12 + 8 * i));
    }
    p += 8;
  }
  return FlowField(w, h, std::move(u), std::move(v));
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  write_bytes(path, encode_flo(flow));
}

FlowField read_flo(const std::filesystem::path& path) {
  try {
    return decode_flo(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---- region maps ------------------------------------------------------------

namespace {

std::string pgm_header(int width, int height) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

nlohmann::json provenance_to_json(const RegionProvenance& p) {
  nlohmann::json j;
  j["seed"] = p.seed;
  j["requested_k"] = p.requested_k;
  j["method"] = p.method;
  j["mu_kl"] = real_or_null(p.mu_kl);
  j["component_separation"] = real_or_null(p.component_separation);
  j["subsample_size"] = p.subsample_size;
  j["active_pixels"] = p.active_pixels;
  j["spatial_affinity"] = p.spatial_affinity;
  return j;
}

RegionProvenance provenance_from_json(const nlohmann::json& j) {
  RegionProvenance p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.requested_k = j.at("requested_k").get<int>();
  p.method = j.at("method").get<std::string>();
  p.mu_kl = real_or_nan(j, "mu_kl");
  p.component_separation = real_or_nan(j, "component_separation");
  p.subsample_size = j.at("subsample_size").get<std::size_t>();
  p.active_pixels = j.at("active_pixels").get<std::size_t>();
  p.spatial_affinity = j.at("spatial_affinity").get<double>();
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_pgm(const RegionMap& map) {
  if (map.num_regions() > 256) throw std::invalid_argument("region map: K > 256 cannot be stored as a graymap");
  const std::string header = pgm_header(map.width(), map.height());
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + map.labels().size());
  for (int label : map.labels()) bytes.push_back(static_cast<std::uint8_t>(label));
  return bytes;
}

std::tuple<int, int, std::vector<int>> decode_pgm(const std::vector<std::uint8_t>& bytes) {
  // The writer emits exactly "P5\n<W> <H>\n255\n"; anything else is rejected.
  std::size_t pos = 0;
  auto expect = [&](char c) {
    if (pos >= bytes.size()) throw FormatError("graymap truncated at byte offset " + std::to_string(pos));
    if (bytes[pos] != static_cast<std::uint8_t>(c)) {
      throw FormatError("graymap header mismatch at byte offset " + std::to_string(pos));
    }
    ++pos;
  };
  auto number = [&]() {
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && pos - start < 6) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    if (pos == start || (bytes[start] == '0')) {
      throw FormatError("graymap header has an invalid number at byte offset " + std::to_string(start));
    }
    return static_cast<int>(value);
  };
  expect('P');
  expect('5');
  expect('\n');
  const int width = number();
  expect(' ');
  const int height = number();
  expect('\n');
  expect('2');
  expect('5');
  expect('5');
  expect('\n');
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n) {
    throw FormatError("graymap truncated at byte offset " + std::to_string(bytes.size()) +
                      " (expected " + std::to_string(pos + n) + " bytes)");
  }
  if (bytes.size() > pos + n) {
    throw FormatError("graymap has trailing data at byte offset " + std::to_string(pos + n));
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = bytes[pos + i];
  return {height, width, std::move(labels)};
}

std::string region_map_hash(const RegionMap& map) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::int64_t value) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(value >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  feed(map.height());
  feed(map.width());
  feed(map.num_regions());
  for (int label : map.labels()) feed(label);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json region_map_sidecar(const RegionMap& map) {
  nlohmann::json j;
  j["K"] = map.num_regions();
  j["height"] = map.height();
  j["width"] = map.width();
  j["hash"] = region_map_hash(map);
  j["provenance"] = provenance_to_json(map.provenance());
  j["attribute_layout"] = AttributeLayout::to_json();
  nlohmann::json palette = nlohmann::json::array();
  for (const Rgb& c : default_palette(map.num_regions())) palette.push_back({c[0], c[1], c[2]});
  j["palette"] = palette;
  return j;
}

void write_region_map(const std::filesystem::path& stem, const RegionMap& map) {
  const std::vector<std::uint8_t> pgm = encode_pgm(map);
  write_bytes(std::filesystem::path(stem.string() + ".pgm"), pgm);
  write_json(std::filesystem::path(stem.string() + ".json"), region_map_sidecar(map));
}

RegionMap read_region_map(const std::filesystem::path& stem) {
  const std::filesystem::path pgm_path(stem.string() + ".pgm");
  const std::filesystem::path json_path(stem.string() + ".json");
  std::tuple<int, int, std::vector<int>> raster;
  try {
    raster = decode_pgm(read_bytes(pgm_path));
  } catch (const FormatError& e) {
    throw FormatError(pgm_path.string() + ": " + e.what());
  }
  auto& [height, width, labels] = raster;
  const nlohmann::json side = read_json(json_path);
  try {
    const int k = side.at("K").get<int>();
    if (side.at("height").get<int>() != height || side.at("width").get<int>() != width) {
      throw FormatError(json_path.string() + ": sidecar size does not match the raster");
    }
    RegionMap map(height, width, k, std::move(labels), provenance_from_json(side.at("provenance")));
    if (side.contains("hash") && side.at("hash").get<std::string>() != region_map_hash(map)) {
      throw FormatError(json_path.string() + ": sidecar hash does not match the raster");
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
}

// ---- model sets -------------------------------------------------------------

nlohmann::json model_set_to_json(const RegionalModelSet& models) {
  nlohmann::json j;
  j["format"] = "regionvad-model-set";
  j["region_map_hash"] = models.region_map_hash();
  j["encoding"] = models.encoding() == OrientationEncoding::radians ? "radians" : "cos_sin";
  j["dimension"] = models.dimension();
  nlohmann::json regions = nlohmann::json::array();
  for (const RegionModel& r : models.regions()) {
    nlohmann::json e;
    e["label"] = r.label;
    e["tier"] = std::string(to_string(r.tier));
    e["sample_count"] = r.sample_count;
    e["model"] = r.model ? to_json(*r.model) : nlohmann::json(nullptr);
    regions.push_back(std::move(e));
  }
  j["regions"] = std::move(regions);
  j["pooled"] = models.pooled() ? to_json(*models.pooled()) : nlohmann::json(nullptr);
  return j;
}

RegionalModelSet model_set_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "regionvad-model-set") {
      throw FormatError("model set: unexpected format tag");
    }
    const std::string enc = doc.at("encoding").get<std::string>();
    OrientationEncoding encoding;
    if (enc == "radians") {
      encoding = OrientationEncoding::radians;
    } else if (enc == "cos_sin") {
      encoding = OrientationEncoding::cos_sin;
    } else {
      throw FormatError("model set: unknown encoding '" + enc + "'");
    }
    std::vector<RegionModel> regions;
    for (const auto& e : doc.at("regions")) {
      RegionModel r;
      r.label = e.at("label").get<int>();
      r.tier = parse_model_tier(e.at("tier").get<std::string>());
      r.sample_count = e.at("sample_count").get<std::size_t>();
      if (!e.at("model").is_null()) r.model = mixture_from_json(e.at("model"));
      regions.push_back(std::move(r));
    }
    std::optional<GaussianMixture> pooled;
    if (!doc.at("pooled").is_null()) pooled = mixture_from_json(doc.at("pooled"));
    RegionalModelSet set(std::move(regions), std::move(pooled), encoding);
    set.set_region_map_hash(doc.at("region_map_hash").get<std::string>());
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model set: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model set: ") + e.what());
  }
}

void write_model_set(const std::filesystem::path& path, const RegionalModelSet& models) {
  write_json(path, model_set_to_json(models));
}

RegionalModelSet read_model_set(const std::filesystem::path& path) {
  return model_set_from_json(read_json(path));
}

// ---- scores -----------------------------------------------------------------

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

double parse_real(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty number");
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("trailing characters in number '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_tracklet_scores(const std::filesystem::path& path, const std::vector<TrackletScore>& scores) {
  auto out = open_output(path);
  for (const TrackletScore& s : scores) {
    nlohmann::json j;
    j["video_id"] = s.video_id;
    j["track_id"] = s.track_id;
    j["start_frame"] = s.start_frame;
    j["region"] = s.region;
    j["nll"] = s.nll;
    nlohmann::json boxes = nlohmann::json::array();
    for (const BoundingBox& b : s.boxes) boxes.push_back(box_to_json(b));
    j["boxes"] = std::move(boxes);
    out << j.dump() << '\n';
  }
}

std::vector<TrackletScore> read_tracklet_scores(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<TrackletScore> out;
  std::vector<std::string> issues;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("record must be an object");
      TrackletScore s;
      s.video_id = require<std::string>(j, "video_id");
      s.track_id = require<std::int64_t>(j, "track_id");
      s.start_frame = require<std::int64_t>(j, "start_frame");
      s.region = require<int>(j, "region");
      s.nll = require<double>(j, "nll");
      for (const auto& b : j.at("boxes")) s.boxes.push_back(box_from_json(b));
      if (s.boxes.empty()) throw std::invalid_argument("tracklet score without boxes");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      issues.push_back("line " + std::to_string(line_no) + ": unparseable record (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

void write_frame_scores(const std::filesystem::path& path, const std::vector<FrameScoreRow>& rows) {
  auto out = open_output(path);
  out << "video_id,frame,raw,smoothed\n";
  for (const FrameScoreRow& r : rows) {
    if (r.video_id.find_first_of(",\n\r") != std::string::npos) {
      throw std::invalid_argument("video id '" + r.video_id + "' cannot be written to a delimited table");
    }
    out << r.video_id << ',' << r.frame << ',' << format_real(r.raw) << ',' << format_real(r.smoothed)
        << '\n';
  }
}

std::vector<FrameScoreRow> read_frame_scores(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  // The writer terminates every row, so a missing final newline means the
  // last row was cut short.
  if (!bytes.empty() && bytes.back() != '\n') {
    throw FormatError(path.string() + ": truncated at byte offset " + std::to_string(bytes.size()));
  }
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(in, line) || line != "video_id,frame,raw,smoothed") {
    throw FormatError(path.string() + ": missing header line at byte offset 0");
  }
  std::vector<FrameScoreRow> rows;
  std::vector<std::string> issues;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split(line, ',');
    try {
      if (fields.size() != 4) throw std::invalid_argument("expected 4 fields");
      FrameScoreRow r;
      r.video_id = fields[0];
      std::size_t used = 0;
      r.frame = std::stoll(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("bad frame index");
      r.raw = parse_real(fields[2]);
      r.smoothed = parse_real(fields[3]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return rows;
}

std::vector<Prediction> predictions_from_scores(const std::vector<TrackletScore>& scores) {
  std::vector<Prediction> out;
  for (const TrackletScore& s : scores) {
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      out.push_back({s.video_id, s.start_frame + static_cast<std::int64_t>(i), s.boxes[i], s.nll});
    }
  }
  return out;
}

// ---- video lengths and run configuration -----------------------------------

void write_video_lengths(const std::filesystem::path& path, const VideoLengths& lengths) {
  nlohmann::json j;
  j["videos"] = nlohmann::json::object();
  for (const auto& [id, n] : lengths) j["videos"][id] = n;
  write_json(path, j);
}

VideoLengths read_video_lengths(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  VideoLengths out;
  try {
    for (const auto& [id, n] : j.at("videos").items()) {
      const auto frames = n.get<std::int64_t>();
      if (frames < 1) throw FormatError(path.string() + ": video '" + id + "' has no frames");
      out[id] = frames;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::vector<std::string> issues;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      issues.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    out[key] = trim(t.substr(eq + 1));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

ConfigMap read_config(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_config(in);
}

void write_config(const std::filesystem::path& path, const ConfigMap& config) {
  auto out = open_output(path);
  for (const auto& [k, v] : config) out << k << '=' << v << '\n';
}

// ---- small file helpers -----------------------------------------------------

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  auto in = open_input(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  auto out = open_output(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

}  // namespace regionvad
