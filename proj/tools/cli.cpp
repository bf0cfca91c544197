#include "cli.hpp"

#include "regionvad/evaluation.hpp"
#include "regionvad/io.hpp"
#include "regionvad/normalcy.hpp"
#include "regionvad/rng.hpp"
#include "regionvad/scoring.hpp"
#include "regionvad/select_k.hpp"
#include "regionvad/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace regionvad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KeyInfo {
  const char* name;
  const char* fallback;
  const char* help;
};

// Every key has a default; an empty default means "not set".
const std::vector<KeyInfo>& key_table() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "1", "base seed for every random stream"},
      {"out-dir", "out", "directory receiving all artifacts"},
      // simulate
      {"layout", "four_zone", "scene layout: four_zone, three_zone, two_lane, parking_street"},
      {"frames", "3000", "frames to simulate"},
      {"video-id", "video", "video id of simulated records"},
      {"anomaly-rate", "0", "probability that a spawned object is anomalous"},
      {"anomaly-kinds", "wrong-category,wrong-direction,overspeed,cross-zone", "comma-separated anomaly kinds"},
      {"overspeed-factor", "3", "speed multiplier of overspeed anomalies"},
      {"emit-flow", "false", "write flow rasters and leave moving records without orientation/speed"},
      // toy
      {"toy-train", "10000", "toy training samples"},
      {"toy-test", "10000", "toy test samples per half"},
      // tracklets
      {"tracklets", "", "tracklet observation records (JSON lines)"},
      {"flow-dir", "", "directory of <video>/<frame>.flo rasters"},
      {"t-w", "3", "tracklet window length in frames"},
      {"mag-threshold", "1.5", "flow magnitude threshold"},
      {"stationary-ratio", "0.9", "background ratio above which a tracklet is stationary"},
      // discovery
      {"height", "", "frame height in pixels"},
      {"width", "", "frame width in pixels"},
      {"k", "4", "number of regions"},
      {"k-candidates", "2,3,4,6,8", "comma-separated region counts for select-k"},
      {"method", "gmm-full", "gmm-full, gmm-diag, gmm-spherical, gmm-tied, kmeans or grid"},
      {"cell", "80", "cell size of the grid method"},
      {"spatial-affinity", "0", "weight of appended pixel coordinates"},
      {"subsample", "200000", "pixel subsample used to fit the clustering"},
      {"kernel-sigma", "adaptive", "heatmap kernel: adaptive or a fixed sigma in pixels"},
      {"min-mass", "0.001", "minimum heatmap mass of an active pixel"},
      // normalcy
      {"k-max", "20", "largest component count of the BIC search"},
      {"min-samples", "50", "samples needed for a region's own mixture"},
      {"encoding", "radians", "orientation encoding: radians or cos-sin"},
      {"em-max-iterations", "200", "EM iteration cap"},
      {"em-tolerance", "0.0001", "relative log-likelihood tolerance"},
      {"em-ridge", "0.000001", "covariance ridge"},
      {"em-restarts", "3", "k-means++ restarts"},
      // artifacts
      {"region-map", "", "region map stem (<stem>.pgm and <stem>.json)"},
      {"models", "", "regional model set"},
      {"videos", "", "video lengths"},
      {"sigma", "7", "temporal smoothing sigma in frames"},
      {"frame-scores", "", "frame score table"},
      {"tracklet-scores", "", "tracklet scores (JSON lines)"},
      {"annotations", "", "ground-truth anomaly annotations (JSON lines)"},
      {"iou-threshold", "0.1", "IoU needed for a region match"},
      {"track-fraction", "0.1", "fraction of a track that must be detected"},
      {"hold-to-full-range", "true", "hold the final detection rate out to one false positive per frame"},
  };
  return keys;
}

class Context {
 public:
  Context(std::string command, ConfigMap config, std::ostream& err)
      : command_(std::move(command)), config_(std::move(config)), err_(err) {}

  const std::string& command() const { return command_; }
  const ConfigMap& config() const { return config_; }

  std::string text(const std::string& key) const { return config_.at(key); }
  bool has(const std::string& key) const { return !config_.at(key).empty(); }

  long integer(const std::string& key, long min_value) const {
    const std::string& v = config_.at(key);
    std::size_t used = 0;
    long out = 0;
    try {
      out = std::stol(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) invalid(key, "expected an integer, got '" + v + "'");
    if (out < min_value) invalid(key, "must be >= " + std::to_string(min_value));
    return out;
  }

  std::uint64_t seed() const {
    const std::string& v = config_.at("seed");
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
      if (!v.empty() && v.front() != '-') out = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) invalid("seed", "expected a non-negative integer, got '" + v + "'");
    return out;
  }

  double real(const std::string& key) const {
    const std::string& v = config_.at(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) invalid(key, "expected a number, got '" + v + "'");
    return out;
  }

  bool flag(const std::string& key) const {
    const std::string& v = config_.at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    invalid(key, "expected true or false, got '" + v + "'");
  }

  std::vector<long> integer_list(const std::string& key, long min_value) const {
    std::vector<long> out;
    std::stringstream ss(config_.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size()) invalid(key, "expected comma-separated integers");
      if (v < min_value) invalid(key, "every entry must be >= " + std::to_string(min_value));
      out.push_back(v);
    }
    if (out.empty()) invalid(key, "needs at least one entry");
    return out;
  }

  /// Existing input file named by `key`.
  fs::path input(const std::string& key) const {
    if (!has(key)) invalid(key, "required input is not set");
    fs::path p(config_.at(key));
    if (!fs::exists(p)) throw ValidationError({"missing input for '" + key + "': " + p.string()});
    return p;
  }

  /// Region map stem whose .pgm and .json both exist.
  fs::path region_map_stem() const {
    if (!has("region-map")) invalid("region-map", "required input is not set");
    const std::string stem = config_.at("region-map");
    for (const char* ext : {".pgm", ".json"}) {
      const fs::path p(stem + ext);
      if (!fs::exists(p)) throw ValidationError({"missing input for 'region-map': " + p.string()});
    }
    return fs::path(stem);
  }

  fs::path out_dir() const { return fs::path(config_.at("out-dir")); }
  fs::path output(const std::string& name) const { return out_dir() / name; }

  void log(const std::string& message) const { err_ << "[regionvad " << command_ << "] " << message << '\n'; }

  [[noreturn]] static void invalid(const std::string& key, const std::string& message) {
    throw ValidationError({"key '" + key + "': " + message});
  }

 private:
  std::string command_;
  ConfigMap config_;
  std::ostream& err_;
};

// ---- option builders ----------------------------------------------------------

EmConfig em_config(const Context& ctx, std::uint64_t stream) {
  EmConfig em;
  em.max_iterations = static_cast<int>(ctx.integer("em-max-iterations", 1));
  em.rel_tolerance = ctx.real("em-tolerance");
  em.ridge = ctx.real("em-ridge");
  em.restarts = static_cast<int>(ctx.integer("em-restarts", 1));
  em.seed = derive_seed(ctx.seed(), stream);
  try {
    em.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError({e.what()});
  }
  return em;
}

OrientationEncoding encoding(const Context& ctx) {
  const std::string v = ctx.text("encoding");
  if (v == "radians") return OrientationEncoding::radians;
  if (v == "cos-sin") return OrientationEncoding::cos_sin;
  Context::invalid("encoding", "expected radians or cos-sin, got '" + v + "'");
}

NormalcyOptions normalcy_options(const Context& ctx) {
  NormalcyOptions n;
  n.k_max = static_cast<int>(ctx.integer("k-max", 1));
  n.min_samples = static_cast<std::size_t>(ctx.integer("min-samples", 1));
  n.em = em_config(ctx, 2);
  n.encoding = encoding(ctx);
  return n;
}

KernelPolicy kernel_policy(const Context& ctx) {
  if (ctx.text("kernel-sigma") == "adaptive") return KernelPolicy::adaptive_sigma();
  const double sigma = ctx.real("kernel-sigma");
  if (!(sigma > 0.0)) Context::invalid("kernel-sigma", "must be adaptive or > 0");
  return KernelPolicy::fixed_sigma(sigma);
}

DiscoveryOptions discovery_options(const Context& ctx) {
  DiscoveryOptions d;
  try {
    d.method = parse_cluster_method(ctx.text("method"));
  } catch (const std::invalid_argument& e) {
    Context::invalid("method", e.what());
  }
  d.spatial_affinity = ctx.real("spatial-affinity");
  if (d.spatial_affinity < 0.0) Context::invalid("spatial-affinity", "must be >= 0");
  d.subsample = static_cast<std::size_t>(ctx.integer("subsample", 1));
  d.min_mass = ctx.real("min-mass");
  d.seed = ctx.seed();
  d.em = em_config(ctx, 1);
  return d;
}

std::pair<int, int> frame_size(const Context& ctx) {
  if (!ctx.has("height") || !ctx.has("width")) {
    throw ValidationError({"keys 'height' and 'width' are required (the simulate summary reports them)"});
  }
  return {static_cast<int>(ctx.integer("height", 1)), static_cast<int>(ctx.integer("width", 1))};
}

fs::path flow_path(const fs::path& dir, const std::string& video, std::int64_t frame) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06lld.flo", static_cast<long long>(frame));
  return dir / video / name;
}

std::vector<Tracklet> load_tracklets(const Context& ctx) {
  const fs::path path = ctx.input("tracklets");
  TrackletOptions opts;
  opts.window = static_cast<int>(ctx.integer("t-w", 1));
  opts.mag_threshold = ctx.real("mag-threshold");
  opts.stationary_ratio = ctx.real("stationary-ratio");
  FlowLookup lookup;
  if (ctx.has("flow-dir")) {
    const fs::path dir = ctx.input("flow-dir");
    auto cache = std::make_shared<std::map<std::pair<std::string, std::int64_t>, std::unique_ptr<FlowField>>>();
    lookup = [dir, cache](const std::string& video, std::int64_t frame) -> const FlowField* {
      auto& slot = (*cache)[{video, frame}];
      if (!slot) {
        const fs::path p = flow_path(dir, video, frame);
        if (!fs::exists(p)) return nullptr;
        slot = std::make_unique<FlowField>(read_flo(p));
      }
      return slot.get();
    };
  }
  auto tracklets = read_tracklets(path, opts, lookup);
  ctx.log("loaded " + std::to_string(tracklets.size()) + " tracklets from " + path.string());
  return tracklets;
}

json real_or_null(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

json curve_to_json(const std::vector<CurvePoint>& curve) {
  json out = json::array();
  for (const CurvePoint& p : curve) {
    out.push_back({{"threshold", std::isfinite(p.threshold) ? json(p.threshold) : json("inf")},
                   {"fpr", p.fpr},
                   {"detection_rate", p.detection_rate}});
  }
  return out;
}

void write_regions(const Context& ctx, const RegionMap& map) {
  write_region_map(ctx.output("regions"), map);
  write_bytes(ctx.output("regions.ppm"), render_region_map(map, default_palette(map.num_regions())));
}

json region_summary(const RegionMap& map) {
  json sizes = json::array();
  for (std::size_t s : map.region_sizes()) sizes.push_back(s);
  return {{"K", map.num_regions()}, {"hash", region_map_hash(map)}, {"region_sizes", sizes}};
}

// ---- subcommands ----------------------------------------------------------------

SceneLayout layout_by_name(const std::string& name) {
  if (name == "four_zone") return SceneLayout::four_zone();
  if (name == "three_zone") return SceneLayout::three_zone();
  if (name == "two_lane") return SceneLayout::two_lane();
  if (name == "parking_street") return SceneLayout::parking_street();
  Context::invalid("layout", "unknown layout '" + name + "'");
}

json cmd_simulate(const Context& ctx) {
  const SceneLayout layout = layout_by_name(ctx.text("layout"));
  AnomalySpec spec;
  spec.rate = ctx.real("anomaly-rate");
  if (spec.rate < 0.0 || spec.rate > 1.0) Context::invalid("anomaly-rate", "must lie in [0, 1]");
  spec.overspeed_factor = ctx.real("overspeed-factor");
  spec.kinds.clear();
  std::stringstream ss(ctx.text("anomaly-kinds"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      spec.kinds.push_back(parse_anomaly_kind(item));
    } catch (const std::invalid_argument& e) {
      Context::invalid("anomaly-kinds", e.what());
    }
  }
  const std::int64_t frames = ctx.integer("frames", 1);
  const std::string video = ctx.text("video-id");
  if (video.empty()) Context::invalid("video-id", "must not be empty");

  SynthOutput sim = simulate_scene(layout, frames, spec, ctx.seed(), video);
  ctx.log("simulated " + std::to_string(sim.tracks.size()) + " tracks over " + std::to_string(frames) + " frames");

  std::vector<ObservationRecord> records = sim.records;
  const bool flow = ctx.flag("emit-flow");
  if (flow) {
    for (ObservationRecord& r : records) {
      if (!r.stationary) {
        r.orientation.reset();
        r.speed.reset();
      }
    }
    std::vector<std::int64_t> all(static_cast<std::size_t>(frames));
    for (std::int64_t f = 0; f < frames; ++f) all[static_cast<std::size_t>(f)] = f;
    const std::vector<FlowField> rasters = emit_flow_rasters(sim, all);
    fs::create_directories(ctx.output("flow") / video);
    for (std::int64_t f = 0; f < frames; ++f) {
      write_flo(flow_path(ctx.output("flow"), video, f), rasters[static_cast<std::size_t>(f)]);
    }
  }
  write_observations(ctx.output("observations.jsonl"), records);
  write_annotations(ctx.output("annotations.jsonl"), sim.annotations);
  write_region_map(ctx.output("true_regions"), sim.true_regions);
  write_video_lengths(ctx.output("videos.json"), {{video, frames}});
  json scene = sim.config;
  scene["layout"] = layout.to_json();
  write_json(ctx.output("scene.json"), scene);

  std::size_t anomalous = 0;
  for (const SimulatedTrack& t : sim.tracks) anomalous += t.anomaly.has_value();
  return {{"video_id", video},
          {"frames", frames},
          {"height", layout.height},
          {"width", layout.width},
          {"records", records.size()},
          {"tracks", sim.tracks.size()},
          {"anomalous_tracks", anomalous},
          {"annotations", sim.annotations.size()},
          {"zone_gaps", sim.has_gaps},
          {"flow_rasters", flow ? frames : 0}};
}

json cmd_toy(const Context& ctx) {
  const ToyRuleSet rules = ToyRuleSet::street_defaults();
  const int n_train = static_cast<int>(ctx.integer("toy-train", 1));
  const int n_test = static_cast<int>(ctx.integer("toy-test", 1));
  const ToyReport report = run_toy_experiment(rules, n_train, n_test, ctx.seed(),
                                              static_cast<int>(ctx.integer("k-max", 1)));
  json table = json::array();
  for (const auto& [k, b] : report.bic_table) table.push_back({{"k", k}, {"bic", b}});
  json doc = {{"auc", real_or_null(report.auc)},
              {"selected_components", report.selected_components},
              {"train_size", report.train_size},
              {"test_normal", report.test_normal},
              {"test_anomalous", report.test_anomalous},
              {"bic_table", table}};
  write_json(ctx.output("toy_report.json"), doc);
  ctx.log("toy AUC " + (report.auc ? format_real(*report.auc) : std::string("undefined")));
  doc.erase("bic_table");
  return doc;
}

json cmd_discover(const Context& ctx) {
  const auto [height, width] = frame_size(ctx);
  RegionMap map;
  if (ctx.text("method") == "grid") {
    map = grid_region_map(height, width, static_cast<int>(ctx.integer("cell", 1)));
  } else {
    const DiscoveryOptions opts = discovery_options(ctx);
    const int k = static_cast<int>(ctx.integer("k", 2));
    const std::vector<Tracklet> tracklets = load_tracklets(ctx);
    const ActivityHeatmap heatmap = build_heatmap(height, width, tracklets, kernel_policy(ctx));
    map = discover_regions(heatmap, k, opts);
  }
  write_regions(ctx, map);
  ctx.log("wrote " + std::to_string(map.num_regions()) + " regions");
  return region_summary(map);
}

json cmd_select_k(const Context& ctx) {
  const auto [height, width] = frame_size(ctx);
  const DiscoveryOptions opts = discovery_options(ctx);
  const NormalcyOptions normalcy = normalcy_options(ctx);
  std::vector<int> candidates;
  for (long k : ctx.integer_list("k-candidates", 2)) candidates.push_back(static_cast<int>(k));
  const std::vector<Tracklet> tracklets = load_tracklets(ctx);
  const ActivityHeatmap heatmap = build_heatmap(height, width, tracklets, kernel_policy(ctx));
  const SelectKResult result = select_k(heatmap, tracklets, candidates, opts, normalcy);

  json table = json::array();
  for (const auto& [k, mu] : result.table) {
    table.push_back({{"k", k}, {"mu_kl", std::isfinite(mu) ? json(mu) : json(nullptr)}});
    ctx.log("K=" + std::to_string(k) + " mu_KL=" + format_real(mu));
  }
  json doc = {{"best_k", result.best_k}, {"table", table}};
  write_json(ctx.output("select_k.json"), doc);
  if (result.best_map) {
    write_regions(ctx, *result.best_map);
    doc["regions"] = region_summary(*result.best_map);
  }
  return doc;
}

json cmd_train(const Context& ctx) {
  const RegionMap map = read_region_map(ctx.region_map_stem());
  const NormalcyOptions normalcy = normalcy_options(ctx);
  const std::vector<Tracklet> tracklets = load_tracklets(ctx);
  const std::vector<Matrix> grouped = group_features_by_region(tracklets, map, normalcy.encoding);
  RegionalModelSet models = train_regional_models(grouped, normalcy);
  models.set_region_map_hash(region_map_hash(map));
  write_model_set(ctx.output("models.json"), models);

  json regions = json::array();
  for (const RegionModel& r : models.regions()) {
    regions.push_back({{"label", r.label},
                       {"tier", std::string(to_string(r.tier))},
                       {"samples", r.sample_count},
                       {"components", r.model ? r.model->num_components() : 0}});
  }
  const double mu = regional_mu_kl(models, grouped);
  ctx.log("trained " + std::to_string(models.num_regions()) + " regional models");
  return {{"region_map_hash", models.region_map_hash()},
          {"regions", regions},
          {"mu_kl", std::isfinite(mu) ? json(mu) : json(nullptr)}};
}

RegionalModelSet load_bound_models(const Context& ctx, const RegionMap& map) {
  RegionalModelSet models = read_model_set(ctx.input("models"));
  const std::string hash = region_map_hash(map);
  if (models.region_map_hash() != hash) {
    throw ValidationError({"region map hash " + hash + " does not match the model set's recorded hash " +
                           models.region_map_hash()});
  }
  if (models.num_regions() != map.num_regions()) {
    throw ValidationError({"model set covers " + std::to_string(models.num_regions()) + " regions, map has " +
                           std::to_string(map.num_regions())});
  }
  return models;
}

json cmd_score(const Context& ctx) {
  const RegionMap map = read_region_map(ctx.region_map_stem());
  const RegionalModelSet models = load_bound_models(ctx, map);
  const VideoLengths lengths = read_video_lengths(ctx.input("videos"));
  const double sigma = ctx.real("sigma");
  if (sigma < 0.0) Context::invalid("sigma", "must be >= 0");
  const std::vector<Tracklet> tracklets = load_tracklets(ctx);

  std::vector<TrackletScore> scores;
  scores.reserve(tracklets.size());
  std::map<std::string, std::vector<TrackletScore>> per_video;
  std::vector<std::string> issues;
  for (const Tracklet& t : tracklets) {
    const auto it = lengths.find(t.video_id);
    if (it == lengths.end()) {
      issues.push_back("video '" + t.video_id + "' has no length entry");
      continue;
    }
    if (t.end_frame() > it->second) {
      issues.push_back("track " + std::to_string(t.track_id) + " of video '" + t.video_id +
                       "' runs past the video length");
      continue;
    }
    scores.push_back(score_tracklet(models, map, t));
    per_video[t.video_id].push_back(scores.back());
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<FrameScoreRow> rows;
  for (const auto& [video, length] : lengths) {
    const auto found = per_video.find(video);
    const std::vector<TrackletScore> empty;
    const std::vector<TrackletScore>& vs = found == per_video.end() ? empty : found->second;
    const FrameScoreSeries raw = frame_scores(vs, length, 0.0, video);
    const FrameScoreSeries smoothed = smooth(raw, sigma);
    for (std::int64_t f = 0; f < length; ++f) {
      const auto i = static_cast<std::size_t>(f);
      rows.push_back({video, f, raw.scores[i], smoothed.scores[i]});
    }
  }
  write_tracklet_scores(ctx.output("tracklet_scores.jsonl"), scores);
  write_frame_scores(ctx.output("frame_scores.csv"), rows);
  ctx.log("scored " + std::to_string(scores.size()) + " tracklets over " + std::to_string(rows.size()) + " frames");
  return {{"tracklets", scores.size()}, {"frames", rows.size()}, {"videos", lengths.size()}, {"sigma", sigma}};
}

json cmd_evaluate(const Context& ctx) {
  const std::vector<FrameScoreRow> rows = read_frame_scores(ctx.input("frame-scores"));
  const std::vector<TrackletScore> tscores = read_tracklet_scores(ctx.input("tracklet-scores"));
  const std::vector<GroundTruthRegion> truth = read_annotations(ctx.input("annotations"));
  const VideoLengths lengths = read_video_lengths(ctx.input("videos"));

  std::set<std::pair<std::string, std::int64_t>> anomalous;
  for (const GroundTruthRegion& g : truth) anomalous.insert({g.video_id, g.frame});
  std::vector<double> smoothed;
  std::vector<double> raw;
  std::vector<int> labels;
  for (const FrameScoreRow& r : rows) {
    smoothed.push_back(r.smoothed);
    raw.push_back(r.raw);
    labels.push_back(anomalous.count({r.video_id, r.frame}) ? 1 : 0);
  }
  std::int64_t total_frames = 0;
  for (const auto& [video, n] : lengths) total_frames += n;
  if (total_frames < 1) throw ValidationError({"video lengths list no frames"});

  DetectionOptions opts;
  opts.iou_threshold = ctx.real("iou-threshold");
  opts.track_fraction = ctx.real("track-fraction");
  opts.hold_to_full_range = ctx.flag("hold-to-full-range");
  const std::vector<Prediction> predictions = predictions_from_scores(tscores);
  const auto rb = rbdc(predictions, truth, total_frames, opts);
  const auto tb = tbdc(predictions, truth, total_frames, opts);
  const auto auc = frame_auc(smoothed, labels);
  const auto auc_raw = frame_auc(raw, labels);

  const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  json doc = {{"auc", real_or_null(auc)},
              {"auc_unsmoothed", real_or_null(auc_raw)},
              {"rbdc", rb ? json(rb->area) : json(nullptr)},
              {"tbdc", tb ? json(tb->area) : json(nullptr)},
              {"frames", rows.size()},
              {"anomalous_frames", positives},
              {"total_frames", total_frames},
              {"predictions", predictions.size()},
              {"ground_truth_regions", truth.size()}};
  json report = doc;
  report["rbdc_curve"] = rb ? curve_to_json(rb->curve) : json::array();
  report["tbdc_curve"] = tb ? curve_to_json(tb->curve) : json::array();
  write_json(ctx.output("metrics.json"), report);
  ctx.log("AUC " + (auc ? format_real(*auc) : std::string("undefined")));
  return doc;
}

json cmd_explain(const Context& ctx) {
  const RegionMap map = read_region_map(ctx.region_map_stem());
  const RegionalModelSet models = load_bound_models(ctx, map);
  const std::vector<Tracklet> tracklets = load_tracklets(ctx);
  std::vector<std::vector<std::size_t>> sources;
  const std::vector<Matrix> grouped = group_features_by_region(tracklets, map, models.encoding(), &sources);

  json regions = json::array();
  std::size_t total = 0;
  for (int label = 0; label < models.num_regions(); ++label) {
    const RegionModel& rm = models.region(label);
    json protos = json::array();
    const auto ul = static_cast<std::size_t>(label);
    for (const Prototype& p : prototypical_events(models, label, grouped[ul])) {
      const Tracklet& t = tracklets[sources[ul][p.sample_index]];
      json mean = json::array();
      for (Eigen::Index i = 0; i < p.mean.size(); ++i) mean.push_back(p.mean[i]);
      protos.push_back({{"component", p.component},
                        {"weight", p.weight},
                        {"mean", mean},
                        {"distance", p.distance},
                        {"category", std::string(category_name(t.feature.category))},
                        {"orientation", t.feature.motion.orientation},
                        {"speed", t.feature.motion.speed},
                        {"stationary", t.feature.motion.stationary},
                        {"video_id", t.video_id},
                        {"track_id", t.track_id},
                        {"start_frame", t.start_frame}});
    }
    total += protos.size();
    regions.push_back({{"label", label},
                       {"tier", std::string(to_string(rm.tier))},
                       {"samples", rm.sample_count},
                       {"prototypes", protos}});
  }
  write_json(ctx.output("prototypes.json"), {{"regions", regions}});
  ctx.log("listed " + std::to_string(total) + " prototypical events");
  return {{"regions", models.num_regions()}, {"prototypes", total}};
}

std::vector<std::uint8_t> activity_raster(const ActivityHeatmap& heatmap) {
  const int h = heatmap.height();
  const int w = heatmap.width();
  std::vector<double> mass(static_cast<std::size_t>(h) * w, 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (double v : heatmap.pixel(x, y)) s += v;
      mass[static_cast<std::size_t>(y) * w + x] = s;
      peak = std::max(peak, s);
    }
  }
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double s : mass) {
    out.push_back(static_cast<std::uint8_t>(peak > 0.0 ? std::lround(255.0 * std::sqrt(s / peak)) : 0));
  }
  return out;
}

json cmd_render(const Context& ctx) {
  const RegionMap map = read_region_map(ctx.region_map_stem());
  write_bytes(ctx.output("regions.ppm"), render_region_map(map, default_palette(map.num_regions())));
  json doc = {{"regions", region_summary(map)}, {"outputs", {"regions.ppm"}}};
  if (ctx.has("tracklets")) {
    const std::vector<Tracklet> tracklets = load_tracklets(ctx);
    const ActivityHeatmap heatmap = build_heatmap(map.height(), map.width(), tracklets, kernel_policy(ctx));
    write_bytes(ctx.output("activity.pgm"), activity_raster(heatmap));
    doc["outputs"].push_back("activity.pgm");
  }
  return doc;
}

using Handler = std::function<json(const Context&)>;

struct Command {
  const char* name;
  const char* help;
  Handler handler;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"simulate", "generate a synthetic scene with tracklets, annotations and true regions", cmd_simulate},
      {"toy", "run the tabular toy experiment", cmd_toy},
      {"discover", "discover regions from training tracklets", cmd_discover},
      {"select-k", "choose the region count by mean pairwise symmetric KL", cmd_select_k},
      {"train", "train one normalcy model per region", cmd_train},
      {"score", "score tracklets and build frame score series", cmd_score},
      {"evaluate", "compute frame AUC, RBDC and TBDC from score files", cmd_evaluate},
      {"explain", "list the prototypical events of every region", cmd_explain},
      {"render", "render the region map and the activity heatmap", cmd_render},
  };
  return list;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeyInfo& k : key_table()) out.emplace_back(k.name);
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial-context video anomaly detection by region discovery", "regionvad"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::map<std::string, std::string> flags;
  for (const Command& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key=value configuration file");
    for (const KeyInfo& k : key_table()) {
      sub->add_option(std::string("--") + k.name, flags[k.name], k.help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "[regionvad] " << e.what() << '\n';
    return kExitValidation;
  }
  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();

  try {
    ConfigMap config;
    for (const KeyInfo& k : key_table()) config[k.name] = k.fallback;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw ValidationError({"missing input for 'config': " + config_path});
      std::vector<std::string> unknown;
      for (const auto& [key, value] : read_config(config_path)) {
        if (config.count(key) == 0) {
          unknown.push_back("unknown configuration key '" + key + "'");
          continue;
        }
        config[key] = value;
      }
      if (!unknown.empty()) throw ValidationError(std::move(unknown));
    }
    for (const KeyInfo& k : key_table()) {
      const CLI::Option* opt = chosen->get_option(std::string("--") + k.name);
      if (opt->count() > 0) config[k.name] = flags[k.name];
    }

    const Context ctx(name, config, err);
    ctx.seed();
    fs::create_directories(ctx.out_dir());
    write_config(ctx.output("config." + name + ".txt"), config);

    const auto& list = commands();
    const auto it = std::find_if(list.begin(), list.end(), [&](const Command& c) { return name == c.name; });
    json summary = it->handler(ctx);
    json doc = {{"command", name}, {"status", "ok"}, {"out_dir", ctx.out_dir().string()}, {"result", summary}};
    out << doc.dump(2) << '\n';
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "[regionvad " << name << "] " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    err << "[regionvad " << name << "] invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "[regionvad " << name << "] invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "[regionvad " << name << "] failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace regionvad::cli
