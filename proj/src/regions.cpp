#include "regionvad/regions.hpp"

#include "regionvad/kmeans.hpp"
#include "regionvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace regionvad {

namespace {

constexpr double kFar = 1e20;

// Squared distance transform of a sampled function along one line.
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d,
                           std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kFar;
  z[1] = kFar;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[0] = q;
      z[0] = -kFar;
      z[1] = kFar;
      k = 0;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kFar;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

std::vector<std::int64_t> squared_distance_to_active(int height, int width,
                                                     const std::vector<int>& partial) {
  std::vector<double> grid(partial.size());
  for (std::size_t i = 0; i < partial.size(); ++i) grid[i] = partial[i] >= 0 ? 0.0 : kFar;
  const int longest = std::max(height, width);
  std::vector<double> f(static_cast<std::size_t>(longest));
  std::vector<double> d(static_cast<std::size_t>(longest));
  std::vector<int> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest) + 1);
  f.resize(static_cast<std::size_t>(height));
  d.resize(static_cast<std::size_t>(height));
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = grid[static_cast<std::size_t>(y) * width + x];
    distance_transform_1d(f, d, v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = d[y];
  }
  f.resize(static_cast<std::size_t>(width));
  d.resize(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f[x] = grid[static_cast<std::size_t>(y) * width + x];
    distance_transform_1d(f, d, v, z);
    for (int x = 0; x < width; ++x) grid[static_cast<std::size_t>(y) * width + x] = d[x];
  }
  std::vector<std::int64_t> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = std::llround(grid[i]);
  return out;
}

std::int64_t isqrt(std::int64_t n) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

CovarianceMode mode_for(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::gmm_full: return CovarianceMode::full;
    case ClusterMethod::gmm_diagonal: return CovarianceMode::diagonal;
    case ClusterMethod::gmm_spherical: return CovarianceMode::spherical;
    case ClusterMethod::gmm_tied: return CovarianceMode::tied;
    case ClusterMethod::kmeans: break;
  }
  return CovarianceMode::full;
}

double closed_form_separation(const GaussianMixture& gmm) {
  const int k = gmm.num_components();
  if (k < 2) return 0.0;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double a = gaussian_kl(gmm.mean(i), gmm.covariance(i), gmm.mean(j), gmm.covariance(j));
      const double b = gaussian_kl(gmm.mean(j), gmm.covariance(j), gmm.mean(i), gmm.covariance(i));
      total += 2.0 * (a + b);
    }
  }
  return total / static_cast<double>(k * (k - 1));
}

}  // namespace

std::string_view to_string(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::gmm_full: return "gmm-full";
    case ClusterMethod::gmm_diagonal: return "gmm-diag";
    case ClusterMethod::gmm_spherical: return "gmm-spherical";
    case ClusterMethod::gmm_tied: return "gmm-tied";
    case ClusterMethod::kmeans: return "kmeans";
  }
  return "gmm-full";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "gmm-full" || name == "gmm") return ClusterMethod::gmm_full;
  if (name == "gmm-diag" || name == "gmm-diagonal") return ClusterMethod::gmm_diagonal;
  if (name == "gmm-spherical") return ClusterMethod::gmm_spherical;
  if (name == "gmm-tied") return ClusterMethod::gmm_tied;
  if (name == "kmeans") return ClusterMethod::kmeans;
  throw std::invalid_argument("unknown clustering method: " + std::string(name));
}

RegionMap::RegionMap(int height, int width, std::vector<int> labels, RegionProvenance provenance)
    : height_(height), width_(width), labels_(std::move(labels)), provenance_(std::move(provenance)) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("RegionMap: empty frame");
  if (labels_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("RegionMap: label count does not match the frame");
  }
  int mx = -1;
  for (int l : labels_) {
    if (l < 0) throw std::invalid_argument("RegionMap: negative label");
    mx = std::max(mx, l);
  }
  k_ = mx + 1;
  const auto sizes = region_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) {
      throw std::invalid_argument("RegionMap: label " + std::to_string(i) + " never occurs");
    }
  }
}

RegionMap::RegionMap(int height, int width, int k, std::vector<int> labels,
                     RegionProvenance provenance)
    : RegionMap(height, width, std::move(labels), std::move(provenance)) {
  if (k != k_) {
    throw std::invalid_argument("RegionMap: declared K=" + std::to_string(k) +
                                " but labels span " + std::to_string(k_));
  }
}

std::vector<std::size_t> RegionMap::region_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k_), 0);
  for (int l : labels_) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

std::vector<int> fill_nearest_labels(int height, int width, const std::vector<int>& partial) {
  if (partial.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("fill_nearest_labels: size mismatch");
  }
  if (std::none_of(partial.begin(), partial.end(), [](int l) { return l >= 0; })) {
    throw std::invalid_argument("fill_nearest_labels: no labelled pixels");
  }
  const std::vector<std::int64_t> dist = squared_distance_to_active(height, width, partial);
  std::vector<int> out = partial;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * width + x;
      if (partial[idx] >= 0) continue;
      const std::int64_t d2 = dist[idx];
      const std::int64_t r = isqrt(d2);
      int best = -1;
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const std::int64_t yy = y + dy;
        if (yy < 0 || yy >= height) continue;
        const std::int64_t rem = d2 - dy * dy;
        const std::int64_t dx = isqrt(rem);
        if (dx * dx != rem) continue;
        for (const std::int64_t xx : {x - dx, x + dx}) {
          if (xx < 0 || xx >= width) continue;
          const int l = partial[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
          if (l >= 0 && (best < 0 || l < best)) best = l;
        }
      }
      if (best < 0) throw std::logic_error("fill_nearest_labels: distance transform mismatch");
      out[idx] = best;
    }
  }
  return out;
}

int relabel_by_size(std::vector<int>& labels, int k) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int old : order) {
    if (counts[old] == 0) continue;
    remap[old] = next++;
  }
  for (int& l : labels) l = remap[l];
  return next;
}

RegionMap discover_regions(const ActivityHeatmap& heatmap, int k, const DiscoveryOptions& options) {
  if (k < 2) throw std::invalid_argument("discover_regions: K must be >= 2");
  if (options.spatial_affinity < 0.0) {
    throw std::invalid_argument("discover_regions: spatial affinity must be >= 0");
  }
  const PixelFeatures pf = pixel_features(heatmap, options.min_mass);
  const std::size_t n_active = pf.pixels.size();
  if (n_active < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("discover_regions: fewer active pixels than regions");
  }
  const int w = heatmap.width();
  const int h = heatmap.height();

  Matrix features = pf.features;
  if (options.spatial_affinity > 0.0) {
    const Eigen::Index d = features.cols();
    features.conservativeResize(Eigen::NoChange, d + 2);
    for (std::size_t i = 0; i < n_active; ++i) {
      const int px = pf.pixels[i] % w;
      const int py = pf.pixels[i] / w;
      features(static_cast<Eigen::Index>(i), d) = options.spatial_affinity * px / w;
      features(static_cast<Eigen::Index>(i), d + 1) = options.spatial_affinity * py / h;
    }
  }

  // seeded uniform subsample without replacement
  std::vector<Eigen::Index> chosen(n_active);
  std::iota(chosen.begin(), chosen.end(), Eigen::Index{0});
  const std::size_t s = std::min(options.subsample, n_active);
  if (s < n_active) {
    Rng rng(derive_seed(options.seed, 0x5ab5));
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n_active - i));
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(s);
    std::sort(chosen.begin(), chosen.end());
  }
  if (s < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("discover_regions: subsample smaller than K");
  }
  Matrix fit_rows(static_cast<Eigen::Index>(s), features.cols());
  for (std::size_t i = 0; i < s; ++i) fit_rows.row(static_cast<Eigen::Index>(i)) = features.row(chosen[i]);

  std::vector<int> active_label(n_active);
  RegionProvenance prov;
  prov.seed = options.seed;
  prov.requested_k = k;
  prov.method = std::string(to_string(options.method));
  prov.subsample_size = s;
  prov.active_pixels = n_active;
  prov.spatial_affinity = options.spatial_affinity;

  if (options.method == ClusterMethod::kmeans) {
    const KMeansResult km = kmeans(fit_rows, k, options.seed, options.em.restarts, 300);
    for (std::size_t i = 0; i < n_active; ++i) {
      active_label[i] = nearest_center(km.centers, features.row(static_cast<Eigen::Index>(i)).transpose());
    }
  } else {
    EmConfig em = options.em;
    em.seed = options.seed;
    const GaussianMixture gmm = fit_em(fit_rows, k, mode_for(options.method), em);
    prov.component_separation = closed_form_separation(gmm);
    constexpr Eigen::Index kChunk = 65536;
    for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(n_active); start += kChunk) {
      const Eigen::Index len = std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(n_active) - start);
      const Matrix logp = gmm.weighted_component_log_pdf(features.middleRows(start, len));
      for (Eigen::Index r = 0; r < len; ++r) {
        Eigen::Index best;
        logp.row(r).maxCoeff(&best);
        active_label[static_cast<std::size_t>(start + r)] = static_cast<int>(best);
      }
    }
  }

  std::vector<int> partial(static_cast<std::size_t>(h) * w, -1);
  for (std::size_t i = 0; i < n_active; ++i) partial[static_cast<std::size_t>(pf.pixels[i])] = active_label[i];
  std::vector<int> labels = fill_nearest_labels(h, w, partial);
  relabel_by_size(labels, k);
  return RegionMap(h, w, std::move(labels), std::move(prov));
}

RegionMap grid_region_map(int height, int width, int cell) {
  if (cell < 1) throw std::invalid_argument("grid_region_map: cell must be >= 1");
  const int cols = (width + cell - 1) / cell;
  std::vector<int> labels(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      labels[static_cast<std::size_t>(y) * width + x] = (y / cell) * cols + x / cell;
    }
  }
  RegionProvenance prov;
  prov.method = "grid";
  prov.requested_k = ((height + cell - 1) / cell) * cols;
  return RegionMap(height, width, std::move(labels), std::move(prov));
}

Palette default_palette(int k) {
  Palette palette;
  palette.reserve(static_cast<std::size_t>(std::max(0, k)));
  for (int i = 0; i < k; ++i) {
    // golden-ratio hue walk with alternating saturation/value bands
    const double hue = std::fmod(i * 0.618033988749895, 1.0) * 6.0;
    const double sat = (i / 12) % 2 == 0 ? 0.70 : 0.45;
    const double val = (i / 6) % 2 == 0 ? 0.95 : 0.70;
    const int sector = static_cast<int>(hue) % 6;
    const double f = hue - std::floor(hue);
    const double p = val * (1 - sat);
    const double q = val * (1 - sat * f);
    const double t = val * (1 - sat * (1 - f));
    double r = val, g = t, b = p;
    switch (sector) {
      case 1: r = q; g = val; b = p; break;
      case 2: r = p; g = val; b = t; break;
      case 3: r = p; g = q; b = val; break;
      case 4: r = t; g = p; b = val; break;
      case 5: r = val; g = p; b = q; break;
      default: break;
    }
    Rgb c{static_cast<std::uint8_t>(std::lround(r * 255)), static_cast<std::uint8_t>(std::lround(g * 255)),
          static_cast<std::uint8_t>(std::lround(b * 255))};
    while (std::find(palette.begin(), palette.end(), c) != palette.end()) {
      c[2] = static_cast<std::uint8_t>(c[2] + 1);
      if (c[2] == 0) c[1] = static_cast<std::uint8_t>(c[1] + 1);
    }
    palette.push_back(c);
  }
  return palette;
}

std::vector<std::uint8_t> render_region_map(const RegionMap& map, const Palette& palette) {
  if (static_cast<int>(palette.size()) < map.num_regions()) {
    throw std::invalid_argument("render_region_map: palette has fewer colours than regions");
  }
  std::ostringstream header;
  header << "P6\n" << map.width() << ' ' << map.height() << "\n255\n";
  const std::string hs = header.str();
  std::vector<std::uint8_t> out(hs.begin(), hs.end());
  out.reserve(out.size() + map.labels().size() * 3);
  for (int l : map.labels()) {
    const Rgb& c = palette[static_cast<std::size_t>(l)];
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

std::vector<int> decode_rendered_labels(const std::vector<std::uint8_t>& ppm, const Palette& palette) {
  std::string text(ppm.begin(), ppm.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(ppm.size(), 64)));
  std::istringstream in(text);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw std::invalid_argument("decode_rendered_labels: not a P6 image");
  }
  const std::size_t offset = static_cast<std::size_t>(in.tellg()) + 1;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (ppm.size() != offset + 3 * n) throw std::invalid_argument("decode_rendered_labels: truncated image");
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb c{ppm[offset + 3 * i], ppm[offset + 3 * i + 1], ppm[offset + 3 * i + 2]};
    const auto it = std::find(palette.begin(), palette.end(), c);
    if (it == palette.end()) throw std::invalid_argument("decode_rendered_labels: colour not in palette");
    labels[i] = static_cast<int>(it - palette.begin());
  }
  return labels;
}

}  // namespace regionvad
