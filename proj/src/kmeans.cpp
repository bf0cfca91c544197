#include "regionvad/kmeans.hpp"

#include "regionvad/rng.hpp"

#include <limits>
#include <stdexcept>

namespace regionvad {

namespace {

Matrix seed_plus_plus(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick;
    if (total > 0.0) {
      pick = static_cast<Eigen::Index>(rng.categorical(d2));
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centers.row(c)).squaredNorm());
    }
  }
  return centers;
}

}  // namespace

int nearest_center(const Matrix& centers, const Eigen::Ref<const Vector>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KMeansResult kmeans(const Matrix& samples, int k, std::uint64_t seed, int restarts,
                    int max_iterations) {
  const Eigen::Index n = samples.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer samples than clusters");
  if (restarts < 1) restarts = 1;

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Matrix centers = seed_plus_plus(samples, k, rng);
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    int it = 0;
    for (; it < max_iterations; ++it) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = nearest_center(centers, samples.row(i).transpose());
        dist[i] = (samples.row(i) - centers.row(c)).squaredNorm();
        if (c != labels[i]) {
          labels[i] = c;
          changed = true;
        }
      }
      if (!changed && it > 0) break;
      Matrix sums = Matrix::Zero(k, samples.cols());
      std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[i]) += samples.row(i);
        ++counts[labels[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
          continue;
        }
        // empty cluster: move it to the worst-served sample
        Eigen::Index far = 0;
        for (Eigen::Index i = 1; i < n; ++i) {
          if (dist[i] > dist[far]) far = i;
        }
        centers.row(c) = samples.row(far);
        dist[far] = 0.0;
      }
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      labels[i] = nearest_center(centers, samples.row(i).transpose());
      inertia += (samples.row(i) - centers.row(labels[i])).squaredNorm();
    }
    if (inertia < best.inertia) {
      best.centers = centers;
      best.labels = labels;
      best.inertia = inertia;
      best.iterations = it;
    }
  }
  return best;
}

}  // namespace regionvad
