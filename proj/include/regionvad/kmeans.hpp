#pragma once

#include "regionvad/types.hpp"

#include <cstdint>
#include <vector>

namespace regionvad {

struct KMeansResult {
  Matrix centers;            // k x D
  std::vector<int> labels;   // per sample
  double inertia = 0.0;      // sum of squared distances to assigned centers
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations; best inertia over
/// `restarts` seeded runs. Empty clusters are re-seeded at the sample farthest
/// from its center.
KMeansResult kmeans(const Matrix& samples, int k, std::uint64_t seed, int restarts = 3,
                    int max_iterations = 100);

/// Index of the nearest center (ties go to the smaller index).
int nearest_center(const Matrix& centers, const Eigen::Ref<const Vector>& x);

}  // namespace regionvad
