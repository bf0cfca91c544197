#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace regionvad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Axis-aligned pixel box. A pixel (x, y) lies inside when x1 <= x < x2 and
/// y1 <= y < y2.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return (x2 > x1 && y2 > y1) ? width() * height() : 0.0; }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Integer pixel span [begin, end) covered by a box along one axis, clipped
/// to [0, limit).
struct PixelSpan {
  int begin = 0;
  int end = 0;
  bool empty() const { return end <= begin; }
};
PixelSpan pixel_span(double lo, double hi, int limit);

enum class Category : int { person = 0, bicycle = 1, car = 2, motorcycle = 3 };
inline constexpr int kNumCategories = 4;

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);
inline bool is_valid_category(Category c) {
  const int v = static_cast<int>(c);
  return v >= 0 && v < kNumCategories;
}

/// Orientation binning shared by flow histograms, heatmap channels and
/// features: 12 bins of width pi/6 starting at angle 0.
inline constexpr int kOrientationBins = 12;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kOrientationBinWidth = kPi / 6.0;

/// Maps an angle (radians, any range) to its bin on half-open intervals
/// [b*pi/6, (b+1)*pi/6). Angles within 1e-9 bin widths of an edge snap to the
/// upper bin so exact multiples of pi/6 are not lost to rounding.
int orientation_bin(double angle);
inline double orientation_bin_center(int bin) {
  return (bin + 0.5) * kOrientationBinWidth;
}

}  // namespace regionvad
