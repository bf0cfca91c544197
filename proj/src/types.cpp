#include "regionvad/types.hpp"

#include <array>
#include <cmath>

namespace regionvad {

namespace {
constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "person", "bicycle", "car", "motorcycle"};
}

PixelSpan pixel_span(double lo, double hi, int limit) {
  PixelSpan s;
  const double b = std::ceil(lo);
  const double e = std::ceil(hi);
  s.begin = static_cast<int>(std::max(0.0, std::min(b, static_cast<double>(limit))));
  s.end = static_cast<int>(std::max(0.0, std::min(e, static_cast<double>(limit))));
  return s;
}

std::string_view category_name(Category c) {
  return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<Category> parse_category(std::string_view name) {
  for (int i = 0; i < kNumCategories; ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  return std::nullopt;
}

int orientation_bin(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  const double t = a / kOrientationBinWidth;
  double b = std::floor(t);
  const double nearest = std::round(t);
  if (nearest > b && nearest - t < 1e-9) b = nearest;
  int bin = static_cast<int>(b);
  if (bin >= kOrientationBins) bin -= kOrientationBins;
  return bin;
}

}  // namespace regionvad
