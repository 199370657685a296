#include "pwopsd/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pwopsd/error.hpp"

namespace pwopsd {

void PositionSchedule::validate() const {
  if (!(w_min >= 0.0 && w_min <= 1.0)) throw InvalidInput("schedule: w_min must lie in [0, 1]");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("schedule: tau must lie in (0, 1)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("schedule: scale must be positive");
}

double position_fraction(int t, int length) {
  if (length < 1 || t < 1 || t > length) throw InvalidInput("position_fraction: need 1 <= t <= L");
  return (static_cast<double>(t) - 0.5) / static_cast<double>(length);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double weight(double r, const PositionSchedule& schedule) {
  return schedule.w_min + (1.0 - schedule.w_min) * logistic((r - schedule.tau) / schedule.scale);
}

PositionSchedule preset(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mild") return {0.50, 0.20, 0.20};
  if (lower == "moderate") return {0.25, 0.30, 0.10};
  if (lower == "sharp") return {0.10, 0.40, 0.05};
  if (lower == "aggressive") return {0.05, 0.50, 0.05};
  throw InvalidInput("unknown schedule preset: " + std::string(name));
}

}  // namespace pwopsd
