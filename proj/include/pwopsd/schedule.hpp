#pragma once

#include <array>
#include <string>
#include <string_view>

namespace pwopsd {

/// Sigmoid reliability weight w(r) = w_min + (1 - w_min)·σ((r - tau)/scale).
struct PositionSchedule {
  double w_min = 0.25;
  double tau = 0.30;
  double scale = 0.10;

  void validate() const;
  bool operator==(const PositionSchedule&) const = default;
};

/// (t - 0.5)/L for one-based t in [1, L].
double position_fraction(int t, int length);

/// 1/(1 + e^{-x}), evaluated on the branch that never overflows.
double logistic(double x);

double weight(double r, const PositionSchedule& schedule);

/// Mild, Moderate, Sharp, Aggressive; case-insensitive.
PositionSchedule preset(std::string_view name);

inline constexpr std::array<std::string_view, 4> kPresetNames = {"Mild", "Moderate", "Sharp", "Aggressive"};

}  // namespace pwopsd
