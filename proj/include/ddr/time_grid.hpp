#pragma once

#include <cmath>
#include <string>

#include "ddr/error.hpp"

namespace ddr {

/// Uniform grid t_m = m * dt, m = 0..M, on [0, T].
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(1.0, 0.01) {}

  TimeGrid(double T, double dt) : T_(T), dt_(dt) {
    if (!(T > 0.0) || !(dt > 0.0) || !std::isfinite(T) || !std::isfinite(dt))
      throw InvalidInput("time grid needs finite T > 0 and dt > 0");
    const double steps = std::round(T / dt);
    if (steps < 1.0 || std::abs(steps * dt - T) > 1e-12 * std::max(1.0, T))
      throw InvalidInput("T = " + std::to_string(T) + " is not an integer multiple of dt = " +
                         std::to_string(dt));
    steps_ = static_cast<int>(steps);
  }

  double final_time() const noexcept { return T_; }
  double step() const noexcept { return dt_; }
  /// Number of Euler steps M; the grid has M + 1 nodes.
  int steps() const noexcept { return steps_; }
  double time(int m) const noexcept { return m * dt_; }

 private:
  double T_;
  double dt_;
  int steps_ = 0;
};

}  // namespace ddr
