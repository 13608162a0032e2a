#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pcem/errors.hpp"

namespace pcem {

/// Equidistant grid over [0, horizon] with the final point clamped to the
/// horizon: interior steps all equal dt, the last step lies in (0, dt].
/// Points are computed on demand so multi-million-step grids stay cheap.
class TimeGrid {
public:
  static TimeGrid build(double horizon, double dt) {
    if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon)
      raise(ErrorCode::invalid_step,
            "time grid requires 0 < dt <= horizon, got dt=" +
                std::to_string(dt) + " horizon=" + std::to_string(horizon));
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    std::size_t n;
    if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio))
      n = static_cast<std::size_t>(rounded); // horizon divisible by dt
    else
      n = static_cast<std::size_t>(std::ceil(ratio));
    if (n == 0) n = 1;
    while (n > 1 && static_cast<double>(n - 1) * dt >= horizon) --n;
    return TimeGrid(horizon, dt, n);
  }

  double horizon() const noexcept { return horizon_; }
  double dt() const noexcept { return dt_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_points() const noexcept { return n_steps_ + 1; }

  double time(std::size_t i) const {
    return i == n_steps_ ? horizon_ : static_cast<double>(i) * dt_;
  }

  /// Length of step k (from point k to point k+1). Interior steps are dt
  /// exactly; the final step is the clamped remainder.
  double step(std::size_t k) const {
    return k + 1 == n_steps_
               ? horizon_ - static_cast<double>(n_steps_ - 1) * dt_
               : dt_;
  }

  bool has_short_final_step() const {
    return step(n_steps_ - 1) != dt_;
  }

  std::vector<double> times() const {
    std::vector<double> out(n_points());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = time(i);
    return out;
  }

private:
  TimeGrid(double horizon, double dt, std::size_t n_steps)
      : horizon_(horizon), dt_(dt), n_steps_(n_steps) {}

  double horizon_;
  double dt_;
  std::size_t n_steps_;
};

inline TimeGrid build_grid(double horizon, double dt) {
  return TimeGrid::build(horizon, dt);
}

} // namespace pcem
