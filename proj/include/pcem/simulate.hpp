#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pcem/ctmc.hpp"
#include "pcem/errors.hpp"
#include "pcem/models.hpp"
#include "pcem/rng.hpp"
#include "pcem/schemes.hpp"
#include "pcem/time_grid.hpp"

namespace pcem {

/// Brownian and regime streams for one replication.
struct SeedPair {
  std::uint64_t master_seed = 0;
  std::uint64_t replication_index = 0;

  SeedSpec brownian() const {
    return {master_seed, replication_index, StreamPurpose::brownian};
  }
  SeedSpec regime() const {
    return {master_seed, replication_index, StreamPurpose::regime};
  }
};

/// One simulated path: regimes and increments per step, states per grid
/// point. If a state went non-finite the path is flagged, `overflow_index`
/// is the first bad grid point, and no further stepping happened (states
/// past it are NaN).
struct PathResult {
  TimeGrid grid = TimeGrid::build(1.0, 1.0);
  std::size_t dimension = 1;
  std::size_t drivers = 1;
  RegimePath regimes;
  std::vector<double> increments; // n_steps * drivers, row-major
  std::vector<double> states;     // n_points * dimension, row-major
  bool overflowed = false;
  std::size_t overflow_index = 0;

  std::span<const double> state(std::size_t k) const {
    return {states.data() + k * dimension, dimension};
  }

  std::span<const double> increment(std::size_t k) const {
    return {increments.data() + k * drivers, drivers};
  }

  /// Number of leading grid points with finite states.
  std::size_t finite_points() const {
    return overflowed ? overflow_index : grid.n_points();
  }
};

/// Independent N(0, step length) increments, one per driver per step.
inline std::vector<double> brownian_increments(const TimeGrid& grid,
                                               std::size_t drivers,
                                               RandomStream& stream) {
  std::vector<double> out(grid.n_steps() * drivers);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double scale = std::sqrt(grid.step(k));
    for (std::size_t j = 0; j < drivers; ++j)
      out[k * drivers + j] = stream.normal() * scale;
  }
  return out;
}

namespace detail {

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void mark_overflow(PathResult& path, std::size_t first_bad_point) {
  path.overflowed = true;
  path.overflow_index = first_bad_point;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t idx = (first_bad_point + 1) * path.dimension;
       idx < path.states.size(); ++idx)
    path.states[idx] = nan;
}

} // namespace detail

/// Runs the two-stage scheme along the grid against externally supplied
/// regimes and increments (the form every coupled experiment uses).
template <SwitchingModel M>
PathResult simulate_path_with_noise(const M& model, const SchemeParams& params,
                                    const TimeGrid& grid,
                                    RegimePath regimes,
                                    std::vector<double> increments,
                                    std::span<const double> y0) {
  const std::size_t d = model.dimension();
  const std::size_t m = model.drivers();
  if (y0.size() != d)
    raise(ErrorCode::length_mismatch,
          "initial state length does not match model dimension");
  if (regimes.n_points() != grid.n_points() ||
      increments.size() != grid.n_steps() * m)
    raise(ErrorCode::length_mismatch,
          "noise inputs do not match the time grid");

  PathResult path;
  path.grid = grid;
  path.dimension = d;
  path.drivers = m;
  path.regimes = std::move(regimes);
  path.increments = std::move(increments);
  path.states.assign(grid.n_points() * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) path.states[k] = y0[k];

  if (!detail::all_finite(y0)) {
    detail::mark_overflow(path, 0);
    return path;
  }

  PcemStepper<M> stepper(model, params);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    std::span<const double> cur(path.states.data() + k * d, d);
    std::span<double> next(path.states.data() + (k + 1) * d, d);
    std::span<const double> dw(path.increments.data() + k * m, m);
    stepper.step(cur, path.regimes.regime(k), grid.step(k), dw, next);
    if (!detail::all_finite(next)) {
      detail::mark_overflow(path, k + 1);
      break;
    }
  }
  return path;
}

/// Generates fresh regime and Brownian streams from the seed pair and runs
/// the scheme. The two streams are distinct by construction, keeping the
/// chain independent of the driving noise.
template <SwitchingModel M>
PathResult simulate_path(const M& model, const SchemeParams& params,
                         const TimeGrid& grid, const GeneratorMatrix& q,
                         std::span<const double> y0, std::size_t r0,
                         const SeedPair& seeds) {
  RandomStream regime_stream{RandomStream(seeds.regime())};
  RegimePath regimes = simulate_regime_path(q, grid, r0, regime_stream);
  RandomStream brownian_stream{RandomStream(seeds.brownian())};
  std::vector<double> increments =
      brownian_increments(grid, model.drivers(), brownian_stream);
  return simulate_path_with_noise(model, params, grid, std::move(regimes),
                                  std::move(increments), y0);
}

/// Reference path for scalar linear models: the explicit-solution recursion
///   y(t_{k+1}) = y(t_k) * exp(h*a(r_k) + dW_k*b(r_k) - h*b(r_k)^2 / 2),
/// driven by the same regimes and increments as the numeric path. For small
/// steps this tracks the exact solution (the regime is frozen within each
/// step, exactly as the numeric scheme freezes it).
inline PathResult exact_linear_path(const LinearSwitchingModel& model,
                                    const TimeGrid& grid,
                                    RegimePath regimes,
                                    std::vector<double> increments,
                                    double y0) {
  if (regimes.n_points() != grid.n_points() ||
      increments.size() != grid.n_steps())
    raise(ErrorCode::length_mismatch,
          "noise inputs do not match the time grid");

  PathResult path;
  path.grid = grid;
  path.dimension = 1;
  path.drivers = 1;
  path.regimes = std::move(regimes);
  path.increments = std::move(increments);
  path.states.assign(grid.n_points(), 0.0);
  path.states[0] = y0;

  if (!std::isfinite(y0)) {
    detail::mark_overflow(path, 0);
    return path;
  }
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const std::size_t r = path.regimes.regime(k);
    const double h = grid.step(k);
    const double a = model.a(r);
    const double b = model.b(r);
    const double exponent =
        h * a + path.increments[k] * b - 0.5 * h * b * b;
    path.states[k + 1] = path.states[k] * std::exp(exponent);
    if (!std::isfinite(path.states[k + 1])) {
      detail::mark_overflow(path, k + 1);
      break;
    }
  }
  return path;
}

/// A numeric path and its reference sharing one grid, one regime path and
/// one increment sequence.
struct CoupledPaths {
  PathResult numeric;
  PathResult reference;
};

/// Draws one regime path and one increment sequence, then feeds both to the
/// scheme and to the explicit-solution recursion. The coupling is exact:
/// both members see identical noise.
inline CoupledPaths simulate_coupled(const LinearSwitchingModel& model,
                                     const SchemeParams& params,
                                     const TimeGrid& grid,
                                     const GeneratorMatrix& q, double y0,
                                     std::size_t r0, const SeedPair& seeds) {
  RandomStream regime_stream{RandomStream(seeds.regime())};
  RegimePath regimes = simulate_regime_path(q, grid, r0, regime_stream);
  RandomStream brownian_stream{RandomStream(seeds.brownian())};
  std::vector<double> increments = brownian_increments(grid, 1, brownian_stream);

  CoupledPaths coupled;
  coupled.numeric = simulate_path_with_noise(
      model, params, grid, regimes, increments, std::span<const double>(&y0, 1));
  coupled.reference = exact_linear_path(model, grid, std::move(regimes),
                                        std::move(increments), y0);
  return coupled;
}

} // namespace pcem
