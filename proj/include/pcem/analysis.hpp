#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcem/ctmc.hpp"
#include "pcem/errors.hpp"
#include "pcem/models.hpp"
#include "pcem/parallel.hpp"
#include "pcem/quadrature.hpp"
#include "pcem/schemes.hpp"
#include "pcem/simulate.hpp"
#include "pcem/time_grid.hpp"

namespace pcem {

/// Worst squared distance between coupled paths, taken over the common
/// finite prefix. `overflow` is set when either member overflowed.
struct SupError {
  double value = 0.0;
  bool overflow = false;
};

inline SupError sup_squared_error(const CoupledPaths& coupled) {
  const PathResult& num = coupled.numeric;
  const PathResult& ref = coupled.reference;
  if (num.grid.n_points() != ref.grid.n_points() ||
      num.dimension != ref.dimension)
    raise(ErrorCode::length_mismatch, "coupled paths do not share a grid");

  SupError result;
  result.overflow = num.overflowed || ref.overflowed;
  const std::size_t prefix =
      std::min(num.finite_points(), ref.finite_points());
  for (std::size_t k = 0; k < prefix; ++k) {
    double dist_sq = 0.0;
    for (std::size_t c = 0; c < num.dimension; ++c) {
      const double diff = num.states[k * num.dimension + c] -
                          ref.states[k * ref.dimension + c];
      dist_sq += diff * diff;
    }
    result.value = std::max(result.value, dist_sq);
  }
  return result;
}

/// Monte Carlo summary of sup-squared errors over independent replications.
/// Replications that overflowed are excluded from the mean but counted.
struct ErrorStats {
  std::size_t n_replications = 0;
  double mean_sup_sq = 0.0;
  double std_error = 0.0;
  std::size_t overflow_count = 0;
};

namespace detail {

inline ErrorStats reduce_error_stats(std::span<const SupError> per_rep) {
  ErrorStats stats;
  stats.n_replications = per_rep.size();
  std::size_t used = 0;
  double mean = 0.0;
  for (const SupError& e : per_rep) {
    if (e.overflow) {
      ++stats.overflow_count;
      continue;
    }
    ++used;
    mean += e.value;
  }
  if (used == 0)
    raise(ErrorCode::all_overflowed,
          "every replication overflowed; no finite statistics");
  mean /= static_cast<double>(used);
  double ss = 0.0;
  for (const SupError& e : per_rep) {
    if (e.overflow) continue;
    const double d = e.value - mean;
    ss += d * d;
  }
  stats.mean_sup_sq = mean;
  stats.std_error =
      used > 1 ? std::sqrt(ss / static_cast<double>(used - 1) /
                           static_cast<double>(used))
               : 0.0;
  return stats;
}

} // namespace detail

/// Mean and standard error of the sup-squared error for one scheme at one
/// step size. Deterministic in master_seed regardless of thread count:
/// replication i always uses streams (master_seed, i, purpose) and the
/// reduction runs in index order.
inline ErrorStats monte_carlo_error(const LinearSwitchingModel& model,
                                    const SchemeParams& params,
                                    const TimeGrid& grid,
                                    const GeneratorMatrix& q, double y0,
                                    std::size_t r0,
                                    std::size_t n_replications,
                                    std::uint64_t master_seed,
                                    unsigned threads = 1) {
  if (n_replications < 2)
    raise(ErrorCode::domain_error, "need at least 2 replications");
  std::vector<SupError> per_rep(n_replications);
  parallel_for_indexed(n_replications, threads, [&](std::size_t rep) {
    const CoupledPaths coupled = simulate_coupled(
        model, params, grid, q, y0, r0, SeedPair{master_seed, rep});
    per_rep[rep] = sup_squared_error(coupled);
  });
  return detail::reduce_error_stats(per_rep);
}

/// Least-squares fit of log(mean) against log(delta); a slope of 1 in the
/// squared-error statistic corresponds to strong order one half.
struct ConvergenceFit {
  std::vector<std::pair<double, double>> points; // (delta, mean)
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline ConvergenceFit
fit_strong_order(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3)
    raise(ErrorCode::domain_error,
          "convergence fit needs at least 3 step sizes, got " +
              std::to_string(points.size()));
  double min_dt = points[0].first, max_dt = points[0].first;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& [dt, mean] = points[i];
    if (!(dt > 0.0))
      raise(ErrorCode::domain_error, "step sizes must be positive");
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (points[j].first == dt)
        raise(ErrorCode::domain_error, "step sizes must be distinct");
    if (!(mean > 0.0))
      raise(ErrorCode::degenerate_fit,
            "non-positive mean at delta = " + std::to_string(dt) +
                "; log-log fit undefined");
    min_dt = std::min(min_dt, dt);
    max_dt = std::max(max_dt, dt);
  }
  if (max_dt / min_dt < 100.0)
    raise(ErrorCode::domain_error,
          "step-size ladder must span at least two decades");

  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [dt, mean] : points) {
    const double x = std::log(dt);
    const double y = std::log(mean);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  ConvergenceFit fit;
  fit.points = std::move(points);
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0;
  for (const auto& [dt, mean] : fit.points) {
    const double resid =
        std::log(mean) - (fit.intercept + fit.slope * std::log(dt));
    ss_res += resid * resid;
  }
  const double ss_tot = syy - sy * sy / n;
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

/// Per-step amplification of the two-stage scheme on the linear stability
/// test equation, as an explicit quadratic in the standard normal Z.
///
/// With u = lambda*dt < 0, a*dt = (1 - 1.5*alpha)*u, b^2*dt = -alpha*u and
/// abar = a - eta*b^2, substituting the linear coefficients into the
/// predictor and corrector gives the next-to-current state ratio
///   G(Z) = | 1 + abar*dt*(theta*(1 + a*dt + b*sqrt(dt)*Z) + 1 - theta)
///              + b*sqrt(dt)*Z*(eta*(1 + a*dt + b*sqrt(dt)*Z) + 1 - eta) |
///        = | c0 + c1*Z + c2*Z^2 |
/// with
///   c0 = 1 + abar*dt*(1 + theta*a*dt)
///   c1 = b*sqrt(dt)*(1 + eta*a*dt + theta*abar*dt)
///   c2 = eta*b^2*dt.
/// Only the products lambda*dt enter, so (lambda_dt, alpha) fix the ratio.
struct TransferCoefficients {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  static TransferCoefficients from(double theta, double eta, double lambda_dt,
                                   double alpha) {
    if (!(lambda_dt < 0.0))
      raise(ErrorCode::domain_error, "lambda*dt must be negative");
    if (!(alpha >= 0.0 && alpha < 1.0))
      raise(ErrorCode::domain_error, "alpha must lie in [0, 1)");
    const double a_dt = (1.0 - 1.5 * alpha) * lambda_dt;
    const double b_sq_dt = -alpha * lambda_dt;
    const double b_sqrt_dt = std::sqrt(b_sq_dt);
    const double abar_dt = a_dt - eta * b_sq_dt;
    TransferCoefficients c;
    c.c0 = 1.0 + abar_dt * (1.0 + theta * a_dt);
    c.c1 = b_sqrt_dt * (1.0 + eta * a_dt + theta * abar_dt);
    c.c2 = eta * b_sq_dt;
    return c;
  }

  double amplification(double z) const {
    return std::abs(c0 + c1 * z + c2 * z * z);
  }
};

/// E[G^p] for the scheme on the test equation, by adaptive Gauss-Hermite
/// quadrature on the quadratic amplification polynomial.
inline double transfer_moment(double theta, double eta, double lambda_dt,
                              double alpha, double p) {
  const TransferCoefficients c =
      TransferCoefficients::from(theta, eta, lambda_dt, alpha);
  return expect_abs_poly_pow(c.c0, c.c1, c.c2, p);
}

inline double transfer_moment(const SchemeParams& params, double lambda_dt,
                              double alpha, double p) {
  if (params.dimension() != 1)
    raise(ErrorCode::dimension_unsupported,
          "the transfer moment is defined on the scalar test equation");
  return transfer_moment(params.theta[0], params.eta[0], lambda_dt, alpha, p);
}

struct StabilityPoint {
  double lambda_dt = 0.0;
  double alpha = 0.0;
  double p = 0.0;
  double moment = 0.0;
  bool stable = false;
};

/// Inclusive linspace over [min, max] with `count` nodes.
struct LatticeAxis {
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  double node(std::size_t i) const {
    if (count == 1) return min;
    return min + (max - min) * static_cast<double>(i) /
                     static_cast<double>(count - 1);
  }
};

/// Boolean stability mask over a (lambda*dt, alpha) lattice for fixed p.
/// Stored row-major with lambda_dt as the slow axis.
struct StabilityRegion {
  std::string scheme_name;
  SchemeParams params;
  double p = 0.0;
  LatticeAxis lambda_dt;
  LatticeAxis alpha;
  std::vector<StabilityPoint> points;

  const StabilityPoint& at(std::size_t i_lambda, std::size_t i_alpha) const {
    return points[i_lambda * alpha.count + i_alpha];
  }

  std::size_t stable_count() const {
    std::size_t n = 0;
    for (const auto& pt : points) n += pt.stable ? 1 : 0;
    return n;
  }
};

/// The stability verdict at one node: strict moment < 1, with nodes inside
/// the 1e-10 band around 1 classified unstable (the criterion is strict).
inline bool stable_moment(double moment) {
  return moment < 1.0 && (1.0 - moment) >= 1e-10;
}

inline StabilityRegion scan_stability_region(const SchemeParams& params,
                                             std::string scheme_name,
                                             double p, LatticeAxis lambda_dt,
                                             LatticeAxis alpha,
                                             unsigned threads = 1) {
  if (lambda_dt.count == 0 || alpha.count == 0)
    raise(ErrorCode::domain_error, "lattice axes must be non-empty");
  if (!(lambda_dt.min < 0.0) || !(lambda_dt.max < 0.0))
    raise(ErrorCode::domain_error, "lambda*dt lattice must be negative");
  if (!(alpha.min >= 0.0) || !(alpha.max < 1.0))
    raise(ErrorCode::domain_error, "alpha lattice must lie in [0, 1)");

  StabilityRegion region;
  region.scheme_name = std::move(scheme_name);
  region.params = params;
  region.p = p;
  region.lambda_dt = lambda_dt;
  region.alpha = alpha;
  region.points.resize(lambda_dt.count * alpha.count);
  const double theta = params.theta.at(0);
  const double eta = params.eta.at(0);
  parallel_for_indexed(region.points.size(), threads, [&](std::size_t idx) {
    const std::size_t i = idx / alpha.count;
    const std::size_t j = idx % alpha.count;
    StabilityPoint& pt = region.points[idx];
    pt.lambda_dt = lambda_dt.node(i);
    pt.alpha = alpha.node(j);
    pt.p = p;
    pt.moment = transfer_moment(theta, eta, pt.lambda_dt, pt.alpha, p);
    pt.stable = stable_moment(pt.moment);
  });
  return region;
}

/// Per-regime and overall verdicts of the state-wise stability test: every
/// regime's (lambda(i)*dt, alpha(i), p) node must be stable.
struct StateStability {
  std::vector<bool> per_regime;
  bool overall = true;
};

inline StateStability state_p_stable(const StabilityTestModel& model,
                                     const SchemeParams& params, double dt,
                                     double p) {
  if (!(dt > 0.0)) raise(ErrorCode::invalid_step, "dt must be positive");
  StateStability verdict;
  verdict.per_regime.resize(model.n_regimes());
  for (std::size_t i = 0; i < model.n_regimes(); ++i) {
    const double moment =
        transfer_moment(params, model.lambda(i) * dt, model.alpha(i), p);
    verdict.per_regime[i] = stable_moment(moment);
    verdict.overall = verdict.overall && verdict.per_regime[i];
  }
  return verdict;
}

/// Largest noise fraction for which the continuous test equation stays
/// p-stable: alpha < 1 / (1 + p/2).
inline double continuous_stability_boundary(double p) {
  if (!(p > 0.0)) raise(ErrorCode::domain_error, "p must be positive");
  return 1.0 / (1.0 + p / 2.0);
}

} // namespace pcem
