#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcem/errors.hpp"
#include "pcem/rng.hpp"
#include "pcem/time_grid.hpp"

namespace pcem {

/// Validated generator (rate) matrix of a continuous-time Markov chain:
/// non-negative off-diagonal rates, rows summing to zero. Regimes are
/// indexed 0..n_states-1 throughout the library.
class GeneratorMatrix {
public:
  static GeneratorMatrix validate(const std::vector<std::vector<double>>& raw) {
    const std::size_t n = raw.size();
    if (n == 0) raise(ErrorCode::non_square, "generator matrix is empty");
    std::vector<double> flat;
    flat.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      if (raw[i].size() != n)
        raise(ErrorCode::non_square,
              "generator row " + std::to_string(i) + " has " +
                  std::to_string(raw[i].size()) + " entries, expected " +
                  std::to_string(n));
      double row_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double q = raw[i][j];
        if (!std::isfinite(q))
          raise(ErrorCode::domain_error, "generator entry (" +
                                             std::to_string(i) + "," +
                                             std::to_string(j) +
                                             ") is not finite");
        if (i != j && q < 0.0)
          raise(ErrorCode::negative_off_diagonal,
                "generator entry (" + std::to_string(i) + "," +
                    std::to_string(j) + ") = " + std::to_string(q) +
                    " is negative off the diagonal");
        row_sum += q;
        flat.push_back(q);
      }
      if (std::abs(row_sum) > 1e-12)
        raise(ErrorCode::row_sum_nonzero,
              "generator row " + std::to_string(i) + " sums to " +
                  std::to_string(row_sum) + " (|sum| > 1e-12)");
    }
    return GeneratorMatrix(n, std::move(flat));
  }

  std::size_t n_states() const noexcept { return n_; }

  double rate(std::size_t i, std::size_t j) const {
    return entries_[i * n_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * n_, n_};
  }

  std::span<const double> entries() const { return entries_; }

private:
  GeneratorMatrix(std::size_t n, std::vector<double> entries)
      : n_(n), entries_(std::move(entries)) {}

  std::size_t n_;
  std::vector<double> entries_;
};

inline GeneratorMatrix
validate_generator(const std::vector<std::vector<double>>& raw) {
  return GeneratorMatrix::validate(raw);
}

/// Row-stochastic transition matrix over one grid interval.
struct TransitionMatrix {
  std::size_t n_states = 0;
  double interval = 0.0;
  std::vector<double> entries; // row-major, rows sum to 1

  double prob(std::size_t i, std::size_t j) const {
    return entries[i * n_states + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {entries.data() + i * n_states, n_states};
  }
};

namespace detail {

// C = A * B for small square row-major matrices.
inline void mat_mul(std::span<const double> a, std::span<const double> b,
                    std::span<double> c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += a[i * n + k] * b[k * n + j];
      c[i * n + j] = acc;
    }
  }
}

inline double inf_norm(std::span<const double> m, std::size_t n) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(m[i * n + j]);
    best = std::max(best, row);
  }
  return best;
}

} // namespace detail

/// Computes exp(Q * delta) by scaling-and-squaring with a truncated Taylor
/// series (scale so the scaled norm is <= 0.5, truncate when the term norm
/// drops below 1e-16), then cleans each row back to an exact probability
/// distribution. Adequate and dependency-free for the small state counts a
/// switching model carries.
inline TransitionMatrix transition_matrix(const GeneratorMatrix& q,
                                          double delta) {
  if (!(delta > 0.0))
    raise(ErrorCode::invalid_step, "transition matrix interval must be > 0");
  const std::size_t n = q.n_states();
  std::vector<double> scaled(n * n);

  const double norm = detail::inf_norm(q.entries(), n) * delta;
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    if (squarings > 63)
      raise(ErrorCode::non_convergent,
            "generator scale is pathological: |Q*delta| = " +
                std::to_string(norm));
  }
  const double scale = delta / std::ldexp(1.0, squarings);
  for (std::size_t k = 0; k < n * n; ++k)
    scaled[k] = q.entries()[k] * scale;

  std::vector<double> result(n * n, 0.0), term(n * n, 0.0), tmp(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    result[i * n + i] = 1.0;
    term[i * n + i] = 1.0;
  }
  bool converged = false;
  for (int k = 1; k <= 40; ++k) {
    detail::mat_mul(term, scaled, tmp, n);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t idx = 0; idx < n * n; ++idx) term[idx] = tmp[idx] * inv_k;
    for (std::size_t idx = 0; idx < n * n; ++idx) result[idx] += term[idx];
    if (detail::inf_norm(term, n) < 1e-16) {
      converged = true;
      break;
    }
  }
  if (!converged)
    raise(ErrorCode::non_convergent,
          "matrix exponential series did not converge");

  for (int s = 0; s < squarings; ++s) {
    detail::mat_mul(result, result, tmp, n);
    result.swap(tmp);
  }

  // Row cleanup: clamp floating-point noise, renormalize; anything larger
  // than noise means the computation itself went wrong.
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double& p = result[i * n + j];
      if (p < 0.0) {
        if (p < -1e-10)
          raise(ErrorCode::non_convergent,
                "transition probability (" + std::to_string(i) + "," +
                    std::to_string(j) + ") = " + std::to_string(p) +
                    " is negative beyond tolerance");
        p = 0.0;
      }
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-10)
      raise(ErrorCode::non_convergent,
            "transition row " + std::to_string(i) + " sums to " +
                std::to_string(row_sum) + " (drift > 1e-10)");
    for (std::size_t j = 0; j < n; ++j) result[i * n + j] /= row_sum;
  }

  return TransitionMatrix{n, delta, std::move(result)};
}

/// Cumulative-probability sampling of the next regime: returns the first
/// index whose cumulative row probability exceeds xi, with the final state
/// absorbing all remaining mass. Monotone in xi by construction.
inline std::size_t sample_next_regime(std::span<const double> row, double xi) {
  double cum = 0.0;
  for (std::size_t j = 0; j + 1 < row.size(); ++j) {
    cum += row[j];
    if (xi < cum) return j;
  }
  return row.size() - 1;
}

/// Regime labels along a time grid, one per grid point, 0-based.
struct RegimePath {
  std::vector<std::uint32_t> states;

  std::size_t n_points() const noexcept { return states.size(); }
  std::size_t regime(std::size_t k) const { return states[k]; }
};

/// Simulates the discrete regime chain along the grid. The uniform-step
/// transition matrix is computed once; a shorter final step gets its own.
/// Consumes exactly one uniform per step from the stream.
inline RegimePath simulate_regime_path(const GeneratorMatrix& q,
                                       const TimeGrid& grid,
                                       std::size_t initial,
                                       RandomStream& stream) {
  if (initial >= q.n_states())
    raise(ErrorCode::domain_error,
          "initial regime " + std::to_string(initial) + " out of range");
  RegimePath path;
  path.states.resize(grid.n_points());
  path.states[0] = static_cast<std::uint32_t>(initial);

  const TransitionMatrix main = transition_matrix(q, grid.step(0));
  const std::size_t n_steps = grid.n_steps();
  const double last = grid.step(n_steps - 1);
  TransitionMatrix final_step;
  const bool short_final = n_steps > 1 && last != grid.dt();
  if (short_final) final_step = transition_matrix(q, last);

  for (std::size_t k = 0; k < n_steps; ++k) {
    const TransitionMatrix& p =
        (short_final && k + 1 == n_steps) ? final_step : main;
    const double xi = stream.uniform();
    path.states[k + 1] = static_cast<std::uint32_t>(
        sample_next_regime(p.row(path.states[k]), xi));
  }
  return path;
}

} // namespace pcem
