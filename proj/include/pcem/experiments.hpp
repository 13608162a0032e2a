#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pcem/analysis.hpp"
#include "pcem/config.hpp"
#include "pcem/csv.hpp"
#include "pcem/errors.hpp"
#include "pcem/parallel.hpp"
#include "pcem/simulate.hpp"

namespace pcem {

inline constexpr std::uint64_t default_master_seed = 29;

/// Per-replication sup-squared errors for several schemes sharing common
/// random numbers: replication i draws one regime path and one increment
/// sequence, every scheme consumes exactly that noise, and the reference is
/// computed once. Result is indexed [scheme][replication].
inline std::vector<std::vector<SupError>>
crn_sup_errors(const LinearSwitchingModel& model,
               const std::vector<SchemeSpec>& schemes, const TimeGrid& grid,
               const GeneratorMatrix& q, double y0, std::size_t r0,
               std::size_t n_replications, std::uint64_t master_seed,
               unsigned threads) {
  std::vector<std::vector<SupError>> sup(schemes.size());
  for (auto& column : sup) column.resize(n_replications);

  parallel_for_indexed(n_replications, threads, [&](std::size_t rep) {
    const SeedPair seeds{master_seed, rep};
    RandomStream regime_stream{RandomStream(seeds.regime())};
    const RegimePath regimes = simulate_regime_path(q, grid, r0, regime_stream);
    RandomStream brownian_stream{RandomStream(seeds.brownian())};
    const std::vector<double> increments =
        brownian_increments(grid, 1, brownian_stream);

    CoupledPaths coupled;
    coupled.reference = exact_linear_path(model, grid, regimes, increments, y0);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      coupled.numeric = simulate_path_with_noise(
          model, schemes[s].params(), grid, regimes, increments,
          std::span<const double>(&y0, 1));
      sup[s][rep] = sup_squared_error(coupled);
    }
  });
  return sup;
}

/// One (scheme, delta) cell of an error table. A cell where every
/// replication overflowed is marked rather than reported as a failure.
struct CompareCell {
  ErrorStats stats;
  bool all_overflowed = false;
};

struct CompareResult {
  std::vector<SchemeSpec> schemes;
  std::vector<double> deltas;
  std::vector<std::vector<CompareCell>> cells; // [delta][scheme]
};

inline CompareResult run_compare(const ExperimentConfig& cfg,
                                 unsigned threads = 1) {
  if (cfg.schemes.empty() || cfg.deltas.empty())
    raise(ErrorCode::config_error,
          "compare needs at least one scheme and one delta");
  const LinearSwitchingModel model = cfg.model.build();
  const GeneratorMatrix q = cfg.generator_matrix();

  CompareResult result;
  result.schemes = cfg.schemes;
  result.deltas = cfg.deltas;
  result.cells.resize(cfg.deltas.size());
  for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
    const TimeGrid grid = build_grid(cfg.horizon, cfg.deltas[d]);
    const auto sup = crn_sup_errors(model, cfg.schemes, grid, q, cfg.y0,
                                    cfg.r0, cfg.replications, cfg.master_seed,
                                    threads);
    result.cells[d].resize(cfg.schemes.size());
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
      CompareCell& cell = result.cells[d][s];
      try {
        cell.stats = detail::reduce_error_stats(sup[s]);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::all_overflowed) throw;
        cell.all_overflowed = true;
        cell.stats.n_replications = cfg.replications;
        cell.stats.overflow_count = cfg.replications;
        cell.stats.mean_sup_sq = std::numeric_limits<double>::quiet_NaN();
        cell.stats.std_error = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return result;
}

namespace detail {

inline std::string timestamp_line(std::string_view what) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return "# " + std::string(what) + " generated " + buf + "\n";
}

} // namespace detail

inline void write_compare_csv(std::ostream& os, const CompareResult& result,
                              bool timestamp_header) {
  if (timestamp_header) os << detail::timestamp_line("compare");
  os << "scheme,theta,eta,delta,n_reps,mean_sup_sq,std_error,overflow_count\n";
  for (std::size_t s = 0; s < result.schemes.size(); ++s) {
    const SchemeSpec& scheme = result.schemes[s];
    for (std::size_t d = 0; d < result.deltas.size(); ++d) {
      const ErrorStats& stats = result.cells[d][s].stats;
      write_csv_row(os, {scheme.name, format_double(scheme.theta),
                         format_double(scheme.eta),
                         format_double(result.deltas[d]),
                         format_size(stats.n_replications),
                         format_double(stats.mean_sup_sq),
                         format_double(stats.std_error),
                         format_size(stats.overflow_count)});
    }
  }
}

struct ConvergenceResult {
  SchemeSpec scheme;
  CompareResult table; // single-scheme error table, one row per delta
  ConvergenceFit fit;
};

inline ConvergenceResult run_convergence(const ExperimentConfig& cfg,
                                         const SchemeSpec& scheme,
                                         unsigned threads = 1) {
  if (cfg.deltas.size() < 3)
    raise(ErrorCode::domain_error,
          "convergence needs at least 3 step sizes, got " +
              std::to_string(cfg.deltas.size()));
  ExperimentConfig single = cfg;
  single.schemes = {scheme};
  ConvergenceResult result;
  result.scheme = scheme;
  result.table = run_compare(single, threads);
  std::vector<std::pair<double, double>> points;
  for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
    const CompareCell& cell = result.table.cells[d][0];
    if (cell.all_overflowed)
      raise(ErrorCode::all_overflowed,
            "every replication overflowed at delta = " +
                format_double(cfg.deltas[d]));
    points.emplace_back(cfg.deltas[d], cell.stats.mean_sup_sq);
  }
  result.fit = fit_strong_order(std::move(points));
  return result;
}

inline void write_convergence_csv(std::ostream& os,
                                  const ConvergenceResult& result,
                                  bool timestamp_header) {
  write_compare_csv(os, result.table, timestamp_header);
}

inline void write_convergence_fit_csv(std::ostream& os,
                                      const ConvergenceResult& result,
                                      bool timestamp_header) {
  if (timestamp_header) os << detail::timestamp_line("convergence-fit");
  os << "scheme,theta,eta,slope,intercept,r_squared,n_points\n";
  write_csv_row(os, {result.scheme.name, format_double(result.scheme.theta),
                     format_double(result.scheme.eta),
                     format_double(result.fit.slope),
                     format_double(result.fit.intercept),
                     format_double(result.fit.r_squared),
                     format_size(result.fit.points.size())});
}

inline std::vector<StabilityRegion>
run_stability(const std::vector<SchemeSpec>& schemes,
              const StabilityScanSpec& spec, unsigned threads = 1) {
  std::vector<StabilityRegion> regions;
  regions.reserve(schemes.size());
  for (const SchemeSpec& scheme : schemes)
    regions.push_back(scan_stability_region(scheme.params(), scheme.name,
                                            spec.p, spec.lambda_dt, spec.alpha,
                                            threads));
  return regions;
}

inline void write_stability_csv(std::ostream& os,
                                const StabilityRegion& region,
                                bool timestamp_header) {
  if (timestamp_header) os << detail::timestamp_line("stability");
  os << "lambda_dt,alpha,p,moment,stable\n";
  for (const StabilityPoint& pt : region.points)
    write_csv_row(os, {format_double(pt.lambda_dt), format_double(pt.alpha),
                       format_double(pt.p), format_double(pt.moment),
                       pt.stable ? "1" : "0"});
}

/// Summary of a single coupled-path run.
struct SimulateSummary {
  double sup_squared = 0.0;
  bool overflow_numeric = false;
  bool overflow_reference = false;
};

inline SimulateSummary run_single_simulation(const ExperimentConfig& cfg,
                                             const SchemeSpec& scheme,
                                             double delta,
                                             std::ostream* dump = nullptr) {
  const LinearSwitchingModel model = cfg.model.build();
  const GeneratorMatrix q = cfg.generator_matrix();
  const TimeGrid grid = build_grid(cfg.horizon, delta);
  const CoupledPaths coupled =
      simulate_coupled(model, scheme.params(), grid, q, cfg.y0, cfg.r0,
                       SeedPair{cfg.master_seed, 0});
  const SupError sup = sup_squared_error(coupled);

  if (dump) {
    *dump << "time,regime,dW,state,reference\n";
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
      const std::string dw =
          k < grid.n_steps() ? format_double(coupled.numeric.increments[k])
                             : std::string();
      write_csv_row(*dump,
                    {format_double(grid.time(k)),
                     std::to_string(coupled.numeric.regimes.regime(k) + 1),
                     dw, format_double(coupled.numeric.states[k]),
                     format_double(coupled.reference.states[k])});
    }
  }

  SimulateSummary summary;
  summary.sup_squared = sup.value;
  summary.overflow_numeric = coupled.numeric.overflowed;
  summary.overflow_reference = coupled.reference.overflowed;
  return summary;
}

/// Built-in experiment setups mirroring the shipped config files: two
/// 2-regime linear problems ("ex1-case1".."ex1-case3" at three switching
/// rates, and the gentler "ex2"), each at desk or paper scale. Desk scale
/// shrinks the horizon (ex1), the step ladder and the replication count so
/// a full run takes seconds; paper scale is the original heavyweight setup.
inline ExperimentConfig builtin_example(std::string_view name,
                                        std::string_view scale) {
  ExperimentConfig cfg;
  cfg.schemes = all_preset_schemes();
  cfg.master_seed = default_master_seed;

  double q_rate = 0.0;
  if (name == "ex1-case1")
    q_rate = 2.0;
  else if (name == "ex1-case2")
    q_rate = 1.5;
  else if (name == "ex1-case3")
    q_rate = 0.5;
  else if (name != "ex2")
    raise(ErrorCode::config_error,
          "unknown example '" + std::string(name) +
              "' (expected ex1-case1, ex1-case2, ex1-case3 or ex2)");

  if (scale != "desk" && scale != "paper")
    raise(ErrorCode::config_error,
          "unknown scale '" + std::string(scale) +
              "' (expected desk or paper)");
  const bool desk = scale == "desk";

  cfg.model.family = "linear";
  if (name == "ex2") {
    cfg.model.a = {0.15, 0.05};
    cfg.model.b = {0.1, 0.1};
    cfg.generator = {{-0.5, 0.5}, {0.5, -0.5}};
    cfg.y0 = 10.0;
    cfg.horizon = 10.0;
    cfg.deltas = desk ? std::vector<double>{0.1, 0.02, 0.004, 0.0008}
                      : std::vector<double>{0.1, 0.01, 0.001, 0.0001, 0.00001};
  } else {
    cfg.model.a = {1.0, 2.0};
    cfg.model.b = {2.0, 1.0};
    cfg.generator = {{-1.0, 1.0}, {q_rate, -q_rate}};
    cfg.y0 = 200.0;
    cfg.horizon = desk ? 5.0 : 50.0;
    cfg.deltas = desk ? std::vector<double>{0.1, 0.02, 0.004, 0.0008}
                      : std::vector<double>{0.00001};
  }
  cfg.r0 = 0;
  cfg.replications = desk ? 200 : 1000;
  return cfg;
}

/// Table-shaped reproduction run. Paper scale is hours of compute on a
/// laptop and therefore guarded.
inline CompareResult run_reproduce(std::string_view name,
                                   std::string_view scale, bool allow_long,
                                   std::uint64_t master_seed,
                                   unsigned threads = 1) {
  ExperimentConfig cfg = builtin_example(name, scale);
  cfg.master_seed = master_seed;
  if (scale == "paper" && !allow_long)
    raise(ErrorCode::resource_guard,
          "paper-scale reproduction is a long run; pass --allow-long to "
          "confirm");
  return run_compare(cfg, threads);
}

} // namespace pcem
