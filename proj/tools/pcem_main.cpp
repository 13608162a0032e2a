#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcem/pcem.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_guard = 4;

int exit_code_for(const pcem::Error& err) {
  switch (err.code()) {
    case pcem::ErrorCode::config_error:
    case pcem::ErrorCode::domain_error:
    case pcem::ErrorCode::length_mismatch:
    case pcem::ErrorCode::invalid_step:
    case pcem::ErrorCode::non_square:
    case pcem::ErrorCode::negative_off_diagonal:
    case pcem::ErrorCode::row_sum_nonzero:
    case pcem::ErrorCode::dimension_unsupported:
      return exit_config;
    case pcem::ErrorCode::resource_guard:
      return exit_guard;
    default:
      return exit_numeric;
  }
}

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  unsigned threads = 1;
  std::string scheme_name;
  std::optional<double> theta;
  std::optional<double> eta;
  bool allow_long = false;
  bool dump_paths = false;
  bool no_header = false;
  double delta = 0.0;
  std::optional<double> p;
  std::string example_name;
  std::string scale = "desk";
};

pcem::ExperimentConfig load_with_overrides(const CliOptions& opt) {
  pcem::ExperimentConfig cfg = pcem::load_config(opt.config_path);
  if (opt.seed) cfg.master_seed = *opt.seed;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  return cfg;
}

/// --theta/--eta override a preset; otherwise --scheme picks one by name.
std::optional<pcem::SchemeSpec> selected_scheme(const CliOptions& opt) {
  if (opt.theta || opt.eta) {
    if (!opt.theta || !opt.eta)
      pcem::raise(pcem::ErrorCode::config_error,
                  "--theta and --eta must be given together");
    pcem::SchemeSpec spec;
    spec.name = "custom";
    spec.theta = *opt.theta;
    spec.eta = *opt.eta;
    spec.params(); // validates the ranges
    return spec;
  }
  if (opt.scheme_name.empty()) return std::nullopt;
  if (auto preset = pcem::parse_preset(opt.scheme_name))
    return pcem::scheme_from_preset(*preset);
  pcem::raise(pcem::ErrorCode::config_error,
              "unknown scheme '" + opt.scheme_name + "'");
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    pcem::raise(pcem::ErrorCode::config_error,
                "cannot write '" + path.string() + "'");
  return out;
}

int cmd_simulate(const CliOptions& opt) {
  pcem::ExperimentConfig cfg = load_with_overrides(opt);
  auto scheme = selected_scheme(opt);
  if (!scheme)
    pcem::raise(pcem::ErrorCode::config_error,
                "simulate needs --scheme or --theta/--eta");
  if (!(opt.delta > 0.0))
    pcem::raise(pcem::ErrorCode::config_error,
                "simulate needs a positive --delta");

  pcem::SimulateSummary summary;
  if (opt.dump_paths) {
    const fs::path path = fs::path(cfg.out_dir) /
                          ("path_" + scheme->name + "_" +
                           pcem::format_double(opt.delta) + ".csv");
    std::ofstream out = open_output(path);
    summary = pcem::run_single_simulation(cfg, *scheme, opt.delta, &out);
    std::cout << "wrote " << path.string() << "\n";
  } else {
    summary = pcem::run_single_simulation(cfg, *scheme, opt.delta);
  }
  std::cout << "scheme=" << scheme->name << " delta="
            << pcem::format_double(opt.delta)
            << " sup_squared_error=" << pcem::format_double(summary.sup_squared)
            << " overflow_numeric=" << (summary.overflow_numeric ? 1 : 0)
            << " overflow_reference=" << (summary.overflow_reference ? 1 : 0)
            << "\n";
  return exit_ok;
}

int cmd_compare(const CliOptions& opt) {
  pcem::ExperimentConfig cfg = load_with_overrides(opt);
  if (auto scheme = selected_scheme(opt)) cfg.schemes = {*scheme};
  const pcem::CompareResult result = pcem::run_compare(cfg, opt.threads);
  const fs::path path = fs::path(cfg.out_dir) / "compare.csv";
  std::ofstream out = open_output(path);
  pcem::write_compare_csv(out, result, !opt.no_header);
  std::cout << "wrote " << path.string() << "\n";
  return exit_ok;
}

int cmd_convergence(const CliOptions& opt) {
  pcem::ExperimentConfig cfg = load_with_overrides(opt);
  auto scheme = selected_scheme(opt);
  if (!scheme && cfg.schemes.size() == 1) scheme = cfg.schemes[0];
  if (!scheme)
    pcem::raise(pcem::ErrorCode::config_error,
                "convergence needs --scheme (or a single-scheme config)");
  const pcem::ConvergenceResult result =
      pcem::run_convergence(cfg, *scheme, opt.threads);

  const fs::path points_path =
      fs::path(cfg.out_dir) / ("convergence_" + scheme->name + ".csv");
  std::ofstream points = open_output(points_path);
  pcem::write_convergence_csv(points, result, !opt.no_header);
  const fs::path fit_path =
      fs::path(cfg.out_dir) / ("convergence_fit_" + scheme->name + ".csv");
  std::ofstream fit = open_output(fit_path);
  pcem::write_convergence_fit_csv(fit, result, !opt.no_header);

  std::cout << "wrote " << points_path.string() << "\n";
  std::cout << "wrote " << fit_path.string() << "\n";
  std::cout << "scheme=" << scheme->name
            << " slope=" << pcem::format_double(result.fit.slope)
            << " intercept=" << pcem::format_double(result.fit.intercept)
            << " r_squared=" << pcem::format_double(result.fit.r_squared)
            << "\n";
  return exit_ok;
}

int cmd_stability(const CliOptions& opt) {
  pcem::StabilityScanSpec spec;
  std::string out_dir = opt.out_dir.value_or(".");
  std::vector<pcem::SchemeSpec> schemes;
  if (!opt.config_path.empty()) {
    pcem::ExperimentConfig cfg = load_with_overrides(opt);
    spec = cfg.stability;
    out_dir = cfg.out_dir;
  }
  if (opt.p) spec.p = *opt.p;
  if (auto scheme = selected_scheme(opt))
    schemes = {*scheme};
  else
    schemes = pcem::all_preset_schemes();

  const auto regions = pcem::run_stability(schemes, spec, opt.threads);
  for (const pcem::StabilityRegion& region : regions) {
    const fs::path path =
        fs::path(out_dir) / ("stability_" + region.scheme_name + ".csv");
    std::ofstream out = open_output(path);
    pcem::write_stability_csv(out, region, !opt.no_header);
    std::cout << "wrote " << path.string() << " (stable "
              << region.stable_count() << "/" << region.points.size()
              << " nodes)\n";
  }
  return exit_ok;
}

int cmd_reproduce(const CliOptions& opt) {
  const std::uint64_t seed = opt.seed.value_or(pcem::default_master_seed);
  const pcem::CompareResult result = pcem::run_reproduce(
      opt.example_name, opt.scale, opt.allow_long, seed, opt.threads);
  const fs::path path = fs::path(opt.out_dir.value_or(".")) /
                        (opt.example_name + "_" + opt.scale + ".csv");
  std::ofstream out = open_output(path);
  pcem::write_compare_csv(out, result, !opt.no_header);
  std::cout << "wrote " << path.string() << "\n";
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Predictor-corrector Euler-Maruyama experiments for "
      "regime-switching SDEs"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--seed", opt.seed, "Master seed (overrides the config)");
  app.add_option("--out", opt.out_dir, "Output directory (overrides the config)");
  app.add_option("--threads", opt.threads, "Worker threads for replications");
  app.add_option("--scheme", opt.scheme_name, "Scheme preset name");
  app.add_option("--theta", opt.theta, "Explicit drift implicitness (overrides --scheme)");
  app.add_option("--eta", opt.eta, "Explicit diffusion implicitness (overrides --scheme)");
  app.add_flag("--allow-long", opt.allow_long, "Permit paper-scale runs");
  app.add_flag("--dump-paths", opt.dump_paths, "Write per-point path dumps (debugging)");
  app.add_flag("--no-header", opt.no_header, "Suppress the timestamp header line in CSVs");

  auto* simulate = app.add_subcommand(
      "simulate", "One coupled path: dump plus sup-squared-error summary");
  simulate->add_option("--config", opt.config_path, "Experiment config (JSON)")
      ->required();
  simulate->add_option("--delta", opt.delta, "Step size")->required();

  auto* compare = app.add_subcommand(
      "compare", "Error table over schemes x step sizes, common random numbers");
  compare->add_option("--config", opt.config_path, "Experiment config (JSON)")
      ->required();

  auto* convergence = app.add_subcommand(
      "convergence", "Error ladder for one scheme plus log-log slope fit");
  convergence
      ->add_option("--config", opt.config_path, "Experiment config (JSON)")
      ->required();

  auto* stability = app.add_subcommand(
      "stability", "Moment-stability region masks over a (lambda*dt, alpha) lattice");
  stability->add_option("--config", opt.config_path,
                        "Optional config carrying a 'stability' section");
  stability->add_option("--p", opt.p, "Moment order (defaults to the config, else 2)");

  auto* reproduce = app.add_subcommand(
      "reproduce", "Built-in experiment setups at desk or paper scale");
  reproduce
      ->add_option("--example", opt.example_name,
                   "ex1-case1 | ex1-case2 | ex1-case3 | ex2")
      ->required();
  reproduce->add_option("--scale", opt.scale, "desk (default) or paper");

  for (CLI::App* sub : app.get_subcommands({}))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (compare->parsed()) return cmd_compare(opt);
    if (convergence->parsed()) return cmd_convergence(opt);
    if (stability->parsed()) return cmd_stability(opt);
    if (reproduce->parsed()) return cmd_reproduce(opt);
  } catch (const pcem::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_numeric;
  }
  return exit_config;
}
