#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pcem/analysis.hpp"
#include "pcem/experiments.hpp"
#include "pcem/simulate.hpp"

using namespace pcem;

TEST_CASE("grid construction follows the clamping rule") {
  {
    const TimeGrid grid = build_grid(10.0, 0.1);
    REQUIRE(grid.n_points() == 101);
    for (std::size_t k = 0; k + 1 < grid.n_steps(); ++k)
      CHECK(grid.step(k) == 0.1);
    CHECK(grid.step(grid.n_steps() - 1) == Catch::Approx(0.1).margin(1e-12));
    CHECK(grid.time(grid.n_steps()) == 10.0);
  }
  {
    const TimeGrid grid = build_grid(1.0, 0.3);
    REQUIRE(grid.n_points() == 5);
    const double expected[5] = {0.0, 0.3, 0.6, 0.9, 1.0};
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(grid.time(i) == Catch::Approx(expected[i]).margin(1e-15));
    CHECK(grid.step(3) == Catch::Approx(0.1).margin(1e-15));
    CHECK(grid.has_short_final_step());
  }
  {
    const TimeGrid grid = build_grid(50.0, 1e-5);
    CHECK(grid.n_steps() == 5'000'000);
    CHECK(grid.time(grid.n_steps()) == 50.0);
  }
  CHECK_THROWS_MATCHES(build_grid(1.0, 0.0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::invalid_step;
                       }));
  CHECK_THROWS_AS(build_grid(1.0, 2.0), Error);
}

TEST_CASE("grid times are ascending and steps telescope to the horizon") {
  for (double horizon : {1.0, 7.3, 10.0})
    for (double dt : {0.1, 0.07, 0.0013}) {
      const TimeGrid grid = build_grid(horizon, dt);
      double sum = 0.0;
      for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        CHECK(grid.step(k) > 0.0);
        CHECK(grid.step(k) <= dt * (1.0 + 1e-12));
        CHECK(grid.time(k) < grid.time(k + 1));
        sum += grid.step(k);
      }
      CHECK(sum == Catch::Approx(horizon).epsilon(1e-9));
    }
}

TEST_CASE("brownian increments have the right first two moments") {
  const TimeGrid grid = build_grid(10'000.0, 0.01); // 1e6 steps
  RandomStream stream(SeedSpec{99, 0, StreamPurpose::brownian});
  const std::vector<double> inc = brownian_increments(grid, 1, stream);
  REQUIRE(inc.size() == 1'000'000);

  double mean = 0.0;
  for (double v : inc) mean += v;
  mean /= static_cast<double>(inc.size());
  CHECK(std::abs(mean) <= 3.0 * 0.1 / 1000.0);

  double var = 0.0;
  for (double v : inc) var += (v - mean) * (v - mean);
  var /= static_cast<double>(inc.size() - 1);
  CHECK(var == Catch::Approx(0.01).epsilon(0.01));
}

TEST_CASE("brownian increments are reproducible bitwise") {
  const TimeGrid grid = build_grid(1.0, 0.001);
  RandomStream s1(SeedSpec{7, 3, StreamPurpose::brownian});
  RandomStream s2(SeedSpec{7, 3, StreamPurpose::brownian});
  CHECK(brownian_increments(grid, 2, s1) == brownian_increments(grid, 2, s2));
}

TEST_CASE("a model with no dynamics yields a constant path") {
  const LinearSwitchingModel still = linear_model({0.0}, {0.0});
  const GeneratorMatrix q = validate_generator({{0.0}});
  const TimeGrid grid = build_grid(1.0, 0.01);
  const double y0 = 3.25;
  const PathResult path =
      simulate_path(still, SchemeParams::scalar(0.5, 0.5), grid, q,
                    std::span<const double>(&y0, 1), 0, SeedPair{1, 0});
  for (std::size_t k = 0; k < path.grid.n_points(); ++k)
    CHECK(path.states[k] == y0);
  CHECK_FALSE(path.overflowed);
}

TEST_CASE("simulated path equals a straight-loop recursion bitwise") {
  const LinearSwitchingModel m = linear_model({0.15, 0.05}, {0.1, 0.1});
  const GeneratorMatrix q = validate_generator({{-0.5, 0.5}, {0.5, -0.5}});
  const TimeGrid grid = build_grid(2.0, 0.01);
  const SeedPair seeds{314, 9};

  const double y0 = 10.0;
  const PathResult path =
      simulate_path(m, SchemeParams::scalar(0.0, 0.0), grid, q,
                    std::span<const double>(&y0, 1), 0, seeds);

  // replay the same streams and run the plain recursion
  RandomStream regime_stream(seeds.regime());
  const RegimePath regimes = simulate_regime_path(q, grid, 0, regime_stream);
  RandomStream brownian_stream(seeds.brownian());
  const std::vector<double> inc = brownian_increments(grid, 1, brownian_stream);
  REQUIRE(path.regimes.states == regimes.states);
  REQUIRE(path.increments == inc);

  double y = y0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double a = regimes.regime(k) == 0 ? 0.15 : 0.05;
    const double b = 0.1;
    y = y + a * y * grid.step(k) + b * y * inc[k];
    REQUIRE(path.states[k + 1] == y);
  }
}

TEST_CASE("paths are a pure function of the seed pair") {
  const LinearSwitchingModel m = linear_model({1.0, 2.0}, {2.0, 1.0});
  const GeneratorMatrix q = validate_generator({{-1.0, 1.0}, {2.0, -2.0}});
  const TimeGrid grid = build_grid(1.0, 0.001);
  const double y0 = 200.0;
  const auto run = [&] {
    return simulate_path(m, SchemeParams::scalar(0.5, 0.5), grid, q,
                         std::span<const double>(&y0, 1), 0, SeedPair{88, 2});
  };
  const PathResult p1 = run();
  const PathResult p2 = run();
  CHECK(p1.states == p2.states);
  CHECK(p1.regimes.states == p2.regimes.states);
  CHECK(p1.increments == p2.increments);
}

TEST_CASE("volatile two-regime problem stays finite at the original scale") {
  const LinearSwitchingModel m = linear_model({1.0, 2.0}, {2.0, 1.0});
  const GeneratorMatrix q = validate_generator({{-1.0, 1.0}, {2.0, -2.0}});
  const TimeGrid grid = build_grid(50.0, 1e-5); // 5e6 steps
  const double y0 = 200.0;
  const PathResult path =
      simulate_path(m, SchemeParams::scalar(0.0, 0.0), grid, q,
                    std::span<const double>(&y0, 1), 0, SeedPair{2024, 0});
  CHECK_FALSE(path.overflowed);
  double sup = 0.0;
  for (double v : path.states) {
    REQUIRE(std::isfinite(v));
    sup = std::max(sup, std::abs(v));
  }
  CHECK(sup > 1e2);
  CHECK(sup < 1e300);
}

TEST_CASE("reference recursion matches the explicit one-step formula") {
  const LinearSwitchingModel m = linear_model({0.15}, {0.1});
  {
    const TimeGrid grid = build_grid(0.01, 0.01);
    RegimePath regimes;
    regimes.states = {0, 0};
    const PathResult ref =
        exact_linear_path(m, grid, regimes, {0.0}, 10.0);
    CHECK(ref.states[1] ==
          Catch::Approx(10.0 * std::exp(0.00145)).epsilon(1e-15));
  }
  {
    const LinearSwitchingModel still = linear_model({0.0}, {0.0});
    const TimeGrid grid = build_grid(1.0, 0.25);
    RegimePath regimes;
    regimes.states.assign(grid.n_points(), 0);
    std::vector<double> inc(grid.n_steps(), 0.3);
    const PathResult ref = exact_linear_path(still, grid, regimes, inc, 4.0);
    for (double v : ref.states) CHECK(v == 4.0);
  }
}

TEST_CASE("log of the reference path telescopes") {
  const LinearSwitchingModel m = linear_model({0.15, 0.05}, {0.1, 0.1});
  const GeneratorMatrix q = validate_generator({{-0.5, 0.5}, {0.5, -0.5}});
  const TimeGrid grid = build_grid(3.0, 0.01);
  RandomStream regime_stream(SeedSpec{55, 1, StreamPurpose::regime});
  const RegimePath regimes = simulate_regime_path(q, grid, 0, regime_stream);
  RandomStream brownian_stream(SeedSpec{55, 1, StreamPurpose::brownian});
  const std::vector<double> inc = brownian_increments(grid, 1, brownian_stream);

  const double y0 = 10.0;
  const PathResult ref = exact_linear_path(m, grid, regimes, inc, y0);

  double exponent_sum = 0.0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const std::size_t r = regimes.regime(k);
    const double a = r == 0 ? 0.15 : 0.05;
    const double b = 0.1;
    exponent_sum += grid.step(k) * a + inc[k] * b - 0.5 * grid.step(k) * b * b;
  }
  CHECK(std::log(ref.states.back() / y0) ==
        Catch::Approx(exponent_sum).margin(1e-10));
}

TEST_CASE("coupled members share their noise structurally") {
  const LinearSwitchingModel m = linear_model({0.15, 0.05}, {0.1, 0.1});
  const GeneratorMatrix q = validate_generator({{-0.5, 0.5}, {0.5, -0.5}});
  const TimeGrid grid = build_grid(1.0, 0.01);
  const CoupledPaths coupled = simulate_coupled(
      m, SchemeParams::scalar(0.5, 0.5), grid, q, 10.0, 0, SeedPair{6, 1});
  CHECK(coupled.numeric.regimes.states == coupled.reference.regimes.states);
  CHECK(coupled.numeric.increments == coupled.reference.increments);

  const CoupledPaths again = simulate_coupled(
      m, SchemeParams::scalar(0.5, 0.5), grid, q, 10.0, 0, SeedPair{6, 1});
  CHECK(coupled.numeric.states == again.numeric.states);
  CHECK(coupled.reference.states == again.reference.states);
}

TEST_CASE("without noise the coupling is deterministic Euler vs exponential") {
  const LinearSwitchingModel m = linear_model({0.4}, {0.0});
  const GeneratorMatrix q = validate_generator({{0.0}});
  const TimeGrid grid = build_grid(1.0, 0.1);
  const CoupledPaths coupled = simulate_coupled(
      m, SchemeParams::scalar(0.0, 0.0), grid, q, 1.0, 0, SeedPair{3, 0});
  for (std::size_t k = 0; k <= 10; ++k) {
    CHECK(coupled.numeric.states[k] ==
          Catch::Approx(std::pow(1.04, static_cast<double>(k))).epsilon(1e-13));
    CHECK(coupled.reference.states[k] ==
          Catch::Approx(std::exp(0.04 * static_cast<double>(k))).epsilon(1e-13));
  }
}

TEST_CASE("overflow freezes propagation and is flagged") {
  const LinearSwitchingModel m = linear_model({1e155}, {0.0});
  const GeneratorMatrix q = validate_generator({{0.0}});
  const TimeGrid grid = build_grid(3.0, 1.0);
  const double y0 = 1e200;
  const PathResult path =
      simulate_path(m, SchemeParams::scalar(0.0, 0.0), grid, q,
                    std::span<const double>(&y0, 1), 0, SeedPair{1, 1});
  CHECK(path.overflowed);
  CHECK(path.overflow_index == 1);
  CHECK(path.finite_points() == 1);
  CHECK_FALSE(std::isfinite(path.states[1]));

  // the coupled statistic reports the finite prefix and raises the flag
  CoupledPaths coupled;
  coupled.numeric = path;
  coupled.reference = exact_linear_path(
      m, grid, path.regimes, path.increments, y0);
  const SupError sup = sup_squared_error(coupled);
  CHECK(sup.overflow);
  CHECK(sup.value == 0.0); // only the shared initial point is finite
}

TEST_CASE("mean of the squared running maximum is stable in the tame setup") {
  const ExperimentConfig cfg = builtin_example("ex2", "desk");
  const LinearSwitchingModel m = cfg.model.build();
  const GeneratorMatrix q = cfg.generator_matrix();
  const TimeGrid grid = build_grid(10.0, 0.01);

  auto mean_sup_sq = [&](std::size_t reps) {
    double acc = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const double y0 = 10.0;
      const PathResult path =
          simulate_path(m, SchemeParams::scalar(0.0, 0.0), grid, q,
                        std::span<const double>(&y0, 1), 0,
                        SeedPair{cfg.master_seed, rep});
      REQUIRE_FALSE(path.overflowed);
      double sup = 0.0;
      for (double v : path.states) sup = std::max(sup, v * v);
      acc += sup;
    }
    return acc / static_cast<double>(reps);
  };

  const double with200 = mean_sup_sq(200);
  const double with400 = mean_sup_sq(400);
  CHECK(std::isfinite(with200));
  CHECK(std::abs(with400 - with200) <= 0.2 * with200);
}

TEST_CASE("replication results are independent of thread count") {
  const ExperimentConfig cfg = builtin_example("ex2", "desk");
  const LinearSwitchingModel m = cfg.model.build();
  const GeneratorMatrix q = cfg.generator_matrix();
  const TimeGrid grid = build_grid(10.0, 0.02);
  const auto schemes = all_preset_schemes();

  const auto serial =
      crn_sup_errors(m, schemes, grid, q, 10.0, 0, 40, cfg.master_seed, 1);
  const auto threaded =
      crn_sup_errors(m, schemes, grid, q, 10.0, 0, 40, cfg.master_seed, 4);
  for (std::size_t s = 0; s < schemes.size(); ++s)
    for (std::size_t rep = 0; rep < 40; ++rep) {
      CHECK(serial[s][rep].value == threaded[s][rep].value);
      CHECK(serial[s][rep].overflow == threaded[s][rep].overflow);
    }
}
