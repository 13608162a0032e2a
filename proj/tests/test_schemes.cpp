#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "pcem/models.hpp"
#include "pcem/schemes.hpp"

using namespace pcem;

namespace {

std::vector<double> scalar_pcem(const LinearSwitchingModel& m, double theta,
                                double eta, double y, std::size_t regime,
                                double dt, double dw) {
  const StepInput input{std::span<const double>(&y, 1), regime, dt,
                        std::span<const double>(&dw, 1)};
  return pcem_step(m, SchemeParams::scalar(theta, eta), input);
}

/// d=2, m=2 model with f = A x and g^{c,j} = C[j][c] * x[c] per regime;
/// exercises the componentwise corrected drift and step formulas.
struct PlanarModel {
  // regime -> drift matrix rows
  std::array<std::array<std::array<double, 2>, 2>, 2> A;
  // regime -> driver j -> component scaling
  std::array<std::array<std::array<double, 2>, 2>, 2> C;

  std::size_t dimension() const { return 2; }
  std::size_t drivers() const { return 2; }
  std::size_t n_regimes() const { return 2; }

  void drift(std::span<const double> x, std::size_t i,
             std::span<double> out) const {
    for (std::size_t k = 0; k < 2; ++k)
      out[k] = A[i][k][0] * x[0] + A[i][k][1] * x[1];
  }

  void diffusion(std::span<const double> x, std::size_t i, std::size_t j,
                 std::span<double> out) const {
    for (std::size_t c = 0; c < 2; ++c) out[c] = C[i][j][c] * x[c];
  }

  double diffusion_derivative(std::span<const double>, std::size_t i,
                              std::size_t j, std::size_t c) const {
    return C[i][j][c];
  }
};

} // namespace

TEST_CASE("presets map to the documented weights") {
  REQUIRE(scheme_presets.size() == 6);
  CHECK(preset_name(SchemePreset::em) == "EM");
  CHECK(preset_name(SchemePreset::symmetric) == "symmetric-PCEM");
  CHECK(preset_name(SchemePreset::semi_drift_implicit) ==
        "semi-drift-implicit-PCEM");
  CHECK(preset_name(SchemePreset::drift_implicit) == "drift-implicit-PCEM");
  CHECK(preset_name(SchemePreset::semi_diffusion_implicit) ==
        "semi-diffusion-implicit-PCEM");
  CHECK(preset_name(SchemePreset::fully_implicit) == "fully-implicit-PCEM");

  const double expected[6][2] = {{0.0, 0.0}, {0.5, 0.5}, {0.5, 0.0},
                                 {1.0, 0.0}, {0.0, 0.5}, {1.0, 1.0}};
  for (std::size_t i = 0; i < scheme_presets.size(); ++i) {
    CHECK(scheme_presets[i].theta == expected[i][0]);
    CHECK(scheme_presets[i].eta == expected[i][1]);
    CHECK(parse_preset(scheme_presets[i].name) == scheme_presets[i].preset);
  }
  CHECK_FALSE(parse_preset("midpoint").has_value());
}

TEST_CASE("scheme parameters are validated") {
  CHECK_THROWS_AS(SchemeParams::scalar(1.1, 0.0), Error);
  CHECK_THROWS_AS(SchemeParams::scalar(0.0, -0.01), Error);
  CHECK_THROWS_AS(SchemeParams({0.5, 0.5}, {0.5}), Error);
}

TEST_CASE("corrected drift reduces to the raw drift when eta is zero") {
  const LinearSwitchingModel m = linear_model({0.8, -0.4}, {1.5, 0.3});
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> value(-4.0, 4.0);
  const double eta = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double x = value(rng);
    const std::size_t i = trial % 2;
    double f[1];
    m.drift(std::span<const double>(&x, 1), i, f);
    const auto fbar = corrected_drift(m, std::span<const double>(&eta, 1),
                                      std::span<const double>(&x, 1), i);
    CHECK(fbar[0] == f[0]);
  }
}

TEST_CASE("corrected drift of the documented linear cases") {
  const LinearSwitchingModel ex1 = linear_model({1.0, 2.0}, {2.0, 1.0});
  const double eta = 1.0;
  const double x = 3.0;
  const auto fbar = corrected_drift(ex1, std::span<const double>(&eta, 1),
                                    std::span<const double>(&x, 1), 0);
  CHECK(fbar[0] == Catch::Approx(-9.0).margin(1e-14));

  const LinearSwitchingModel test_eq = stability_model({0.5}, {-1.0});
  const double x1 = 1.0;
  const auto fbar2 = corrected_drift(test_eq, std::span<const double>(&eta, 1),
                                     std::span<const double>(&x1, 1), 0);
  CHECK(fbar2[0] == Catch::Approx(-0.75).margin(1e-14));
}

TEST_CASE("predictor is the explicit Euler-Maruyama step") {
  const LinearSwitchingModel pure_drift = linear_model({1.0}, {0.0});
  {
    const double y = 1.0, dw = 0.0;
    const StepInput input{std::span<const double>(&y, 1), 0, 0.01,
                          std::span<const double>(&dw, 1)};
    CHECK(predictor_step(pure_drift, input)[0] ==
          Catch::Approx(1.01).margin(1e-15));
  }
  {
    const LinearSwitchingModel m = linear_model({1.0}, {2.0});
    const double y = 1.0, dw = 0.05;
    const StepInput input{std::span<const double>(&y, 1), 0, 0.1,
                          std::span<const double>(&dw, 1)};
    CHECK(predictor_step(m, input)[0] == Catch::Approx(1.2).margin(1e-15));
  }
  { // no noise contribution: exactly y + f*dt
    const LinearSwitchingModel m = linear_model({-0.7}, {1.9});
    const double y = 2.5, dw = 0.0;
    const StepInput input{std::span<const double>(&y, 1), 0, 1e-4,
                          std::span<const double>(&dw, 1)};
    CHECK(predictor_step(m, input)[0] == y + (-0.7 * y) * 1e-4);
  }
}

TEST_CASE("corrector with zero weights reproduces the predictor bitwise") {
  const LinearSwitchingModel m = linear_model({0.9, -1.1}, {1.4, 0.2});
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  std::uniform_real_distribution<double> step(1e-4, 0.2);
  for (int trial = 0; trial < 500; ++trial) {
    const double y = value(rng);
    const double dt = step(rng);
    const double dw = value(rng) * std::sqrt(dt);
    const StepInput input{std::span<const double>(&y, 1),
                          static_cast<std::size_t>(trial % 2), dt,
                          std::span<const double>(&dw, 1)};
    const auto pred = predictor_step(m, input);
    const auto corr =
        corrector_step(m, SchemeParams::scalar(0.0, 0.0), input, pred);
    CHECK(corr[0] == pred[0]);
  }
}

TEST_CASE("drift-weighted corrector pushes through the predictor") {
  const LinearSwitchingModel m = linear_model({1.0}, {0.0});
  const double y = 1.0, dw = 0.0;
  const StepInput input{std::span<const double>(&y, 1), 0, 0.01,
                        std::span<const double>(&dw, 1)};
  const auto pred = predictor_step(m, input);
  const auto corr =
      corrector_step(m, SchemeParams::scalar(1.0, 0.0), input, pred);
  CHECK(corr[0] == Catch::Approx(1.0101).margin(1e-15));
}

TEST_CASE("vanishing step leaves the state in place") {
  const LinearSwitchingModel m = linear_model({0.3}, {0.8});
  const double y = 1.7, dw = 0.0;
  const StepInput input{std::span<const double>(&y, 1), 0, 1e-300,
                        std::span<const double>(&dw, 1)};
  for (const auto& info : scheme_presets) {
    const auto out = pcem_step(
        m, SchemeParams::scalar(info.theta, info.eta), input);
    CHECK(std::abs(out[0] - y) < 1e-12);
  }
}

TEST_CASE("two-stage step matches a hand-rolled evaluation") {
  // symmetric weights on the gentler documented model, one step from 10
  const LinearSwitchingModel m = linear_model({0.15, 0.05}, {0.1, 0.1});
  const double theta = 0.5, eta = 0.5;
  const double y = 10.0, dt = 0.01, dw = 0.037;
  const std::size_t regime = 0;

  const double a = 0.15, b = 0.1;
  const double pred = y + a * y * dt + b * y * dw;
  const double abar = a - eta * b * b;
  const double expected = y +
                          (theta * (abar * pred) + (1 - theta) * (abar * y)) *
                              dt +
                          (eta * (b * pred) + (1 - eta) * (b * y)) * dw;

  const auto out = scalar_pcem(m, theta, eta, y, regime, dt, dw);
  CHECK(out[0] == Catch::Approx(expected).epsilon(1e-15));
}

TEST_CASE("zero-weight member reproduces the plain Euler-Maruyama recursion") {
  const LinearSwitchingModel m = linear_model({1.0, 2.0}, {2.0, 1.0});
  std::mt19937 rng(23);
  std::normal_distribution<double> normal(0.0, 1.0);
  double y = 200.0;
  double y_oracle = 200.0;
  const double dt = 0.01;
  for (int k = 0; k < 200; ++k) {
    const std::size_t regime = k % 2;
    const double dw = normal(rng) * std::sqrt(dt);
    y = scalar_pcem(m, 0.0, 0.0, y, regime, dt, dw)[0];
    const double a = regime == 0 ? 1.0 : 2.0;
    const double b = regime == 0 ? 2.0 : 1.0;
    y_oracle = y_oracle + a * y_oracle * dt + b * y_oracle * dw;
    REQUIRE(y == y_oracle);
  }
}

TEST_CASE("residual decomposition vanishes for the zero-weight member") {
  const LinearSwitchingModel m = linear_model({1.2}, {0.7});
  const double y = 1.5, dw = 0.21;
  const StepInput input{std::span<const double>(&y, 1), 0, 0.05,
                        std::span<const double>(&dw, 1)};
  const auto dec =
      residual_decomposition(m, SchemeParams::scalar(0.0, 0.0), input);
  for (double r : dec.residuals) CHECK(r == 0.0);
  CHECK(dec.reconstructed() == dec.em_step);
}

TEST_CASE("residual structure for a diffusion-only corrector") {
  const double b = 0.7;
  const LinearSwitchingModel m = linear_model({0.0}, {b});
  const double y = 2.0, dt = 0.05, dw = 0.3;
  const StepInput input{std::span<const double>(&y, 1), 0, dt,
                        std::span<const double>(&dw, 1)};
  const auto dec =
      residual_decomposition(m, SchemeParams::scalar(0.0, 1.0), input);
  CHECK(dec.residuals[0] == 0.0);
  CHECK(dec.residuals[1] == 0.0); // theta factor kills it
  CHECK(dec.residuals[2] ==
        Catch::Approx(-b * b * y * dt).epsilon(1e-15)); // -g g' dt
  const double pred = y + b * y * dw;
  CHECK(dec.residuals[3] ==
        Catch::Approx(b * (pred - y) * dw).epsilon(1e-15));
}

TEST_CASE("residual decomposition reconstructs the step, randomized") {
  std::mt19937 rng(501);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  std::uniform_real_distribution<double> step(1e-4, 0.1);
  for (int trial = 0; trial < 10'000; ++trial) {
    const LinearSwitchingModel m = linear_model({coef(rng)}, {coef(rng)});
    const double theta = weight(rng), eta = weight(rng);
    const double y = coef(rng);
    const double dt = step(rng);
    const double dw = coef(rng) * std::sqrt(dt);
    const StepInput input{std::span<const double>(&y, 1), 0, dt,
                          std::span<const double>(&dw, 1)};
    const auto params = SchemeParams::scalar(theta, eta);
    const auto dec = residual_decomposition(m, params, input);
    const double step_out = pcem_step(m, params, input)[0];
    CHECK(std::abs(dec.reconstructed() - step_out) <=
          1e-12 * std::max(1.0, std::abs(step_out)));
  }
}

TEST_CASE("residual decomposition refuses multi-dimensional models") {
  PlanarModel m{};
  const std::array<double, 2> y = {1.0, 1.0};
  const std::array<double, 2> dw = {0.0, 0.0};
  const StepInput input{y, 0, 0.01, dw};
  CHECK_THROWS_MATCHES(
      residual_decomposition(m, SchemeParams::uniform(2, 0.5, 0.5), input),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == ErrorCode::dimension_unsupported;
      }));
}

TEST_CASE("linear steps scale exactly with power-of-two state scalings") {
  const LinearSwitchingModel m = linear_model({0.15, 0.05}, {0.1, 0.1});
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  for (const auto& info : scheme_presets) {
    for (int trial = 0; trial < 50; ++trial) {
      const double y = value(rng);
      const double dt = 0.01;
      const double dw = value(rng) * std::sqrt(dt);
      const double c = std::ldexp(1.0, trial % 7 - 3);
      const double base = scalar_pcem(m, info.theta, info.eta, y, trial % 2,
                                      dt, dw)[0];
      const double scaled = scalar_pcem(m, info.theta, info.eta, c * y,
                                        trial % 2, dt, dw)[0];
      CHECK(scaled == c * base);
    }
  }
}

TEST_CASE("deterministic one-step error halves twice when the step halves") {
  const LinearSwitchingModel m = linear_model({1.0}, {0.0});
  const double dw = 0.0;
  for (double theta : {0.0, 1.0}) {
    const double y = 1.0;
    auto one_step_error = [&](double dt) {
      const StepInput input{std::span<const double>(&y, 1), 0, dt,
                            std::span<const double>(&dw, 1)};
      const double out =
          pcem_step(m, SchemeParams::scalar(theta, 0.0), input)[0];
      return std::abs(out - std::exp(dt));
    };
    const double ratio = one_step_error(0.01) / one_step_error(0.005);
    CHECK(ratio == Catch::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("componentwise formulas in two dimensions") {
  PlanarModel m{};
  m.A[1] = {{{0.5, -0.3}, {0.2, 0.4}}};
  m.C[1] = {{{0.6, -0.1}, {0.15, 0.25}}};
  // regime 0 left zeroed; the test only exercises regime 1

  const std::array<double, 2> x = {1.0, 2.0};
  const std::array<double, 2> dw = {0.1, -0.2};
  const std::vector<double> eta = {0.25, 0.6};
  const SchemeParams params({0.3, 0.7}, {0.25, 0.6});
  const StepInput input{x, 1, 0.05, dw};

  const auto fbar = corrected_drift(m, eta, x, 1);
  CHECK(fbar[0] == Catch::Approx(-0.25187499999999996).epsilon(1e-14));
  CHECK(fbar[1] == Catch::Approx(0.6355).epsilon(1e-14));

  const auto pred = predictor_step(m, input);
  CHECK(pred[0] == Catch::Approx(1.025).epsilon(1e-14));
  CHECK(pred[1] == Catch::Approx(1.9299999999999997).epsilon(1e-14));

  const auto out = pcem_step(m, params, input);
  CHECK(out[0] == Catch::Approx(1.018049421875).epsilon(1e-13));
  CHECK(out[1] == Catch::Approx(1.9132277625).epsilon(1e-13));
}
