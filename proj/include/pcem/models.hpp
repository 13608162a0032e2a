#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pcem/errors.hpp"

namespace pcem {

/// A regime-switching model supplies, per regime i:
///   drift(x, i)                  -> d-vector f(x, i)
///   diffusion(x, i, j)           -> d-vector, the j-th diffusion column
///   diffusion_derivative(x,i,j,c)-> scalar, d g^{c,j}(x, i) / d x^c
/// The derivative is analytic by contract (no finite-difference fallback in
/// the library); all built-in families are linear so theirs are constants.
/// Evaluations must be pure: models are shared read-only across threads.
template <typename M>
concept SwitchingModel = requires(const M& m, std::span<const double> x,
                                  std::size_t i, std::size_t j, std::size_t c,
                                  std::span<double> out) {
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.drivers() } -> std::convertible_to<std::size_t>;
  { m.n_regimes() } -> std::convertible_to<std::size_t>;
  { m.drift(x, i, out) };
  { m.diffusion(x, i, j, out) };
  { m.diffusion_derivative(x, i, j, c) } -> std::convertible_to<double>;
};

/// Scalar linear switching model: drift a(i)*x, diffusion b(i)*x.
class LinearSwitchingModel {
public:
  LinearSwitchingModel(std::vector<double> a, std::vector<double> b)
      : a_(std::move(a)), b_(std::move(b)) {
    if (a_.size() != b_.size() || a_.empty())
      raise(ErrorCode::length_mismatch,
            "linear model needs equal-length non-empty coefficient lists, "
            "got " +
                std::to_string(a_.size()) + " and " + std::to_string(b_.size()));
    for (std::size_t i = 0; i < a_.size(); ++i)
      if (!std::isfinite(a_[i]) || !std::isfinite(b_[i]))
        raise(ErrorCode::domain_error,
              "linear model coefficient for regime " + std::to_string(i) +
                  " is not finite");
  }

  std::size_t dimension() const noexcept { return 1; }
  std::size_t drivers() const noexcept { return 1; }
  std::size_t n_regimes() const noexcept { return a_.size(); }

  double a(std::size_t i) const { return a_[i]; }
  double b(std::size_t i) const { return b_[i]; }

  void drift(std::span<const double> x, std::size_t i,
             std::span<double> out) const {
    out[0] = a_[i] * x[0];
  }

  void diffusion(std::span<const double> x, std::size_t i, std::size_t,
                 std::span<double> out) const {
    out[0] = b_[i] * x[0];
  }

  double diffusion_derivative(std::span<const double>, std::size_t i,
                              std::size_t, std::size_t) const {
    return b_[i];
  }

private:
  std::vector<double> a_;
  std::vector<double> b_;
};

inline LinearSwitchingModel linear_model(std::vector<double> a,
                                         std::vector<double> b) {
  return LinearSwitchingModel(std::move(a), std::move(b));
}

/// Parameters of the linear stability test equation with multiplicative
/// noise, per regime: noise fraction alpha(i) in [0,1) and decay rate
/// lambda(i) < 0. The equivalent linear model has
///   a(i) = (1 - 1.5*alpha(i)) * lambda(i),  b(i) = sqrt(alpha(i)*|lambda(i)|).
class StabilityTestModel {
public:
  StabilityTestModel(std::vector<double> alpha, std::vector<double> lambda)
      : alpha_(std::move(alpha)), lambda_(std::move(lambda)) {
    if (alpha_.size() != lambda_.size() || alpha_.empty())
      raise(ErrorCode::length_mismatch,
            "stability test model needs equal-length non-empty alpha and "
            "lambda lists");
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      if (!(alpha_[i] >= 0.0 && alpha_[i] < 1.0))
        raise(ErrorCode::domain_error,
              "alpha(" + std::to_string(i) + ") = " +
                  std::to_string(alpha_[i]) + " must lie in [0, 1)");
      if (!(lambda_[i] < 0.0))
        raise(ErrorCode::domain_error,
              "lambda(" + std::to_string(i) + ") = " +
                  std::to_string(lambda_[i]) + " must be negative");
    }
  }

  std::size_t n_regimes() const noexcept { return alpha_.size(); }
  double alpha(std::size_t i) const { return alpha_[i]; }
  double lambda(std::size_t i) const { return lambda_[i]; }

  LinearSwitchingModel to_linear() const {
    std::vector<double> a(alpha_.size()), b(alpha_.size());
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      a[i] = (1.0 - 1.5 * alpha_[i]) * lambda_[i];
      b[i] = std::sqrt(alpha_[i] * std::abs(lambda_[i]));
    }
    return LinearSwitchingModel(std::move(a), std::move(b));
  }

private:
  std::vector<double> alpha_;
  std::vector<double> lambda_;
};

inline LinearSwitchingModel stability_model(std::vector<double> alpha,
                                            std::vector<double> lambda) {
  return StabilityTestModel(std::move(alpha), std::move(lambda)).to_linear();
}

/// p-th absolute moment of the explicit single-regime test-equation
/// solution X_t = x0 * exp((1-alpha)*lambda*t + sqrt(alpha*|lambda|)*W_t):
///   E|X_t|^p = x0^p * exp(p*lambda*t*((1-alpha) - p*alpha/2)).
/// Decays to zero iff alpha < 1/(1 + p/2).
inline double exact_linear_moment(const StabilityTestModel& model, double p,
                                  double t, double x0) {
  if (model.n_regimes() != 1)
    raise(ErrorCode::domain_error,
          "exact moment formula applies to a single-regime model");
  if (!(p > 0.0) || !(x0 >= 0.0) || !(t >= 0.0))
    raise(ErrorCode::domain_error,
          "exact moment requires p > 0, t >= 0, x0 >= 0");
  const double alpha = model.alpha(0);
  const double lambda = model.lambda(0);
  const double exponent = p * lambda * t * ((1.0 - alpha) - p * alpha / 2.0);
  return std::pow(x0, p) * std::exp(exponent);
}

} // namespace pcem
