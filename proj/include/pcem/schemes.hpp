#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcem/errors.hpp"
#include "pcem/models.hpp"

namespace pcem {

/// Degrees of implicitness of one member of the predictor-corrector family:
/// theta weights the drift correction, eta the diffusion correction, one
/// entry per state component (scalar problems use length 1).
struct SchemeParams {
  std::vector<double> theta;
  std::vector<double> eta;

  SchemeParams() = default;

  SchemeParams(std::vector<double> theta_in, std::vector<double> eta_in)
      : theta(std::move(theta_in)), eta(std::move(eta_in)) {
    if (theta.size() != eta.size() || theta.empty())
      raise(ErrorCode::length_mismatch,
            "scheme parameters need equal-length non-empty theta and eta");
    for (double v : theta)
      if (!(v >= 0.0 && v <= 1.0))
        raise(ErrorCode::domain_error,
              "theta = " + std::to_string(v) + " must lie in [0, 1]");
    for (double v : eta)
      if (!(v >= 0.0 && v <= 1.0))
        raise(ErrorCode::domain_error,
              "eta = " + std::to_string(v) + " must lie in [0, 1]");
  }

  static SchemeParams scalar(double theta, double eta) {
    return SchemeParams({theta}, {eta});
  }

  static SchemeParams uniform(std::size_t dimension, double theta,
                              double eta) {
    return SchemeParams(std::vector<double>(dimension, theta),
                        std::vector<double>(dimension, eta));
  }

  std::size_t dimension() const noexcept { return theta.size(); }

  bool is_explicit_euler() const {
    for (double v : theta)
      if (v != 0.0) return false;
    for (double v : eta)
      if (v != 0.0) return false;
    return true;
  }
};

enum class SchemePreset {
  em,
  symmetric,
  semi_drift_implicit,
  drift_implicit,
  semi_diffusion_implicit,
  fully_implicit,
};

struct SchemePresetInfo {
  SchemePreset preset;
  std::string_view name;
  double theta;
  double eta;
};

inline constexpr std::array<SchemePresetInfo, 6> scheme_presets = {{
    {SchemePreset::em, "EM", 0.0, 0.0},
    {SchemePreset::symmetric, "symmetric-PCEM", 0.5, 0.5},
    {SchemePreset::semi_drift_implicit, "semi-drift-implicit-PCEM", 0.5, 0.0},
    {SchemePreset::drift_implicit, "drift-implicit-PCEM", 1.0, 0.0},
    {SchemePreset::semi_diffusion_implicit, "semi-diffusion-implicit-PCEM",
     0.0, 0.5},
    {SchemePreset::fully_implicit, "fully-implicit-PCEM", 1.0, 1.0},
}};

inline std::string_view preset_name(SchemePreset preset) {
  for (const auto& info : scheme_presets)
    if (info.preset == preset) return info.name;
  return "?";
}

inline std::optional<SchemePreset> parse_preset(std::string_view name) {
  for (const auto& info : scheme_presets)
    if (info.name == name) return info.preset;
  return std::nullopt;
}

inline SchemeParams preset_params(SchemePreset preset,
                                  std::size_t dimension = 1) {
  for (const auto& info : scheme_presets)
    if (info.preset == preset)
      return SchemeParams::uniform(dimension, info.theta, info.eta);
  raise(ErrorCode::domain_error, "unknown scheme preset");
}

/// One step's worth of inputs: current state, regime held fixed across the
/// step, step length and Brownian increments (one per driver).
struct StepInput {
  std::span<const double> state;
  std::size_t regime = 0;
  double dt = 0.0;
  std::span<const double> dw;
};

namespace detail {

/// Correction sum of the corrected drift,
///   S(x, i) = sum_c (sum_j g^{c,j}(x,i)) * (sum_j d g^{c,j}(x,i) / d x^c),
/// the factorized form of the double driver sum. Scalar case: g * dg/dx.
/// `gsum` is caller scratch of length d.
template <SwitchingModel M>
double diffusion_correction_sum(const M& model, std::span<const double> x,
                                std::size_t regime, std::span<double> gsum,
                                std::span<double> gcol) {
  const std::size_t d = model.dimension();
  const std::size_t m = model.drivers();
  for (std::size_t c = 0; c < d; ++c) gsum[c] = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    model.diffusion(x, regime, j, gcol);
    for (std::size_t c = 0; c < d; ++c) gsum[c] += gcol[c];
  }
  double total = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double dsum = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      dsum += model.diffusion_derivative(x, regime, j, c);
    total += gsum[c] * dsum;
  }
  return total;
}

} // namespace detail

/// Reusable predictor-corrector stepper. Owns all per-step scratch so the
/// hot loop over millions of steps allocates nothing.
template <SwitchingModel M>
class PcemStepper {
public:
  PcemStepper(const M& model, SchemeParams params)
      : model_(&model), params_(std::move(params)),
        explicit_euler_(params_.is_explicit_euler()),
        f_cur_(model.dimension()), f_pred_(model.dimension()),
        pred_(model.dimension()), g_cur_(model.dimension()),
        g_pred_(model.dimension()), gsum_(model.dimension()) {
    if (params_.dimension() != model.dimension())
      raise(ErrorCode::length_mismatch,
            "scheme parameter length " + std::to_string(params_.dimension()) +
                " does not match model dimension " +
                std::to_string(model.dimension()));
  }

  const SchemeParams& params() const noexcept { return params_; }

  void predictor(std::span<const double> y, std::size_t regime, double dt,
                 std::span<const double> dw, std::span<double> out) {
    const std::size_t d = model_->dimension();
    model_->drift(y, regime, f_cur_);
    for (std::size_t k = 0; k < d; ++k) out[k] = y[k] + f_cur_[k] * dt;
    for (std::size_t j = 0; j < model_->drivers(); ++j) {
      model_->diffusion(y, regime, j, g_cur_);
      for (std::size_t k = 0; k < d; ++k) out[k] += g_cur_[k] * dw[j];
    }
  }

  /// Corrector stage; `pred` must be the predictor for the same inputs.
  void corrector(std::span<const double> y, std::size_t regime, double dt,
                 std::span<const double> dw, std::span<const double> pred,
                 std::span<double> out) {
    const std::size_t d = model_->dimension();
    if (explicit_euler_) {
      // Identical arithmetic to the predictor, so the reduction to the
      // plain Euler-Maruyama step is bit-exact.
      predictor(y, regime, dt, dw, out);
      return;
    }
    const double s_cur =
        detail::diffusion_correction_sum(*model_, y, regime, gsum_, g_cur_);
    const double s_pred =
        detail::diffusion_correction_sum(*model_, pred, regime, gsum_, g_cur_);
    model_->drift(y, regime, f_cur_);
    model_->drift(pred, regime, f_pred_);
    for (std::size_t k = 0; k < d; ++k) {
      const double th = params_.theta[k];
      const double et = params_.eta[k];
      const double fbar_cur = f_cur_[k] - et * s_cur;
      const double fbar_pred = f_pred_[k] - et * s_pred;
      out[k] = y[k] + (th * fbar_pred + (1.0 - th) * fbar_cur) * dt;
    }
    for (std::size_t j = 0; j < model_->drivers(); ++j) {
      model_->diffusion(y, regime, j, g_cur_);
      model_->diffusion(pred, regime, j, g_pred_);
      for (std::size_t k = 0; k < d; ++k) {
        const double et = params_.eta[k];
        out[k] += (et * g_pred_[k] + (1.0 - et) * g_cur_[k]) * dw[j];
      }
    }
  }

  void step(std::span<const double> y, std::size_t regime, double dt,
            std::span<const double> dw, std::span<double> out) {
    if (explicit_euler_) {
      predictor(y, regime, dt, dw, out);
      return;
    }
    predictor(y, regime, dt, dw, pred_);
    corrector(y, regime, dt, dw, pred_, out);
  }

private:
  const M* model_;
  SchemeParams params_;
  bool explicit_euler_;
  std::vector<double> f_cur_, f_pred_, pred_, g_cur_, g_pred_, gsum_;
};

/// Corrected drift f(x,i) - eta_k * S(x,i), the drift the corrector blends.
template <SwitchingModel M>
std::vector<double> corrected_drift(const M& model,
                                    std::span<const double> eta,
                                    std::span<const double> x,
                                    std::size_t regime) {
  const std::size_t d = model.dimension();
  if (eta.size() != d)
    raise(ErrorCode::length_mismatch,
          "eta length does not match model dimension");
  std::vector<double> out(d), gsum(d), gcol(d);
  const double s = detail::diffusion_correction_sum(model, x, regime,
                                                    std::span<double>(gsum),
                                                    std::span<double>(gcol));
  model.drift(x, regime, out);
  for (std::size_t k = 0; k < d; ++k) out[k] -= eta[k] * s;
  return out;
}

template <SwitchingModel M>
std::vector<double> predictor_step(const M& model, const StepInput& input) {
  std::vector<double> out(model.dimension());
  PcemStepper<M> stepper(model, SchemeParams::uniform(model.dimension(), 0.0, 0.0));
  stepper.predictor(input.state, input.regime, input.dt, input.dw, out);
  return out;
}

template <SwitchingModel M>
std::vector<double> corrector_step(const M& model, const SchemeParams& params,
                                   const StepInput& input,
                                   std::span<const double> predictor) {
  std::vector<double> out(model.dimension());
  PcemStepper<M> stepper(model, params);
  stepper.corrector(input.state, input.regime, input.dt, input.dw, predictor,
                    out);
  return out;
}

/// Full two-stage step: corrector applied to the predictor, regime held at
/// its value at the start of the step.
template <SwitchingModel M>
std::vector<double> pcem_step(const M& model, const SchemeParams& params,
                              const StepInput& input) {
  std::vector<double> out(model.dimension());
  PcemStepper<M> stepper(model, params);
  stepper.step(input.state, input.regime, input.dt, input.dw, out);
  return out;
}

/// Diagnostic split of a scalar corrector step into the Euler-Maruyama
/// result plus four residual increments:
///   r1 = theta * (f(pred) - f(y)) * dt
///   r2 = -theta*eta * (g*g'(pred) - g*g'(y)) * dt
///   r3 = -eta * g*g'(y) * dt
///   r4 = eta * (g(pred) - g(y)) * dW
/// em_step + r1 + r2 + r3 + r4 reproduces the corrector output.
struct ResidualDecomposition {
  double em_step = 0.0; // Euler-Maruyama next state
  std::array<double, 4> residuals{};

  double reconstructed() const {
    return em_step + residuals[0] + residuals[1] + residuals[2] +
           residuals[3];
  }
};

template <SwitchingModel M>
ResidualDecomposition residual_decomposition(const M& model,
                                             const SchemeParams& params,
                                             const StepInput& input) {
  if (model.dimension() != 1 || model.drivers() != 1)
    raise(ErrorCode::dimension_unsupported,
          "residual decomposition is defined for scalar models only");
  const double theta = params.theta[0];
  const double eta = params.eta[0];
  const double y = input.state[0];
  const double dt = input.dt;
  const double dw = input.dw[0];
  const std::size_t i = input.regime;

  double buf[1];
  std::span<double> out(buf);
  std::span<const double> ys(&y, 1);

  model.drift(ys, i, out);
  const double f_y = buf[0];
  model.diffusion(ys, i, 0, out);
  const double g_y = buf[0];
  const double dg_y = model.diffusion_derivative(ys, i, 0, 0);

  const double pred = y + f_y * dt + g_y * dw;
  std::span<const double> ps(&pred, 1);
  model.drift(ps, i, out);
  const double f_p = buf[0];
  model.diffusion(ps, i, 0, out);
  const double g_p = buf[0];
  const double dg_p = model.diffusion_derivative(ps, i, 0, 0);

  ResidualDecomposition dec;
  dec.em_step = y + f_y * dt + g_y * dw;
  dec.residuals[0] = theta * (f_p - f_y) * dt;
  dec.residuals[1] = -theta * eta * (g_p * dg_p - g_y * dg_y) * dt;
  dec.residuals[2] = -eta * g_y * dg_y * dt;
  dec.residuals[3] = eta * (g_p - g_y) * dw;
  return dec;
}

} // namespace pcem
