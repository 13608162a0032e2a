#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcem/analysis.hpp"
#include "pcem/ctmc.hpp"
#include "pcem/errors.hpp"
#include "pcem/models.hpp"
#include "pcem/schemes.hpp"

namespace pcem {

/// A scheme selected for an experiment: a named preset or explicit weights.
struct SchemeSpec {
  std::string name; // preset name, or "custom" for explicit weights
  double theta = 0.0;
  double eta = 0.0;

  SchemeParams params() const { return SchemeParams::scalar(theta, eta); }
};

inline SchemeSpec scheme_from_preset(SchemePreset preset) {
  for (const auto& info : scheme_presets)
    if (info.preset == preset)
      return SchemeSpec{std::string(info.name), info.theta, info.eta};
  raise(ErrorCode::domain_error, "unknown scheme preset");
}

inline std::vector<SchemeSpec> all_preset_schemes() {
  std::vector<SchemeSpec> out;
  for (const auto& info : scheme_presets)
    out.push_back(SchemeSpec{std::string(info.name), info.theta, info.eta});
  return out;
}

struct ModelSpec {
  std::string family;               // "linear" or "stability-test"
  std::vector<double> a, b;         // linear
  std::vector<double> alpha, lambda; // stability-test

  std::size_t n_regimes() const {
    return family == "linear" ? a.size() : alpha.size();
  }

  LinearSwitchingModel build() const {
    if (family == "linear") return linear_model(a, b);
    if (family == "stability-test") return stability_model(alpha, lambda);
    raise(ErrorCode::config_error, "unknown model family '" + family + "'");
  }
};

struct StabilityScanSpec {
  double p = 2.0;
  LatticeAxis lambda_dt{-3.0, -0.01, 30};
  LatticeAxis alpha{0.0, 0.97, 30};
};

/// Everything one experiment run needs; loaded from a JSON config file.
struct ExperimentConfig {
  ModelSpec model;
  std::vector<std::vector<double>> generator;
  double y0 = 1.0;
  std::size_t r0 = 0; // 0-based internally; the config file uses 1-based
  double horizon = 1.0;
  std::vector<double> deltas;
  std::vector<SchemeSpec> schemes;
  std::size_t replications = 2;
  std::uint64_t master_seed = 0;
  std::string out_dir = ".";
  StabilityScanSpec stability;

  GeneratorMatrix generator_matrix() const {
    return validate_generator(generator);
  }
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& context,
                                     const std::string& message) {
  raise(ErrorCode::config_error, context + ": " + message);
}

inline const json& require(const json& node, const char* key,
                           const std::string& context) {
  auto it = node.find(key);
  if (it == node.end()) config_fail(context, std::string("missing '") + key + "'");
  return *it;
}

inline double as_number(const json& node, const std::string& context) {
  if (!node.is_number()) config_fail(context, "expected a number");
  return node.get<double>();
}

inline std::vector<double> as_number_list(const json& node,
                                          const std::string& context) {
  if (!node.is_array() || node.empty())
    config_fail(context, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : node) {
    if (!v.is_number()) config_fail(context, "expected numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

inline LatticeAxis as_axis(const json& node, const std::string& context) {
  LatticeAxis axis;
  axis.min = as_number(require(node, "min", context), context + ".min");
  axis.max = as_number(require(node, "max", context), context + ".max");
  const json& count = require(node, "count", context);
  if (!count.is_number_unsigned() || count.get<std::size_t>() == 0)
    config_fail(context + ".count", "expected a positive integer");
  axis.count = count.get<std::size_t>();
  if (!(axis.min <= axis.max))
    config_fail(context, "min must not exceed max");
  return axis;
}

inline SchemeSpec parse_scheme(const json& node, const std::string& context) {
  if (node.is_string()) {
    const std::string name = node.get<std::string>();
    if (auto preset = parse_preset(name)) return scheme_from_preset(*preset);
    config_fail(context, "unknown scheme preset '" + name + "'");
  }
  if (node.is_object()) {
    SchemeSpec spec;
    spec.name = "custom";
    spec.theta =
        as_number(require(node, "theta", context), context + ".theta");
    spec.eta = as_number(require(node, "eta", context), context + ".eta");
    if (!(spec.theta >= 0.0 && spec.theta <= 1.0))
      config_fail(context + ".theta", "must lie in [0, 1]");
    if (!(spec.eta >= 0.0 && spec.eta <= 1.0))
      config_fail(context + ".eta", "must lie in [0, 1]");
    return spec;
  }
  config_fail(context, "expected a preset name or {theta, eta} object");
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root,
                                     const std::string& context) {
  using detail::as_number;
  using detail::as_number_list;
  using detail::config_fail;
  using detail::require;

  if (!root.is_object()) config_fail(context, "top level must be an object");
  ExperimentConfig cfg;

  // model
  {
    const auto& model = require(root, "model", context);
    const std::string mctx = context + ".model";
    cfg.model.family =
        require(model, "family", mctx).get<std::string>();
    if (cfg.model.family == "linear") {
      cfg.model.a = as_number_list(require(model, "a", mctx), mctx + ".a");
      cfg.model.b = as_number_list(require(model, "b", mctx), mctx + ".b");
      if (cfg.model.a.size() != cfg.model.b.size())
        config_fail(mctx, "'a' and 'b' must have one entry per regime");
    } else if (cfg.model.family == "stability-test") {
      cfg.model.alpha =
          as_number_list(require(model, "alpha", mctx), mctx + ".alpha");
      cfg.model.lambda =
          as_number_list(require(model, "lambda", mctx), mctx + ".lambda");
      if (cfg.model.alpha.size() != cfg.model.lambda.size())
        config_fail(mctx, "'alpha' and 'lambda' must have one entry per regime");
    } else {
      config_fail(mctx + ".family",
                  "unknown family '" + cfg.model.family +
                      "' (expected 'linear' or 'stability-test')");
    }
  }

  // generator: row-major array of arrays
  {
    const auto& gen = require(root, "generator", context);
    const std::string gctx = context + ".generator";
    if (!gen.is_array() || gen.empty())
      config_fail(gctx, "expected an array of rows");
    for (const auto& row : gen)
      cfg.generator.push_back(as_number_list(row, gctx));
    if (cfg.generator.size() != cfg.model.n_regimes())
      config_fail(gctx, "generator has " +
                            std::to_string(cfg.generator.size()) +
                            " rows but the model has " +
                            std::to_string(cfg.model.n_regimes()) +
                            " regimes");
  }

  cfg.y0 = as_number(require(root, "y0", context), context + ".y0");

  {
    const auto& r0 = require(root, "r0", context);
    const std::string rctx = context + ".r0";
    if (!r0.is_number_unsigned() || r0.get<std::size_t>() == 0)
      config_fail(rctx, "expected a 1-based regime label (positive integer)");
    const std::size_t label = r0.get<std::size_t>();
    if (label > cfg.model.n_regimes())
      config_fail(rctx, "label " + std::to_string(label) +
                            " exceeds the regime count " +
                            std::to_string(cfg.model.n_regimes()));
    cfg.r0 = label - 1;
  }

  cfg.horizon =
      as_number(require(root, "horizon", context), context + ".horizon");
  if (!(cfg.horizon > 0.0))
    config_fail(context + ".horizon", "must be positive");

  {
    cfg.deltas =
        as_number_list(require(root, "deltas", context), context + ".deltas");
    const std::string dctx = context + ".deltas";
    for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
      if (!(cfg.deltas[i] > 0.0))
        config_fail(dctx + "[" + std::to_string(i) + "]", "must be positive");
      if (cfg.deltas[i] > cfg.horizon)
        config_fail(dctx + "[" + std::to_string(i) + "]",
                    "must not exceed the horizon");
      for (std::size_t j = i + 1; j < cfg.deltas.size(); ++j)
        if (cfg.deltas[i] == cfg.deltas[j])
          config_fail(dctx, "entries must be distinct");
    }
  }

  {
    const auto& schemes = require(root, "schemes", context);
    const std::string sctx = context + ".schemes";
    if (!schemes.is_array() || schemes.empty())
      config_fail(sctx, "expected a non-empty array");
    std::size_t idx = 0;
    for (const auto& s : schemes)
      cfg.schemes.push_back(
          detail::parse_scheme(s, sctx + "[" + std::to_string(idx++) + "]"));
  }

  {
    const auto& reps = require(root, "replications", context);
    if (!reps.is_number_unsigned() || reps.get<std::size_t>() < 2)
      config_fail(context + ".replications", "expected an integer >= 2");
    cfg.replications = reps.get<std::size_t>();
  }

  {
    const auto& seed = require(root, "seed", context);
    if (!seed.is_number_unsigned())
      config_fail(context + ".seed", "expected an unsigned integer");
    cfg.master_seed = seed.get<std::uint64_t>();
  }

  if (auto it = root.find("out_dir"); it != root.end())
    cfg.out_dir = it->get<std::string>();

  if (auto it = root.find("stability"); it != root.end()) {
    const std::string sctx = context + ".stability";
    cfg.stability.p = as_number(require(*it, "p", sctx), sctx + ".p");
    if (!(cfg.stability.p > 0.0)) config_fail(sctx + ".p", "must be positive");
    cfg.stability.lambda_dt =
        detail::as_axis(require(*it, "lambda_dt", sctx), sctx + ".lambda_dt");
    cfg.stability.alpha =
        detail::as_axis(require(*it, "alpha", sctx), sctx + ".alpha");
  }

  // cross checks the generator itself will not catch
  validate_generator(cfg.generator); // throws with precise reason
  cfg.model.build();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::config_error,
          "cannot open config file '" + path.string() + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    raise(ErrorCode::config_error,
          path.string() + ": " + err.what());
  }
  return parse_config(root, path.string());
}

} // namespace pcem
