#include "evodiff/serialization.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evodiff/error.hpp"
#include "evodiff/rng.hpp"

namespace evodiff {

using nlohmann::json;

std::string config_hash(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

void require_known_keys(const json& doc, const std::vector<std::string>& allowed,
                        const std::string& context) {
  if (!doc.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& item : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

json prior_to_json(const GaussianMixturePrior& prior) {
  return {{"weights", prior.weights}, {"means", prior.means}, {"variances", prior.variances}};
}

GaussianMixturePrior prior_from_json(const json& doc) {
  require_known_keys(doc, {"kind", "weights", "means", "variances"}, "mixture prior");
  GaussianMixturePrior prior;
  try {
    prior.weights = doc.at("weights").get<std::vector<double>>();
    prior.means = doc.at("means").get<std::vector<std::vector<double>>>();
    prior.variances = doc.at("variances").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mixture prior: ") + e.what());
  }
  prior.validate();
  return prior;
}

json model_to_json(const MlpDenoiser& model) {
  return {{"kind", "mlp"},
          {"layer_sizes", model.layer_sizes},
          {"weights", model.weights},
          {"biases", model.biases},
          {"time_embedding", {{"kind", "sinusoidal"}, {"width", model.embed_width}, {"base", model.embed_base}}},
          {"schedule_hash", model.schedule_hash}};
}

MlpDenoiser model_from_json(const json& doc) {
  require_known_keys(doc, {"kind", "layer_sizes", "weights", "biases", "time_embedding", "schedule_hash"},
                     "mlp model");
  MlpDenoiser model;
  try {
    model.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
    model.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    model.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    const json& emb = doc.at("time_embedding");
    model.embed_width = emb.at("width").get<int>();
    model.embed_base = emb.at("base").get<double>();
    model.schedule_hash = doc.value("schedule_hash", std::string{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mlp model: ") + e.what());
  }
  model.validate();
  return model;
}

json schedule_spec_json(int steps, double beta_min, double beta_max, ReverseVariance variance) {
  return {{"T", steps},
          {"beta_min", beta_min},
          {"beta_max", beta_max},
          {"kind", "linear"},
          {"variance", variance == ReverseVariance::kPosterior ? "posterior" : "beta"}};
}

NoiseSchedule schedule_from_json(const json& doc) {
  require_known_keys(doc, {"T", "beta_min", "beta_max", "kind", "variance"}, "schedule");
  try {
    const std::string kind = doc.value("kind", std::string("linear"));
    if (kind != "linear") throw ConfigError("schedule kind must be 'linear'");
    const std::string var = doc.value("variance", std::string("posterior"));
    if (var != "posterior" && var != "beta") {
      throw ConfigError("schedule variance must be 'posterior' or 'beta'");
    }
    const int steps = doc.value("T", 100);
    const BetaRange range = default_beta_range(steps);
    return build_schedule(steps, doc.value("beta_min", range.min),
                          doc.value("beta_max", range.max), ScheduleKind::kLinear,
                          var == "posterior" ? ReverseVariance::kPosterior : ReverseVariance::kBeta);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

GuidanceConfig guidance_from_json(const json& doc) {
  require_known_keys(doc, {"alpha", "n_samples", "window", "shaping", "eval_mode", "parallel_eval"},
                     "guidance");
  GuidanceConfig cfg;
  try {
    cfg.alpha = doc.value("alpha", cfg.alpha);
    cfg.n_samples = doc.value("n_samples", cfg.n_samples);
    if (doc.contains("window")) {
      const auto w = doc.at("window").get<std::vector<int>>();
      if (w.size() != 2) throw ConfigError("guidance window must be [t_high, t_low]");
      cfg.window_high = w[0];
      cfg.window_low = w[1];
    }
    const std::string shaping = doc.value("shaping", std::string("rank_zero_sum"));
    if (shaping == "rank_zero_sum") {
      cfg.shaping = Shaping::kRankZeroSum;
    } else if (shaping == "raw") {
      cfg.shaping = Shaping::kRaw;
    } else {
      throw ConfigError("guidance shaping must be 'rank_zero_sum' or 'raw'");
    }
    const std::string mode = doc.value("eval_mode", std::string("direct"));
    if (mode == "direct") {
      cfg.eval_mode = EvalMode::kDirect;
    } else if (mode == "x0_predicted") {
      cfg.eval_mode = EvalMode::kX0Predicted;
    } else {
      throw ConfigError("guidance eval_mode must be 'direct' or 'x0_predicted'");
    }
    cfg.parallel_eval = doc.value("parallel_eval", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("guidance: ") + e.what());
  }
  return cfg;
}

json guidance_to_json(const GuidanceConfig& cfg) {
  return {{"alpha", cfg.alpha},
          {"n_samples", cfg.n_samples},
          {"window", {cfg.window_high, cfg.window_low}},
          {"shaping", cfg.shaping == Shaping::kRankZeroSum ? "rank_zero_sum" : "raw"},
          {"eval_mode", cfg.eval_mode == EvalMode::kDirect ? "direct" : "x0_predicted"},
          {"parallel_eval", cfg.parallel_eval}};
}

namespace {

const char* kind_name(DesignKind kind) {
  switch (kind) {
    case DesignKind::kGrid:
      return "grid";
    case DesignKind::kStack:
      return "stack";
    case DesignKind::kVector:
      break;
  }
  return "vector";
}

}  // namespace

json design_to_json(const DesignShape& shape, const std::vector<double>& values) {
  return {{"kind", kind_name(shape.kind)}, {"shape", shape.dims}, {"values", values}};
}

std::vector<double> design_from_json(const json& doc, DesignShape& shape) {
  require_known_keys(doc, {"kind", "shape", "values"}, "design");
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "grid") {
      shape.kind = DesignKind::kGrid;
    } else if (kind == "stack") {
      shape.kind = DesignKind::kStack;
    } else if (kind == "vector") {
      shape.kind = DesignKind::kVector;
    } else {
      throw ConfigError("design kind must be grid, stack or vector");
    }
    shape.dims = doc.at("shape").get<std::vector<int>>();
    auto values = doc.at("values").get<std::vector<double>>();
    if (values.size() != shape.size()) throw ConfigError("design values do not match its shape");
    return values;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("design: ") + e.what());
  }
}

json trajectory_to_json(const Trajectory& trajectory, std::uint64_t seed,
                        const std::string& hash, bool include_states) {
  json doc = {{"seed", seed}, {"config_hash", hash}, {"x0", trajectory.x0}};
  json curve = json::array();
  for (const auto& [t, v] : trajectory.objective_curve) curve.push_back({t, v});
  doc["objective_curve"] = std::move(curve);
  if (include_states) {
    json states = json::array();
    for (const auto& s : trajectory.states) states.push_back({{"t", s.t}, {"x", s.x}});
    doc["states"] = std::move(states);
  }
  return doc;
}

json diagnostic_to_json(int t, const std::vector<double>& fitness,
                        const std::vector<double>& weights, double update_norm) {
  return {{"t", t}, {"fitness", fitness}, {"weights", weights}, {"update_norm", update_norm}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void save_json_file(const std::string& path, const json& doc, int indent) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(indent) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace evodiff
