#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodiff/diffusion.hpp"
#include "evodiff/fitness.hpp"
#include "evodiff/gmm_denoiser.hpp"
#include "evodiff/guidance.hpp"
#include "evodiff/mlp_denoiser.hpp"
#include "evodiff/schedule.hpp"

namespace evodiff {

/// 16 hex digits of FNV-1a over the compact, key-sorted dump of `doc`.
std::string config_hash(const nlohmann::json& doc);

nlohmann::json prior_to_json(const GaussianMixturePrior& prior);
GaussianMixturePrior prior_from_json(const nlohmann::json& doc);

nlohmann::json model_to_json(const MlpDenoiser& model);
MlpDenoiser model_from_json(const nlohmann::json& doc);

/// {T, beta_min, beta_max, kind, variance}
nlohmann::json schedule_spec_json(int steps, double beta_min, double beta_max,
                                  ReverseVariance variance);
NoiseSchedule schedule_from_json(const nlohmann::json& doc);

GuidanceConfig guidance_from_json(const nlohmann::json& doc);
nlohmann::json guidance_to_json(const GuidanceConfig& cfg);

nlohmann::json design_to_json(const DesignShape& shape, const std::vector<double>& values);
/// Returns values; `shape` receives the parsed shape.
std::vector<double> design_from_json(const nlohmann::json& doc, DesignShape& shape);

nlohmann::json trajectory_to_json(const Trajectory& trajectory, std::uint64_t seed,
                                  const std::string& config_hash, bool include_states);

nlohmann::json diagnostic_to_json(int t, const std::vector<double>& fitness,
                                  const std::vector<double>& weights, double update_norm);

/// Rejects keys of `doc` not in `allowed`.
void require_known_keys(const nlohmann::json& doc, const std::vector<std::string>& allowed,
                        const std::string& context);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& doc, int indent = 2);

}  // namespace evodiff
