#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evodiff/diffusion.hpp"
#include "evodiff/fitness.hpp"
#include "evodiff/guidance.hpp"

namespace evodiff {

struct ArmConfig {
  std::string name;
  std::optional<GuidanceConfig> guidance;  // empty = unguided
};

/// How objective curves read a recorded state.
enum class CurveDecode {
  kState,      // objective of x_t itself
  kPredicted,  // objective of the denoiser's x_0 estimate from x_t
};

struct ExperimentConfig {
  std::string task = "gmm_toy";
  nlohmann::json task_params = nlohmann::json::object();
  int n_runs = 100;
  std::uint64_t base_seed = 0;
  int steps = 100;
  double beta_min = 1e-3;  // default_beta_range(steps) unless given
  double beta_max = 0.2;
  ReverseVariance variance = ReverseVariance::kPosterior;
  nlohmann::json denoiser = nlohmann::json::object();
  std::vector<ArmConfig> arms;
  bool record_curves = false;
  int curve_stride = 1;
  CurveDecode curve_decode = CurveDecode::kPredicted;
  std::vector<std::pair<std::string, std::string>> comparisons;
  int bins = 20;
  bool record_wall_time = false;
  int threads = 1;

  /// Throws ConfigError on duplicate arm names, bad windows, or unknown
  /// comparison arms.
  void validate() const;
};

/// Parses the experiment JSON document; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

/// Canonical JSON of every effective value (threads excluded: it never
/// changes results).
nlohmann::json to_json(const ExperimentConfig& cfg);

struct ArmResult {
  std::string arm;
  std::vector<double> x_T;
  std::vector<double> x0;
  double objective = 0.0;
  long n_fitness_evals = 0;
  double wall_ms = 0.0;
  std::vector<std::pair<int, double>> curve;
  bool failed = false;
  int error_code = 0;  // ErrorCode value when failed
  std::string error;
};

struct PairedRunResult {
  int run_index = 0;
  std::uint64_t run_seed = 0;
  std::vector<ArmResult> arms;

  bool failed() const;
  const ArmResult* arm(const std::string& name) const;
};

struct ExperimentOutput {
  std::vector<PairedRunResult> runs;
  int failed_runs = 0;
};

/// Resolved denoiser and task shared by every run of an experiment.
struct ExperimentContext {
  std::shared_ptr<const Denoiser> denoiser;
  Task task;
};

/// Builds the schedule, denoiser and task named by `cfg`.
ExperimentContext make_context(const ExperimentConfig& cfg);

std::uint64_t run_seed(std::uint64_t base_seed, int run_index);

/// Runs every arm of every run. Arms of one run share the trajectory stream;
/// each arm gets its own population stream. `on_run` is invoked in run-index
/// order regardless of the number of worker threads.
ExperimentOutput run_paired_experiment(const ExperimentConfig& cfg, const ExperimentContext& ctx,
                                       const std::function<void(const PairedRunResult&)>& on_run = {});

/// Task objective over the recorded states with t in [t_low, t_high], every
/// `stride` steps starting at t_high, plus t_low.
std::vector<std::pair<int, double>> objective_curve(const Trajectory& trajectory, const Task& task,
                                                    int stride, int t_high, int t_low,
                                                    CurveDecode decode = CurveDecode::kPredicted);

struct HistogramSummary {
  std::string arm_a;
  std::string arm_b;
  std::vector<double> bin_edges;
  std::vector<long> counts;  // histogram of objective(a) - objective(b)
  double median = 0.0;       // of the differences
  double mean = 0.0;
  double median_a = 0.0;
  double median_b = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double fraction_improved = 0.0;  // difference < 0
  long samples = 0;
  long failed_runs = 0;
};

/// Paired-difference summary over runs where both arms succeeded.
/// Statistics do not depend on the order of `runs`.
HistogramSummary summarize(const std::vector<PairedRunResult>& runs, const std::string& arm_a,
                           const std::string& arm_b, int bins);

/// Median of a sample (mean of the middle pair for even sizes).
double median_of(std::vector<double> values);

}  // namespace evodiff
