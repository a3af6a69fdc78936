#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evodiff/diffusion.hpp"
#include "evodiff/fitness_function.hpp"
#include "evodiff/rng.hpp"

namespace evodiff {

enum class Shaping { kRankZeroSum, kRaw };

/// Where population fitness is measured: on the sampled state itself, or on
/// the denoiser's clean-sample prediction from it.
enum class EvalMode { kDirect, kX0Predicted };

struct GuidanceConfig {
  double alpha = 1.0;
  int n_samples = 30;
  int window_high = 50;  // inclusive
  int window_low = 1;    // inclusive
  Shaping shaping = Shaping::kRankZeroSum;
  EvalMode eval_mode = EvalMode::kDirect;
  bool parallel_eval = false;
  int threads = 1;

  bool in_window(int t) const noexcept { return t <= window_high && t >= window_low; }

  /// Throws ConfigError. `steps` is the schedule length T.
  void validate(int steps) const;
};

struct Population {
  std::vector<std::vector<double>> samples;
  std::vector<double> fitness;
  std::vector<double> weights;
};

/// Draws n samples mean + sqrt(variance) * eps_i, eps_i at counter (dist.step, i).
std::vector<std::vector<double>> sample_population(const DenoisingDistribution& dist, int n,
                                                   const RngStream& rng);

/// Single population member i, identical to element i of sample_population.
std::vector<double> sample_member(const DenoisingDistribution& dist, int i, const RngStream& rng);

/// Zero-sum rank weights: r_i = rank_i / n - (n + 1) / (2n), ascending ranks,
/// ties share their average rank.
std::vector<double> fitness_shape(std::span<const double> fitness);

/// (1/n) * sum_i weights_i * (samples_i - mean).
std::vector<double> estimate_natural_gradient(const std::vector<std::vector<double>>& samples,
                                              std::span<const double> weights,
                                              std::span<const double> mean);

struct GuideStepResult {
  DenoisingDistribution distribution;
  Population population;
  std::vector<double> direction;  // estimated natural gradient before scaling by alpha
  double update_norm = 0.0;       // ||alpha * direction||
};

/// One population-based update of the denoising mean. `denoiser` is required
/// for EvalMode::kX0Predicted. Throws FitnessError carrying step and sample.
GuideStepResult guide_step_detailed(const DenoisingDistribution& dist,
                                    const FitnessFunction& fitness, const GuidanceConfig& cfg,
                                    const Denoiser* denoiser, const RngStream& rng);

DenoisingDistribution guide_step(const DenoisingDistribution& dist, const FitnessFunction& fitness,
                                 const GuidanceConfig& cfg, const Denoiser* denoiser,
                                 const RngStream& rng);

/// Classifier-guidance style update: mean + alpha * variance * grad.
DenoisingDistribution gradient_guidance_baseline(const DenoisingDistribution& dist,
                                                 std::span<const double> grad_at_mean,
                                                 double alpha);

/// Row-major dim x dim Monte-Carlo Fisher information of the mean parameter.
std::vector<double> empirical_fisher(const DenoisingDistribution& dist, int n,
                                     const RngStream& rng);

}  // namespace evodiff
