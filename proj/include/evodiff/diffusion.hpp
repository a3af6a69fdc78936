#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "evodiff/rng.hpp"
#include "evodiff/schedule.hpp"

namespace evodiff {

/// Gaussian N(mean, variance * I) over x_{t-1} produced by a denoiser at step t.
struct DenoisingDistribution {
  std::vector<double> mean;
  double variance = 0.0;
  int step = 0;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// A pre-trained unconditional denoiser. Implementations are immutable after
/// construction and safe for concurrent calls.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::size_t dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  virtual DenoisingDistribution denoise(std::span<const double> x_t, int t) const = 0;

  /// Estimate of the clean sample x_0 given x_t. For t == 0 returns x_t.
  virtual std::vector<double> predict_x0(std::span<const double> x_t, int t) const = 0;

  /// Both at once; implementations that share work override this.
  virtual std::pair<DenoisingDistribution, std::vector<double>> denoise_with_x0(
      std::span<const double> x_t, int t) const {
    return {denoise(x_t, t), predict_x0(x_t, t)};
  }
};

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, eps from `rng` at counter (t, index).
std::vector<double> forward_noise(std::span<const double> x0, int t, const NoiseSchedule& schedule,
                                  const RngStream& rng, std::uint32_t index = 0);

/// mean + sqrt(variance) * eps with eps from `rng` at counter (dist.step, 0).
/// variance == 0 returns the mean exactly.
std::vector<double> reverse_step(const DenoisingDistribution& dist, const RngStream& rng);

/// DDPM posterior mean of x_{t-1} given x_t and a clean-sample estimate.
std::vector<double> posterior_mean(std::span<const double> x_t, std::span<const double> x0_hat,
                                   int t, const NoiseSchedule& schedule);

struct TrajectoryState {
  int t = 0;
  std::vector<double> x;
  std::vector<double> x0_hat;  // denoiser's clean estimate from x; x itself at t == 0
};

struct Trajectory {
  std::vector<TrajectoryState> states;                 // t = T .. 0 when recorded
  std::vector<std::pair<int, double>> objective_curve;  // filled by callers
  std::vector<double> x_T;
  std::vector<double> x0;
  long fitness_evaluations = 0;
};

}  // namespace evodiff
