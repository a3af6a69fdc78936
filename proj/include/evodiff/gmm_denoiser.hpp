#pragma once

#include <span>
#include <vector>

#include "evodiff/diffusion.hpp"

namespace evodiff {

/// Mixture of diagonal Gaussians used as an exactly-known data prior.
struct GaussianMixturePrior {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;  // per-coordinate, per component

  std::size_t components() const noexcept { return weights.size(); }
  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }

  /// Throws ConfigError on inconsistent shapes, negative weights, weights not
  /// summing to 1 (1e-12) or non-positive variances.
  void validate() const;
};

/// Posterior component probabilities of x_t under the noised mixture at step t.
/// Computed in log-space; always sums to 1.
std::vector<double> gmm_responsibilities(const GaussianMixturePrior& prior,
                                         std::span<const double> x_t, int t,
                                         const NoiseSchedule& schedule);

/// E[x_0 | x_t] for the forward process at step t.
std::vector<double> gmm_posterior_x0_mean(const GaussianMixturePrior& prior,
                                          std::span<const double> x_t, int t,
                                          const NoiseSchedule& schedule);

DenoisingDistribution gmm_denoise(const GaussianMixturePrior& prior, std::span<const double> x_t,
                                  int t, const NoiseSchedule& schedule);

/// Exact draw from the prior using `rng` at counter (0, index).
std::vector<double> sample_prior(const GaussianMixturePrior& prior, const RngStream& rng,
                                 std::uint32_t index);

class AnalyticGmmDenoiser : public Denoiser {
 public:
  AnalyticGmmDenoiser(GaussianMixturePrior prior, NoiseSchedule schedule);

  std::size_t dim() const override { return prior_.dim(); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  const GaussianMixturePrior& prior() const noexcept { return prior_; }

  DenoisingDistribution denoise(std::span<const double> x_t, int t) const override;
  std::vector<double> predict_x0(std::span<const double> x_t, int t) const override;
  std::pair<DenoisingDistribution, std::vector<double>> denoise_with_x0(
      std::span<const double> x_t, int t) const override;

 private:
  GaussianMixturePrior prior_;
  NoiseSchedule schedule_;
};

}  // namespace evodiff
