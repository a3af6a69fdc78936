#include "evodiff/diffusion.hpp"

#include <cmath>

#include "evodiff/error.hpp"

namespace evodiff {

std::vector<double> forward_noise(std::span<const double> x0, int t, const NoiseSchedule& schedule,
                                  const RngStream& rng, std::uint32_t index) {
  const double abar = schedule.alpha_bar(t);  // throws for t outside [1, T]
  if (t < 1) throw ConfigError("forward_noise needs t >= 1");
  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  std::vector<double> out = rng.normals(static_cast<std::uint32_t>(t), index, x0.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = signal * x0[k] + noise * out[k];
  return out;
}

std::vector<double> reverse_step(const DenoisingDistribution& dist, const RngStream& rng) {
  if (dist.variance < 0.0) throw NumericError("denoising variance must be non-negative");
  std::vector<double> out = rng.normals(static_cast<std::uint32_t>(dist.step), 0, dist.dim());
  if (dist.variance == 0.0) return dist.mean;
  const double scale = std::sqrt(dist.variance);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = dist.mean[k] + scale * out[k];
  return out;
}

std::vector<double> posterior_mean(std::span<const double> x_t, std::span<const double> x0_hat,
                                   int t, const NoiseSchedule& schedule) {
  const double abar = schedule.alpha_bar(t);
  const double abar_prev = schedule.alpha_bar(t - 1);
  const double beta = schedule.beta(t);
  const double c0 = std::sqrt(abar_prev) * beta / (1.0 - abar);
  const double ct = std::sqrt(schedule.alpha(t)) * (1.0 - abar_prev) / (1.0 - abar);
  std::vector<double> mean(x_t.size());
  for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = c0 * x0_hat[k] + ct * x_t[k];
  return mean;
}

}  // namespace evodiff
