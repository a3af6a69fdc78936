#include "evodiff/sampler.hpp"

#include "evodiff/error.hpp"

namespace evodiff {

Trajectory run_denoising(const Denoiser& denoiser, const RngStream& trajectory,
                         const RngStream& population, const SamplingOptions& options) {
  const int steps = denoiser.schedule().steps();
  const bool guided = options.guidance.has_value();
  if (guided) {
    if (options.fitness == nullptr) throw ConfigError("guided sampling needs a fitness function");
    options.guidance->validate(steps);
  }

  Trajectory out;
  std::vector<double> x = trajectory.normals(0, 0, denoiser.dim());
  if (options.on_trajectory_draw) options.on_trajectory_draw(0, 0);
  out.x_T = x;
  if (options.record_states) out.states.push_back({steps, x, {}});

  for (int t = steps; t >= 1; --t) {
    DenoisingDistribution dist;
    if (options.record_states) {
      auto [d, x0_hat] = denoiser.denoise_with_x0(x, t);
      dist = std::move(d);
      out.states.back().x0_hat = std::move(x0_hat);
    } else {
      dist = denoiser.denoise(x, t);
    }

    if (guided && options.guidance->in_window(t)) {
      GuideStepResult step =
          guide_step_detailed(dist, *options.fitness, *options.guidance, &denoiser, population);
      out.fitness_evaluations += static_cast<long>(step.population.samples.size());
      if (options.on_guidance) {
        options.on_guidance({t, step.population.fitness, step.population.weights,
                             step.update_norm});
      }
      dist = std::move(step.distribution);
    }

    x = reverse_step(dist, trajectory);
    if (options.on_trajectory_draw) options.on_trajectory_draw(t, 0);
    if (options.record_states) {
      out.states.push_back({t - 1, x, t - 1 == 0 ? x : std::vector<double>{}});
    }
  }
  out.x0 = std::move(x);
  return out;
}

}  // namespace evodiff
