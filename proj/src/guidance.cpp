#include "evodiff/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evodiff/error.hpp"
#include "evodiff/parallel.hpp"

namespace evodiff {

void GuidanceConfig::validate(int steps) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("guidance alpha must be > 0");
  if (n_samples < 1) throw ConfigError("guidance n_samples must be >= 1");
  if (shaping == Shaping::kRankZeroSum && n_samples < 2) {
    throw ConfigError("rank shaping needs n_samples >= 2");
  }
  if (window_low < 1 || window_high < window_low || window_high > steps) {
    throw ConfigError("guidance window [" + std::to_string(window_low) + ", " +
                      std::to_string(window_high) + "] must lie inside [1, " +
                      std::to_string(steps) + "]");
  }
  if (threads < 1) throw ConfigError("guidance threads must be >= 1");
}

std::vector<double> sample_member(const DenoisingDistribution& dist, int i, const RngStream& rng) {
  std::vector<double> x = rng.normals(static_cast<std::uint32_t>(dist.step),
                                      static_cast<std::uint32_t>(i), dist.dim());
  const double scale = std::sqrt(dist.variance);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = dist.mean[k] + scale * x[k];
  return x;
}

std::vector<std::vector<double>> sample_population(const DenoisingDistribution& dist, int n,
                                                   const RngStream& rng) {
  if (n < 1) throw ConfigError("population size must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_member(dist, i, rng));
  return out;
}

std::vector<double> fitness_shape(std::span<const double> fitness) {
  const std::size_t n = fitness.size();
  if (n < 2) throw ConfigError("fitness shaping needs at least two samples");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(fitness[i])) {
      throw FitnessError("non-finite fitness at sample " + std::to_string(i), -1,
                         static_cast<int>(i));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  // twice the (possibly averaged) 1-based rank, always an integer
  std::vector<long> twice_rank(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start + 1;
    while (stop < n && fitness[order[stop]] == fitness[order[start]]) ++stop;
    const long sum_of_positions = static_cast<long>(start + 1 + stop);  // (start+1) + stop
    for (std::size_t k = start; k < stop; ++k) twice_rank[order[k]] = sum_of_positions;
    start = stop;
  }
  // r_i = rank_i / n - (n + 1) / (2n) = (2 rank_i - (n + 1)) / (2n)
  const double denom = 2.0 * static_cast<double>(n);
  const long center = static_cast<long>(n) + 1;
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = static_cast<double>(twice_rank[i] - center) / denom;
  }
  return weights;
}

std::vector<double> estimate_natural_gradient(const std::vector<std::vector<double>>& samples,
                                              std::span<const double> weights,
                                              std::span<const double> mean) {
  if (samples.size() != weights.size()) {
    throw ConfigError("estimate_natural_gradient: samples and weights differ in length");
  }
  if (samples.empty()) throw ConfigError("estimate_natural_gradient: empty population");
  std::vector<double> g(mean.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != mean.size()) {
      throw ConfigError("estimate_natural_gradient: sample dimension mismatch");
    }
    const double w = weights[i];
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * (samples[i][k] - mean[k]);
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& v : g) v *= inv;
  return g;
}

GuideStepResult guide_step_detailed(const DenoisingDistribution& dist,
                                    const FitnessFunction& fitness, const GuidanceConfig& cfg,
                                    const Denoiser* denoiser, const RngStream& rng) {
  if (cfg.eval_mode == EvalMode::kX0Predicted && denoiser == nullptr) {
    throw ConfigError("x0_predicted evaluation needs a denoiser");
  }
  GuideStepResult result;
  Population& pop = result.population;
  pop.samples = sample_population(dist, cfg.n_samples, rng);
  pop.fitness.assign(pop.samples.size(), 0.0);

  auto evaluate = [&](std::size_t i) {
    double value = 0.0;
    try {
      if (cfg.eval_mode == EvalMode::kX0Predicted) {
        // Samples are candidates for x_{t-1}.
        value = fitness(denoiser->predict_x0(pop.samples[i], dist.step - 1));
      } else {
        value = fitness(pop.samples[i]);
      }
    } catch (const FitnessError& e) {
      throw FitnessError(e.what(), dist.step, static_cast<int>(i));
    } catch (const std::exception& e) {
      throw FitnessError(std::string("fitness evaluation failed: ") + e.what(), dist.step,
                         static_cast<int>(i));
    }
    if (!std::isfinite(value)) {
      throw FitnessError("non-finite fitness at step " + std::to_string(dist.step) +
                             ", sample " + std::to_string(i),
                         dist.step, static_cast<int>(i));
    }
    pop.fitness[i] = value;
  };
  const int threads = cfg.parallel_eval && fitness.concurrent_safe ? cfg.threads : 1;
  parallel_for(pop.samples.size(), threads, evaluate);

  pop.weights = cfg.shaping == Shaping::kRankZeroSum ? fitness_shape(pop.fitness) : pop.fitness;
  result.direction = estimate_natural_gradient(pop.samples, pop.weights, dist.mean);

  result.distribution = dist;
  double norm2 = 0.0;
  for (std::size_t k = 0; k < dist.dim(); ++k) {
    const double step = cfg.alpha * result.direction[k];
    result.distribution.mean[k] += step;
    norm2 += step * step;
  }
  result.update_norm = std::sqrt(norm2);
  return result;
}

DenoisingDistribution guide_step(const DenoisingDistribution& dist, const FitnessFunction& fitness,
                                 const GuidanceConfig& cfg, const Denoiser* denoiser,
                                 const RngStream& rng) {
  return guide_step_detailed(dist, fitness, cfg, denoiser, rng).distribution;
}

DenoisingDistribution gradient_guidance_baseline(const DenoisingDistribution& dist,
                                                 std::span<const double> grad_at_mean,
                                                 double alpha) {
  if (grad_at_mean.size() != dist.dim()) throw ConfigError("gradient dimension mismatch");
  DenoisingDistribution out = dist;
  for (std::size_t k = 0; k < out.dim(); ++k) out.mean[k] += alpha * dist.variance * grad_at_mean[k];
  return out;
}

std::vector<double> empirical_fisher(const DenoisingDistribution& dist, int n,
                                     const RngStream& rng) {
  if (n < 1) throw ConfigError("empirical_fisher needs n >= 1");
  if (!(dist.variance > 0.0)) throw NumericError("empirical_fisher needs variance > 0");
  const std::size_t d = dist.dim();
  std::vector<double> fisher(d * d, 0.0);
  std::vector<double> score(d);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x = sample_member(dist, i, rng);
    for (std::size_t k = 0; k < d; ++k) score[k] = (x[k] - dist.mean[k]) / dist.variance;
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) fisher[a * d + b] += score[a] * score[b];
    }
  }
  for (double& v : fisher) v /= n;
  return fisher;
}

}  // namespace evodiff
