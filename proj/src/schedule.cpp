#include "evodiff/schedule.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "evodiff/error.hpp"
#include "evodiff/rng.hpp"

namespace evodiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, ReverseVariance variance)
    : betas_(std::move(betas)), variance_(variance) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
  const std::size_t n = betas_.size();
  alphas_.resize(n);
  alpha_bars_.resize(n);
  posterior_vars_.resize(n);
  double running = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double beta = betas_[i];
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta values must lie in (0, 1)");
    alphas_[i] = 1.0 - beta;
    const double previous = running;
    running *= alphas_[i];
    alpha_bars_[i] = running;
    posterior_vars_[i] = i == 0 ? beta : beta * (1.0 - previous) / (1.0 - running);
  }
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw ConfigError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) +
                      "]");
  }
  return static_cast<std::size_t>(t - 1);
}

std::string NoiseSchedule::hash() const {
  std::string bytes(reinterpret_cast<const char*>(betas_.data()), betas_.size() * sizeof(double));
  bytes.push_back(variance_ == ReverseVariance::kPosterior ? 'p' : 'b');
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

BetaRange default_beta_range(int steps) {
  if (steps < 1) throw ConfigError("schedule length T must be >= 1");
  const double scale = 1000.0 / steps;
  return {std::min(1e-4 * scale, 0.999), std::min(0.02 * scale, 0.999)};
}

NoiseSchedule build_schedule(int steps, double beta_min, double beta_max, ScheduleKind kind,
                             ReverseVariance variance) {
  if (steps < 1) throw ConfigError("schedule length T must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ConfigError("schedule bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  switch (kind) {
    case ScheduleKind::kLinear:
      for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        betas[static_cast<std::size_t>(i)] = beta_min + frac * (beta_max - beta_min);
      }
      break;
  }
  return NoiseSchedule(std::move(betas), variance);
}

}  // namespace evodiff
