#include "evodiff/gmm_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "evodiff/error.hpp"

namespace evodiff {

void GaussianMixturePrior::validate() const {
  const std::size_t k = weights.size();
  if (k == 0) throw ConfigError("mixture prior needs at least one component");
  if (means.size() != k || variances.size() != k) {
    throw ConfigError("mixture prior: weights, means and variances differ in length");
  }
  const std::size_t n = means.front().size();
  if (n == 0) throw ConfigError("mixture prior: zero-dimensional means");
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!(weights[c] >= 0.0)) throw ConfigError("mixture prior: negative weight");
    total += weights[c];
    if (means[c].size() != n || variances[c].size() != n) {
      throw ConfigError("mixture prior: component dimensions differ");
    }
    for (double v : variances[c]) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("mixture prior: variances must be > 0");
    }
    for (double m : means[c]) {
      if (!std::isfinite(m)) throw ConfigError("mixture prior: non-finite mean");
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture prior: weights must sum to 1");
}

namespace {

void check_dims(const GaussianMixturePrior& prior, std::span<const double> x_t) {
  if (x_t.size() != prior.dim()) {
    throw ConfigError("state dimension " + std::to_string(x_t.size()) +
                      " does not match prior dimension " + std::to_string(prior.dim()));
  }
}

// Responsibilities and the blended posterior mean in one pass over components.
std::vector<double> responsibilities_impl(const GaussianMixturePrior& prior,
                                          std::span<const double> x_t, double abar) {
  const double root = std::sqrt(abar);
  const std::size_t k = prior.components();
  std::vector<double> logp(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (prior.weights[c] <= 0.0) {
      logp[c] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double acc = 0.0;
    const auto& m = prior.means[c];
    const auto& s = prior.variances[c];
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      const double var = abar * s[i] + (1.0 - abar);
      const double d = x_t[i] - root * m[i];
      acc += std::log(2.0 * std::numbers::pi * var) + d * d / var;
    }
    logp[c] = std::log(prior.weights[c]) - 0.5 * acc;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& v : logp) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logp) v /= total;
  return logp;
}

std::vector<double> x0_mean_impl(const GaussianMixturePrior& prior, std::span<const double> x_t,
                                 double abar) {
  const std::vector<double> resp = responsibilities_impl(prior, x_t, abar);
  const double root = std::sqrt(abar);
  std::vector<double> out(x_t.size(), 0.0);
  for (std::size_t c = 0; c < resp.size(); ++c) {
    if (resp[c] == 0.0) continue;
    const auto& m = prior.means[c];
    const auto& s = prior.variances[c];
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      const double var = abar * s[i] + (1.0 - abar);
      const double cond = m[i] + root * s[i] / var * (x_t[i] - root * m[i]);
      out[i] += resp[c] * cond;
    }
  }
  return out;
}

}  // namespace

std::vector<double> gmm_responsibilities(const GaussianMixturePrior& prior,
                                         std::span<const double> x_t, int t,
                                         const NoiseSchedule& schedule) {
  check_dims(prior, x_t);
  return responsibilities_impl(prior, x_t, schedule.alpha_bar(t));
}

std::vector<double> gmm_posterior_x0_mean(const GaussianMixturePrior& prior,
                                          std::span<const double> x_t, int t,
                                          const NoiseSchedule& schedule) {
  check_dims(prior, x_t);
  if (t == 0) return {x_t.begin(), x_t.end()};
  return x0_mean_impl(prior, x_t, schedule.alpha_bar(t));
}

DenoisingDistribution gmm_denoise(const GaussianMixturePrior& prior, std::span<const double> x_t,
                                  int t, const NoiseSchedule& schedule) {
  if (t < 1) throw ConfigError("gmm_denoise needs t >= 1");
  const std::vector<double> x0_hat = gmm_posterior_x0_mean(prior, x_t, t, schedule);
  return {posterior_mean(x_t, x0_hat, t, schedule), schedule.reverse_var(t), t};
}

std::vector<double> sample_prior(const GaussianMixturePrior& prior, const RngStream& rng,
                                 std::uint32_t index) {
  double u = 0.0;
  rng.uniforms(0, index, std::span<double>(&u, 1));
  std::size_t chosen = prior.components() - 1;
  double cumulative = 0.0;
  for (std::size_t c = 0; c < prior.components(); ++c) {
    cumulative += prior.weights[c];
    if (u < cumulative) {
      chosen = c;
      break;
    }
  }
  std::vector<double> x = rng.normals(1, index, prior.dim());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = prior.means[chosen][i] + std::sqrt(prior.variances[chosen][i]) * x[i];
  }
  return x;
}

AnalyticGmmDenoiser::AnalyticGmmDenoiser(GaussianMixturePrior prior, NoiseSchedule schedule)
    : prior_(std::move(prior)), schedule_(std::move(schedule)) {
  prior_.validate();
}

DenoisingDistribution AnalyticGmmDenoiser::denoise(std::span<const double> x_t, int t) const {
  return denoise_with_x0(x_t, t).first;
}

std::vector<double> AnalyticGmmDenoiser::predict_x0(std::span<const double> x_t, int t) const {
  return gmm_posterior_x0_mean(prior_, x_t, t, schedule_);
}

std::pair<DenoisingDistribution, std::vector<double>> AnalyticGmmDenoiser::denoise_with_x0(
    std::span<const double> x_t, int t) const {
  if (t < 1) throw ConfigError("denoise needs t >= 1");
  std::vector<double> x0_hat = gmm_posterior_x0_mean(prior_, x_t, t, schedule_);
  DenoisingDistribution dist{posterior_mean(x_t, x0_hat, t, schedule_), schedule_.reverse_var(t),
                             t};
  return {std::move(dist), std::move(x0_hat)};
}

}  // namespace evodiff
