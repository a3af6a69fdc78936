#pragma once

#include <string>
#include <vector>

namespace evodiff {

enum class ScheduleKind { kLinear };

/// Which per-step variance the reverse process uses.
enum class ReverseVariance { kPosterior, kBeta };

/// Precomputed DDPM noise schedule. Steps are 1-based: t = 1..T. The 0-based
/// vectors hold entry t at index t-1; alpha_bar(0) is 1 by convention.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, ReverseVariance variance = ReverseVariance::kPosterior);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }

  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_.at(index(t)); }
  double posterior_var(int t) const { return posterior_vars_.at(index(t)); }

  /// Variance of the reverse step at t, per the configured choice.
  double reverse_var(int t) const {
    return variance_ == ReverseVariance::kPosterior ? posterior_var(t) : beta(t);
  }

  ReverseVariance variance_kind() const noexcept { return variance_; }

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }
  const std::vector<double>& posterior_vars() const noexcept { return posterior_vars_; }

  /// Hex hash of the defining parameters; stored alongside trained models.
  std::string hash() const;

 private:
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> posterior_vars_;
  ReverseVariance variance_;
};

struct BetaRange {
  double min;
  double max;
};

/// Default linear range for a T-step schedule: the usual 1000-step endpoints
/// (1e-4, 0.02) scaled by 1000 / T, so that alpha_bar(T) stays near 0 for
/// short schedules. beta_max is capped at 0.999.
BetaRange default_beta_range(int steps);

NoiseSchedule build_schedule(int steps, double beta_min, double beta_max,
                             ScheduleKind kind = ScheduleKind::kLinear,
                             ReverseVariance variance = ReverseVariance::kPosterior);

}  // namespace evodiff
