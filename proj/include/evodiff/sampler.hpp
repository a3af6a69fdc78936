#pragma once

#include <functional>
#include <optional>

#include "evodiff/diffusion.hpp"
#include "evodiff/guidance.hpp"

namespace evodiff {

/// Per-step record of a guided update, for JSON-lines diagnostics.
struct GuidanceDiagnostic {
  int t = 0;
  std::vector<double> fitness;
  std::vector<double> weights;
  double update_norm = 0.0;
};

struct SamplingOptions {
  std::optional<GuidanceConfig> guidance;
  const FitnessFunction* fitness = nullptr;
  bool record_states = false;
  std::function<void(const GuidanceDiagnostic&)> on_guidance;
  /// Called with (t, counter_index) whenever the trajectory stream is read.
  std::function<void(int, int)> on_trajectory_draw;
};

/// Ancestral DDPM sampling from x_T ~ N(0, I) down to x_0, with population
/// guidance replacing the mean on steps inside the guidance window.
/// `trajectory` supplies x_T (counter (0, 0)) and one draw per step
/// (counter (t, 0)) whether or not guidance runs; `population` feeds the
/// guidance samples.
Trajectory run_denoising(const Denoiser& denoiser, const RngStream& trajectory,
                         const RngStream& population, const SamplingOptions& options = {});

}  // namespace evodiff
