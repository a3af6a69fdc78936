#pragma once

#include <complex>
#include <span>
#include <vector>

namespace evodiff {

/// Maps unconstrained layer values to permittivities: clamp to [0, 1],
/// optionally snap to `quantization_levels` evenly spaced levels, then map
/// affinely onto [eps_min, eps_max].
struct StackParams {
  double layer_thickness = 1.0;
  double eps_min = 1.0;
  double eps_max = 4.0;
  int quantization_levels = 0;  // 0 or 1 disables quantization
};

struct LayeredStack {
  std::vector<double> layer_values;

  std::vector<double> permittivities(const StackParams& params) const;
};

struct TmmResponse {
  std::complex<double> t;
  std::complex<double> r;
};

/// Characteristic-matrix response of a lossless dielectric multilayer at
/// normal incidence between vacuum half-spaces, with c = 1.
TmmResponse tmm_response(std::span<const double> permittivities, double thickness,
                         double frequency);

/// Complex transmission (Re t, Im t) per frequency.
std::vector<std::complex<double>> tmm_transmission(const LayeredStack& stack,
                                                   const StackParams& params,
                                                   std::span<const double> freqs);

struct TransmissionTarget {
  std::vector<double> x;       // normalized frequency in [0, 1]
  std::vector<double> values;  // target magnitude
};

/// values_j = 1 - 2 (x_j - 0.5)^2 at x_j = j / (n - 1).
TransmissionTarget parabola_target(int n);

enum class MagnitudeMode {
  kModulus,     // | |t| - y |
  kComponents,  // ( | |Re t| - y | + | |Im t| - y | ) / 2
};

struct MetasurfaceParams {
  StackParams stack;
  double f_min = 0.05;
  double f_max = 0.25;
  int n_freq = 64;
  MagnitudeMode magnitude = MagnitudeMode::kModulus;

  /// Physical frequencies for normalized target positions.
  std::vector<double> frequencies(const TransmissionTarget& target) const;
};

double transmission_mae(const LayeredStack& stack, const TransmissionTarget& target,
                        std::span<const double> freqs, const StackParams& stack_params,
                        MagnitudeMode mode = MagnitudeMode::kModulus);

/// -MAE; larger is better.
double transmission_mae_fitness(const LayeredStack& stack, const TransmissionTarget& target,
                                std::span<const double> freqs, const StackParams& stack_params,
                                MagnitudeMode mode = MagnitudeMode::kModulus);

}  // namespace evodiff
