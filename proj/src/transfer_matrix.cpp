#include "evodiff/transfer_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "evodiff/error.hpp"

namespace evodiff {

std::vector<double> LayeredStack::permittivities(const StackParams& params) const {
  std::vector<double> eps(layer_values.size());
  const int q = params.quantization_levels;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    double v = std::clamp(layer_values[i], 0.0, 1.0);
    if (std::isnan(layer_values[i])) throw FitnessError("stack design contains NaN");
    if (q > 1) v = std::round(v * (q - 1)) / (q - 1);
    eps[i] = params.eps_min + v * (params.eps_max - params.eps_min);
  }
  return eps;
}

TmmResponse tmm_response(std::span<const double> permittivities, double thickness,
                         double frequency) {
  using cd = std::complex<double>;
  const cd i1(0.0, 1.0);
  cd m11 = 1.0, m12 = 0.0, m21 = 0.0, m22 = 1.0;
  double optical_vacuum = 0.0;
  for (double eps : permittivities) {
    if (!(eps >= 1.0)) throw ConfigError("layer permittivity must be >= 1");
    const double n = std::sqrt(eps);
    const double delta = 2.0 * std::numbers::pi * frequency * n * thickness;
    const cd a = std::cos(delta);
    const cd b = -i1 * std::sin(delta) / n;
    const cd c = -i1 * n * std::sin(delta);
    const cd d = std::cos(delta);
    const cd n11 = m11 * a + m12 * c;
    const cd n12 = m11 * b + m12 * d;
    const cd n21 = m21 * a + m22 * c;
    const cd n22 = m21 * b + m22 * d;
    m11 = n11;
    m12 = n12;
    m21 = n21;
    m22 = n22;
    optical_vacuum += 2.0 * std::numbers::pi * frequency * thickness;
  }
  const cd denom = m11 + m12 + m21 + m22;
  // Transmission is referenced to an equally thick vacuum slab, so an empty
  // (eps = 1) stack transmits exactly 1 + 0i.
  const cd reference = std::exp(-i1 * optical_vacuum);
  return {2.0 / denom * reference, (m11 + m12 - m21 - m22) / denom};
}

std::vector<std::complex<double>> tmm_transmission(const LayeredStack& stack,
                                                   const StackParams& params,
                                                   std::span<const double> freqs) {
  const std::vector<double> eps = stack.permittivities(params);
  std::vector<std::complex<double>> out;
  out.reserve(freqs.size());
  for (double f : freqs) {
    if (!(f > 0.0)) throw ConfigError("frequencies must be > 0");
    out.push_back(tmm_response(eps, params.layer_thickness, f).t);
  }
  return out;
}

TransmissionTarget parabola_target(int n) {
  if (n < 2) throw ConfigError("parabola target needs n >= 2");
  TransmissionTarget target;
  target.x.resize(static_cast<std::size_t>(n));
  target.values.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / (n - 1);
    target.x[static_cast<std::size_t>(j)] = x;
    target.values[static_cast<std::size_t>(j)] = 1.0 - 2.0 * (x - 0.5) * (x - 0.5);
  }
  return target;
}

std::vector<double> MetasurfaceParams::frequencies(const TransmissionTarget& target) const {
  std::vector<double> f(target.x.size());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = f_min + target.x[j] * (f_max - f_min);
  return f;
}

double transmission_mae(const LayeredStack& stack, const TransmissionTarget& target,
                        std::span<const double> freqs, const StackParams& stack_params,
                        MagnitudeMode mode) {
  if (freqs.size() != target.values.size() || freqs.empty()) {
    throw ConfigError("frequency count must match the target length");
  }
  const auto t = tmm_transmission(stack, stack_params, freqs);
  double total = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double y = target.values[j];
    if (mode == MagnitudeMode::kModulus) {
      total += std::abs(std::abs(t[j]) - y);
    } else {
      total += 0.5 * (std::abs(std::abs(t[j].real()) - y) + std::abs(std::abs(t[j].imag()) - y));
    }
  }
  return total / static_cast<double>(t.size());
}

double transmission_mae_fitness(const LayeredStack& stack, const TransmissionTarget& target,
                                std::span<const double> freqs, const StackParams& stack_params,
                                MagnitudeMode mode) {
  return -transmission_mae(stack, target, freqs, stack_params, mode);
}

}  // namespace evodiff
