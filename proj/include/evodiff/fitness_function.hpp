#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace evodiff {

/// Black-box objective to maximize. `evaluate` must be pure. When
/// `concurrent_safe` is set, populations may be evaluated on several threads.
struct FitnessFunction {
  std::string name;
  std::size_t dim = 0;  // 0 accepts any length
  bool concurrent_safe = true;
  std::function<double(std::span<const double>)> evaluate;

  double operator()(std::span<const double> x) const;
};

}  // namespace evodiff
