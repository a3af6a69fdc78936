#include "evodiff/fitness_function.hpp"

#include <cmath>

#include "evodiff/error.hpp"

namespace evodiff {

double FitnessFunction::operator()(std::span<const double> x) const {
  if (dim != 0 && x.size() != dim) {
    throw FitnessError("fitness '" + name + "' expects dimension " + std::to_string(dim) +
                       ", got " + std::to_string(x.size()));
  }
  const double v = evaluate(x);
  if (!std::isfinite(v)) throw FitnessError("fitness '" + name + "' returned a non-finite value");
  return v;
}

}  // namespace evodiff
