#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodiff/fitness_function.hpp"
#include "evodiff/grid_flow.hpp"
#include "evodiff/transfer_matrix.hpp"

namespace evodiff {

/// Fitness with an analytic gradient, for estimator checks.
struct AnalyticFitness {
  FitnessFunction fitness;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

/// f(x) = g . x
AnalyticFitness linear_fitness(std::vector<double> g);

/// f(x) = x^T A x + b . x with A row-major and symmetric.
AnalyticFitness quadratic_fitness(std::vector<double> a, std::vector<double> b);

enum class DesignKind { kGrid, kStack, kVector };

struct DesignShape {
  DesignKind kind = DesignKind::kVector;
  std::vector<int> dims;  // grid: {width, height}; stack: {layers}; vector: {n}

  std::size_t size() const;
};

/// A named evaluation task: fitness to maximize during guidance, and the raw
/// objective (lower is better) reported for final designs.
struct Task {
  std::string name;
  DesignShape shape;
  FitnessFunction fitness;
  std::function<double(std::span<const double>)> objective;
};

/// Builds a task from the registry. Known names: flow, metasurface, gmm_toy,
/// linear, quadratic. Unknown names or parameter keys throw ConfigError.
Task make_task(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

std::vector<std::string> task_names();

}  // namespace evodiff
