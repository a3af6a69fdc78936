#include "evodiff/fitness.hpp"

#include <cmath>
#include <memory>

#include "evodiff/error.hpp"
#include "evodiff/serialization.hpp"

namespace evodiff {

AnalyticFitness linear_fitness(std::vector<double> g) {
  if (g.empty()) throw ConfigError("linear fitness needs a non-empty g");
  auto coeffs = std::make_shared<const std::vector<double>>(std::move(g));
  AnalyticFitness out;
  out.fitness.name = "linear";
  out.fitness.dim = coeffs->size();
  out.fitness.evaluate = [coeffs](std::span<const double> x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += (*coeffs)[k] * x[k];
    return acc;
  };
  out.gradient = [coeffs](std::span<const double>) { return *coeffs; };
  return out;
}

AnalyticFitness quadratic_fitness(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (n == 0 || a.size() != n * n) throw ConfigError("quadratic fitness: A must be n x n, b length n");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (a[i * n + j] != a[j * n + i]) throw ConfigError("quadratic fitness: A must be symmetric");
    }
  }
  auto mat = std::make_shared<const std::vector<double>>(std::move(a));
  auto lin = std::make_shared<const std::vector<double>>(std::move(b));
  AnalyticFitness out;
  out.fitness.name = "quadratic";
  out.fitness.dim = n;
  out.fitness.evaluate = [mat, lin, n](std::span<const double> x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += (*mat)[i * n + j] * x[j];
      acc += x[i] * row + (*lin)[i] * x[i];
    }
    return acc;
  };
  out.gradient = [mat, lin, n](std::span<const double> x) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += (*mat)[i * n + j] * x[j];
      g[i] = 2.0 * row + (*lin)[i];
    }
    return g;
  };
  return out;
}

std::size_t DesignShape::size() const {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return dims.empty() ? 0 : n;
}

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& params, const char* key, T fallback) {
  return params.contains(key) ? params.at(key).get<T>() : fallback;
}

Task flow_task(const json& params) {
  require_known_keys(params,
                     {"width", "height", "solid_conductance_floor", "inlet_begin", "inlet_end",
                      "outlet_begin", "outlet_end", "flow_rate"},
                     "flow task");
  const int width = get_or(params, "width", 16);
  const int height = get_or(params, "height", 16);
  FlowParams flow;
  flow.solid_conductance_floor = get_or(params, "solid_conductance_floor", flow.solid_conductance_floor);
  flow.inlet_begin = get_or(params, "inlet_begin", flow.inlet_begin);
  flow.inlet_end = get_or(params, "inlet_end", flow.inlet_end);
  flow.outlet_begin = get_or(params, "outlet_begin", flow.outlet_begin);
  flow.outlet_end = get_or(params, "outlet_end", flow.outlet_end);
  flow.flow_rate = get_or(params, "flow_rate", flow.flow_rate);
  // Validates shape and ranges eagerly.
  (void)GridFlowSystem(DesignGrid{width, height, std::vector<double>(static_cast<std::size_t>(width * height), 1.0)}, flow);

  Task task;
  task.name = "flow";
  task.shape = {DesignKind::kGrid, {width, height}};
  auto grid = [width, height](std::span<const double> x) {
    return DesignGrid{width, height, std::vector<double>(x.begin(), x.end())};
  };
  task.fitness.name = "flow";
  task.fitness.dim = static_cast<std::size_t>(width * height);
  task.fitness.evaluate = [grid, flow](std::span<const double> x) {
    return flow_fitness(grid(x), flow);
  };
  task.objective = [grid, flow](std::span<const double> x) {
    return grid_flow_delta_p(grid(x), flow);
  };
  return task;
}

Task metasurface_task(const json& params) {
  require_known_keys(params,
                     {"layers", "n_freq", "f_min", "f_max", "layer_thickness", "eps_min", "eps_max",
                      "quantization_levels", "magnitude"},
                     "metasurface task");
  const int layers = get_or(params, "layers", 32);
  if (layers < 1) throw ConfigError("metasurface task needs layers >= 1");
  MetasurfaceParams ms;
  ms.n_freq = get_or(params, "n_freq", ms.n_freq);
  ms.f_min = get_or(params, "f_min", ms.f_min);
  ms.f_max = get_or(params, "f_max", ms.f_max);
  ms.stack.layer_thickness = get_or(params, "layer_thickness", ms.stack.layer_thickness);
  ms.stack.eps_min = get_or(params, "eps_min", ms.stack.eps_min);
  ms.stack.eps_max = get_or(params, "eps_max", ms.stack.eps_max);
  ms.stack.quantization_levels = get_or(params, "quantization_levels", 0);
  const std::string magnitude = get_or<std::string>(params, "magnitude", "modulus");
  if (magnitude == "modulus") {
    ms.magnitude = MagnitudeMode::kModulus;
  } else if (magnitude == "components") {
    ms.magnitude = MagnitudeMode::kComponents;
  } else {
    throw ConfigError("metasurface magnitude must be 'modulus' or 'components'");
  }
  if (!(ms.f_min > 0.0 && ms.f_max > ms.f_min)) throw ConfigError("need 0 < f_min < f_max");
  if (!(ms.stack.eps_min >= 1.0 && ms.stack.eps_max >= ms.stack.eps_min)) {
    throw ConfigError("need 1 <= eps_min <= eps_max");
  }

  auto target = std::make_shared<const TransmissionTarget>(parabola_target(ms.n_freq));
  auto freqs = std::make_shared<const std::vector<double>>(ms.frequencies(*target));
  Task task;
  task.name = "metasurface";
  task.shape = {DesignKind::kStack, {layers}};
  task.fitness.name = "metasurface";
  task.fitness.dim = static_cast<std::size_t>(layers);
  task.fitness.evaluate = [target, freqs, ms](std::span<const double> x) {
    return transmission_mae_fitness(LayeredStack{{x.begin(), x.end()}}, *target, *freqs, ms.stack,
                                    ms.magnitude);
  };
  task.objective = [target, freqs, ms](std::span<const double> x) {
    return transmission_mae(LayeredStack{{x.begin(), x.end()}}, *target, *freqs, ms.stack,
                            ms.magnitude);
  };
  return task;
}

Task gmm_toy_task(const json& params) {
  require_known_keys(params, {"target"}, "gmm_toy task");
  auto target = std::make_shared<const std::vector<double>>(
      get_or(params, "target", std::vector<double>{2.0, 2.0}));
  if (target->empty()) throw ConfigError("gmm_toy target must be non-empty");
  auto distance2 = [target](std::span<const double> x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += (x[k] - (*target)[k]) * (x[k] - (*target)[k]);
    return acc;
  };
  Task task;
  task.name = "gmm_toy";
  task.shape = {DesignKind::kVector, {static_cast<int>(target->size())}};
  task.fitness.name = "gmm_toy";
  task.fitness.dim = target->size();
  task.fitness.evaluate = [distance2](std::span<const double> x) { return -distance2(x); };
  task.objective = distance2;
  return task;
}

Task analytic_task(const std::string& name, AnalyticFitness f) {
  Task task;
  task.name = name;
  task.shape = {DesignKind::kVector, {static_cast<int>(f.fitness.dim)}};
  task.fitness = f.fitness;
  auto eval = f.fitness.evaluate;
  task.objective = [eval](std::span<const double> x) { return -eval(x); };
  return task;
}

}  // namespace

Task make_task(const std::string& name, const nlohmann::json& params) {
  const json p = params.is_null() ? json::object() : params;
  if (!p.is_object()) throw ConfigError("task parameters must be a JSON object");
  try {
    if (name == "flow") return flow_task(p);
    if (name == "metasurface") return metasurface_task(p);
    if (name == "gmm_toy") return gmm_toy_task(p);
    if (name == "linear") {
      require_known_keys(p, {"g"}, "linear task");
      return analytic_task(name, linear_fitness(p.at("g").get<std::vector<double>>()));
    }
    if (name == "quadratic") {
      require_known_keys(p, {"A", "b"}, "quadratic task");
      const auto rows = p.at("A").get<std::vector<std::vector<double>>>();
      std::vector<double> a;
      for (const auto& row : rows) a.insert(a.end(), row.begin(), row.end());
      return analytic_task(name, quadratic_fitness(std::move(a), p.at("b").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw ConfigError("task '" + name + "': " + e.what());
  }
  throw ConfigError("unknown fitness name '" + name + "'");
}

std::vector<std::string> task_names() { return {"flow", "metasurface", "gmm_toy", "linear", "quadratic"}; }

}  // namespace evodiff
