#include "evodiff/grid_flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evodiff/error.hpp"

namespace evodiff {

bool DesignGrid::fluid(int x, int y) const {
  const double v = std::clamp(values[static_cast<std::size_t>(y * width + x)], 0.0, 1.0);
  return v > 0.5;
}

std::vector<bool> DesignGrid::fluid_mask() const {
  std::vector<bool> mask(values.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) mask[static_cast<std::size_t>(y * width + x)] = fluid(x, y);
  }
  return mask;
}

namespace {

int resolve_end(int end, int height) { return end < 0 ? height : end; }

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

GridFlowSystem::GridFlowSystem(const DesignGrid& design, const FlowParams& params)
    : width_(design.width), height_(design.height) {
  if (width_ < 2 || height_ < 2) throw ConfigError("flow grid must be at least 2 x 2");
  if (design.values.size() != static_cast<std::size_t>(width_ * height_)) {
    throw ConfigError("flow design has " + std::to_string(design.values.size()) +
                      " values, expected " + std::to_string(width_ * height_));
  }
  if (!(params.solid_conductance_floor > 0.0)) {
    throw ConfigError("solid conductance floor must be > 0");
  }
  in_begin_ = params.inlet_begin;
  in_end_ = resolve_end(params.inlet_end, height_);
  out_begin_ = params.outlet_begin;
  out_end_ = resolve_end(params.outlet_end, height_);
  if (in_begin_ < 0 || in_end_ > height_ || in_begin_ >= in_end_ || out_begin_ < 0 ||
      out_end_ > height_ || out_begin_ >= out_end_) {
    throw ConfigError("inlet/outlet row ranges must be non-empty and inside the grid");
  }

  const auto n = static_cast<std::size_t>(width_ * height_);
  std::vector<double> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = design.values[i];
    if (std::isnan(v)) throw FitnessError("flow design contains NaN");
    cell[i] = std::clamp(v, 0.0, 1.0) > 0.5 ? 1.0 : params.solid_conductance_floor;
  }
  east_.assign(n, 0.0);
  south_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const auto c = static_cast<std::size_t>(y * width_ + x);
      if (x + 1 < width_) {
        east_[c] = harmonic(cell[c], cell[c + 1]);
        diag_[c] += east_[c];
        diag_[c + 1] += east_[c];
      }
      if (y + 1 < height_) {
        const auto below = c + static_cast<std::size_t>(width_);
        south_[c] = harmonic(cell[c], cell[below]);
        diag_[c] += south_[c];
        diag_[below] += south_[c];
      }
    }
  }

  rhs_.assign(n, 0.0);
  const double q_in = params.flow_rate / (in_end_ - in_begin_);
  const double q_out = params.flow_rate / (out_end_ - out_begin_);
  for (int y = in_begin_; y < in_end_; ++y) rhs_[static_cast<std::size_t>(y * width_)] += q_in;
  for (int y = out_begin_; y < out_end_; ++y) {
    rhs_[static_cast<std::size_t>(y * width_ + width_ - 1)] -= q_out;
  }
  grounded_ = out_begin_ * width_ + width_ - 1;
  diag_[static_cast<std::size_t>(grounded_)] = 1.0;
  rhs_[static_cast<std::size_t>(grounded_)] = 0.0;
}

void GridFlowSystem::apply(std::span<const double> in, std::span<double> out) const {
  const auto g = static_cast<std::size_t>(grounded_);
  for (std::size_t c = 0; c < diag_.size(); ++c) out[c] = diag_[c] * in[c];
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const auto c = static_cast<std::size_t>(y * width_ + x);
      if (x + 1 < width_) {
        const auto e = c + 1;
        if (c != g && e != g) {
          out[c] -= east_[c] * in[e];
          out[e] -= east_[c] * in[c];
        }
      }
      if (y + 1 < height_) {
        const auto s = c + static_cast<std::size_t>(width_);
        if (c != g && s != g) {
          out[c] -= south_[c] * in[s];
          out[s] -= south_[c] * in[c];
        }
      }
    }
  }
}

double pressure_drop(const GridFlowSystem& system, std::span<const double> pressure) {
  const int w = system.width();
  double inlet = 0.0;
  for (int y = system.inlet_begin(); y < system.inlet_end(); ++y) {
    inlet += pressure[static_cast<std::size_t>(y * w)];
  }
  double outlet = 0.0;
  for (int y = system.outlet_begin(); y < system.outlet_end(); ++y) {
    outlet += pressure[static_cast<std::size_t>(y * w + w - 1)];
  }
  return inlet / (system.inlet_end() - system.inlet_begin()) -
         outlet / (system.outlet_end() - system.outlet_begin());
}

namespace {

using Real = long double;

// Lower band of the grounded system: band[i * (w + 1) + k] = A(i, i - k).
// Neighbours are at offsets 1 and width, so the bandwidth is the grid width.
class BandedCholesky {
 public:
  explicit BandedCholesky(const GridFlowSystem& system)
      : n_(system.size()), w_(static_cast<std::size_t>(system.width())), band_(n_ * (w_ + 1), 0.0L) {
    const auto g = static_cast<std::size_t>(system.grounded_cell());
    const auto& diag = system.diagonal();
    for (std::size_t i = 0; i < n_; ++i) at(i, 0) = diag[i];
    for (std::size_t c = 0; c < n_; ++c) {
      if (c == g) continue;
      const std::size_t x = c % w_;
      if (x + 1 < w_ && c + 1 != g) at(c + 1, 1) = -Real(system.east()[c]);
      if (c + w_ < n_ && c + w_ != g) at(c + w_, w_) = -Real(system.south()[c]);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      Real d = at(j, 0);
      const std::size_t k0 = j > w_ ? j - w_ : 0;
      for (std::size_t k = k0; k < j; ++k) d -= at(j, j - k) * at(j, j - k);
      if (!(d > 0.0L)) throw NumericError("flow system is not positive definite");
      d = std::sqrt(d);
      at(j, 0) = d;
      const std::size_t i_end = std::min(n_, j + w_ + 1);
      for (std::size_t i = j + 1; i < i_end; ++i) {
        Real v = at(i, i - j);
        const std::size_t kk = i > w_ ? i - w_ : 0;
        for (std::size_t k = std::max(kk, k0); k < j; ++k) v -= at(i, i - k) * at(j, j - k);
        at(i, i - j) = v / d;
      }
    }
  }

  void solve(std::vector<Real>& v) const {
    for (std::size_t i = 0; i < n_; ++i) {
      Real acc = v[i];
      const std::size_t k0 = i > w_ ? i - w_ : 0;
      for (std::size_t k = k0; k < i; ++k) acc -= at(i, i - k) * v[k];
      v[i] = acc / at(i, 0);
    }
    for (std::size_t i = n_; i-- > 0;) {
      Real acc = v[i];
      const std::size_t k_end = std::min(n_, i + w_ + 1);
      for (std::size_t k = i + 1; k < k_end; ++k) acc -= at(k, k - i) * v[k];
      v[i] = acc / at(i, 0);
    }
  }

 private:
  Real& at(std::size_t i, std::size_t k) { return band_[i * (w_ + 1) + k]; }
  Real at(std::size_t i, std::size_t k) const { return band_[i * (w_ + 1) + k]; }

  std::size_t n_;
  std::size_t w_;
  std::vector<Real> band_;
};

void apply_extended(const GridFlowSystem& system, const std::vector<Real>& in, std::vector<Real>& out) {
  const auto g = static_cast<std::size_t>(system.grounded_cell());
  const auto w = static_cast<std::size_t>(system.width());
  const std::size_t n = system.size();
  const auto& diag = system.diagonal();
  for (std::size_t c = 0; c < n; ++c) out[c] = diag[c] * in[c];
  for (std::size_t c = 0; c < n; ++c) {
    if (c % w + 1 < w) {
      const std::size_t e = c + 1;
      if (c != g && e != g) {
        const Real k = system.east()[c];
        out[c] -= k * in[e];
        out[e] -= k * in[c];
      }
    }
    if (c + w < n) {
      const std::size_t s = c + w;
      if (c != g && s != g) {
        const Real k = system.south()[c];
        out[c] -= k * in[s];
        out[s] -= k * in[c];
      }
    }
  }
}

Real dot(const std::vector<Real>& u, const std::vector<Real>& v) {
  Real acc = 0.0L;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

}  // namespace

namespace {

Real pressure_drop_extended(const GridFlowSystem& system, const std::vector<Real>& pressure) {
  const int w = system.width();
  Real inlet = 0.0L;
  for (int y = system.inlet_begin(); y < system.inlet_end(); ++y) inlet += pressure[static_cast<std::size_t>(y * w)];
  Real outlet = 0.0L;
  for (int y = system.outlet_begin(); y < system.outlet_end(); ++y) {
    outlet += pressure[static_cast<std::size_t>(y * w + w - 1)];
  }
  return inlet / (system.inlet_end() - system.inlet_begin()) -
         outlet / (system.outlet_end() - system.outlet_begin());
}

}  // namespace

FlowSolution solve_grid_flow(const DesignGrid& design, const FlowParams& params) {
  const GridFlowSystem system(design, params);
  const std::size_t n = system.size();
  const int cap = params.max_iterations > 0 ? params.max_iterations : 20 * static_cast<int>(n) + 1000;

  FlowSolution sol;
  sol.pressure.assign(n, 0.0);
  std::vector<Real> b(system.rhs().begin(), system.rhs().end());
  const Real b_norm = std::sqrt(dot(b, b));
  if (b_norm == 0.0L) return sol;

  // The solid floor puts the condition number near 1e7, where plain Jacobi CG
  // needs thousands of iterations and double rounding sits above the 1e-10
  // target. An exact band factor as preconditioner, in extended precision,
  // converges in one or two steps.
  const BandedCholesky factor(system);
  std::vector<Real> x(n, 0.0L), r = b, z = r, p, ap(n);
  factor.solve(z);
  p = z;
  Real rz = dot(r, z);
  int it = 0;
  Real rel = 1.0L;
  while (it < cap) {
    apply_extended(system, p, ap);
    const Real pap = dot(p, ap);
    if (!(pap > 0.0L)) break;
    const Real alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    // True residual every step: cheap next to the triangular solves.
    apply_extended(system, x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    rel = std::sqrt(dot(r, r)) / b_norm;
    if (rel <= params.tolerance) break;
    z = r;
    factor.solve(z);
    const Real rz_next = dot(r, z);
    const Real beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (!(rel <= params.tolerance)) {
    std::ostringstream msg;
    msg << "conjugate gradient did not converge: relative residual " << static_cast<double>(rel)
        << " after " << it << " iterations";
    throw NumericError(msg.str());
  }
  for (std::size_t i = 0; i < n; ++i) sol.pressure[i] = static_cast<double>(x[i]);
  sol.iterations = it;
  sol.relative_residual = static_cast<double>(rel);
  sol.delta_p = static_cast<double>(pressure_drop_extended(system, x));
  return sol;
}

double grid_flow_delta_p(const DesignGrid& design, const FlowParams& params) {
  return solve_grid_flow(design, params).delta_p;
}

double flow_fitness(const DesignGrid& design, const FlowParams& params) {
  const double dp = grid_flow_delta_p(design, params);
  if (!(dp > 0.0)) throw FitnessError("pressure drop must be positive");
  return -std::log(dp) / 5.0;
}

}  // namespace evodiff
