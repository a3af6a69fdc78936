#pragma once

#include <span>
#include <vector>

namespace evodiff {

/// W x H design, row-major (index = y * width + x). A cell is fluid when its
/// value clamped to [0, 1] exceeds 0.5.
struct DesignGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  bool fluid(int x, int y) const;
  std::vector<bool> fluid_mask() const;
};

/// Inlets sit on the left column, outlets on the right column. Row ranges are
/// half-open; an end of -1 means "to the last row".
struct FlowParams {
  double solid_conductance_floor = 1e-6;
  int inlet_begin = 0;
  int inlet_end = -1;
  int outlet_begin = 0;
  int outlet_end = -1;
  double flow_rate = 1.0;
  double tolerance = 1e-10;
  int max_iterations = 0;  // 0 picks a size-based cap
};

/// Grounded conductance-network system A p = b. The grounded outlet cell is
/// kept as an identity row so that the unknown vector covers every cell.
class GridFlowSystem {
 public:
  GridFlowSystem(const DesignGrid& design, const FlowParams& params);

  std::size_t size() const noexcept { return diag_.size(); }
  const std::vector<double>& rhs() const noexcept { return rhs_; }
  const std::vector<double>& diagonal() const noexcept { return diag_; }
  int grounded_cell() const noexcept { return grounded_; }
  const std::vector<double>& east() const noexcept { return east_; }
  const std::vector<double>& south() const noexcept { return south_; }

  void apply(std::span<const double> in, std::span<double> out) const;

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int inlet_begin() const noexcept { return in_begin_; }
  int inlet_end() const noexcept { return in_end_; }
  int outlet_begin() const noexcept { return out_begin_; }
  int outlet_end() const noexcept { return out_end_; }

 private:
  int width_;
  int height_;
  int in_begin_, in_end_, out_begin_, out_end_;
  int grounded_;
  std::vector<double> east_;   // conductance to (x+1, y)
  std::vector<double> south_;  // conductance to (x, y+1)
  std::vector<double> diag_;
  std::vector<double> rhs_;
};

struct FlowSolution {
  std::vector<double> pressure;
  double delta_p = 0.0;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradient preconditioned by a banded Cholesky factor, carried out
/// in long double. Throws NumericError if the tolerance is not reached within
/// the iteration cap.
FlowSolution solve_grid_flow(const DesignGrid& design, const FlowParams& params = {});

/// Mean inlet pressure minus mean outlet pressure for `pressure`.
double pressure_drop(const GridFlowSystem& system, std::span<const double> pressure);

double grid_flow_delta_p(const DesignGrid& design, const FlowParams& params = {});

/// -ln(delta_p) / 5; larger is better.
double flow_fitness(const DesignGrid& design, const FlowParams& params = {});

}  // namespace evodiff
