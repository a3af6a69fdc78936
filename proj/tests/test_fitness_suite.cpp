#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>

#include "evodiff/error.hpp"
#include "evodiff/fitness.hpp"
#include "evodiff/grid_flow.hpp"
#include "evodiff/rng.hpp"
#include "evodiff/transfer_matrix.hpp"

using namespace evodiff;

namespace {

DesignGrid filled(int w, int h, double v) {
  return {w, h, std::vector<double>(static_cast<std::size_t>(w * h), v)};
}

DesignGrid random_grid(int w, int h, const RngStream& rng, std::uint32_t idx) {
  DesignGrid g = filled(w, h, 0.0);
  rng.uniforms(0, idx, g.values);
  return g;
}

// Dense oracle: assemble the grounded network from scratch and solve with LU.
Eigen::VectorXd dense_pressures(const DesignGrid& g, double floor) {
  const int w = g.width, h = g.height, n = w * h;
  auto cond = [&](int c) { return std::clamp(g.values[static_cast<std::size_t>(c)], 0.0, 1.0) > 0.5 ? 1.0 : floor; };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  auto couple = [&](int p, int q) {
    const double k = 2.0 * cond(p) * cond(q) / (cond(p) + cond(q));
    a(p, p) += k;
    a(q, q) += k;
    a(p, q) -= k;
    a(q, p) -= k;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) couple(y * w + x, y * w + x + 1);
      if (y + 1 < h) couple(y * w + x, (y + 1) * w + x);
    }
  }
  for (int y = 0; y < h; ++y) {
    b(y * w) += 1.0 / h;
    b(y * w + w - 1) -= 1.0 / h;
  }
  const int ground = w - 1;
  a.row(ground).setZero();
  a.col(ground).setZero();
  a(ground, ground) = 1.0;
  b(ground) = 0.0;
  return a.fullPivLu().solve(b);
}

// Rouard recursion over Fresnel interface coefficients; independent of the
// characteristic-matrix code.
std::complex<double> airy_reflection(const std::vector<double>& eps, double d, double f) {
  using cd = std::complex<double>;
  std::vector<double> n{1.0};
  for (double e : eps) n.push_back(std::sqrt(e));
  n.push_back(1.0);
  const std::size_t last = n.size() - 2;  // interface between final layer and exit medium
  cd gamma = (n[last] - n[last + 1]) / (n[last] + n[last + 1]);
  for (std::size_t j = last; j-- > 0;) {
    const double r = (n[j] - n[j + 1]) / (n[j] + n[j + 1]);
    const double delta = 2.0 * std::numbers::pi * f * n[j + 1] * d;
    const cd phase = std::exp(cd(0.0, -2.0 * delta));
    gamma = (r + gamma * phase) / (1.0 + r * gamma * phase);
  }
  return gamma;
}

}  // namespace

TEST_CASE("analytic fitness functions") {
  const auto lin = linear_fitness({1.0, 0.0, 0.0});
  CHECK(lin.fitness(std::vector<double>{2.0, 0.0, 0.0}) == 2.0);
  CHECK_THROWS_AS(lin.fitness(std::vector<double>{2.0, 0.0}), FitnessError);

  const auto q = quadratic_fitness({1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0});
  const std::vector<double> x{0.3, -1.2, 2.0};
  const auto g = q.gradient(x);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(g[k] == doctest::Approx(2.0 * x[k]));
    auto up = x, down = x;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    CHECK(std::abs((q.fitness(up) - q.fitness(down)) / 2e-6 - g[k]) < 1e-8);
  }
  CHECK_THROWS_AS(quadratic_fitness({1, 2, 3, 1}, {0, 0}), ConfigError);
}

TEST_CASE("all-fluid grid reduces to a resistor ladder") {
  const double dp = grid_flow_delta_p(filled(16, 16, 1.0));
  CHECK(std::abs(dp - 15.0 / 16.0) < 1e-8);
  // (W - 1) / H in general
  CHECK(std::abs(grid_flow_delta_p(filled(5, 3, 1.0)) - 4.0 / 3.0) < 1e-10);
  CHECK(std::abs(grid_flow_delta_p(filled(3, 2, 1.0)) - 1.0) < 1e-12);
  CHECK(std::abs(flow_fitness(filled(3, 2, 1.0))) < 1e-12);
}

TEST_CASE("all-solid grid sits in the penalty regime") {
  const double dp = grid_flow_delta_p(filled(16, 16, 0.0));
  CHECK(dp == doctest::Approx(15.0 / (16.0 * 1e-6)).epsilon(1e-8));
}

TEST_CASE("a single straight channel resists more than an open grid") {
  DesignGrid channel = filled(16, 16, 0.0);
  for (int x = 0; x < 16; ++x) channel.values[static_cast<std::size_t>(8 * 16 + x)] = 1.0;
  CHECK(grid_flow_delta_p(channel) > grid_flow_delta_p(filled(16, 16, 1.0)));
}

TEST_CASE("flow fitness is -ln(dp)/5 and monotone") {
  const RngStream rng(1, StreamLabel::kDataset);
  double prev_dp = 0, prev_fit = 0;
  for (std::uint32_t i = 0; i < 20; ++i) {
    const DesignGrid g = random_grid(6, 5, rng, i);
    const double dp = grid_flow_delta_p(g);
    const double fit = flow_fitness(g);
    CHECK(dp > 0.0);
    CHECK(fit == doctest::Approx(-std::log(dp) / 5.0).epsilon(1e-14));
    if (i > 0 && dp != prev_dp) CHECK((dp < prev_dp) == (fit > prev_fit));
    prev_dp = dp;
    prev_fit = fit;
  }
}

TEST_CASE("opening any solid cell never raises the pressure drop") {
  const RngStream rng(2, StreamLabel::kDataset);
  long checked = 0;
  for (std::uint32_t design = 0; design < 2000; ++design) {
    DesignGrid g = random_grid(4, 4, rng, design);
    for (double& v : g.values) v = v > 0.5 ? 1.0 : 0.0;
    const double base = grid_flow_delta_p(g);
    for (std::size_t c = 0; c < g.values.size(); ++c) {
      if (g.values[c] > 0.5) continue;
      DesignGrid flipped = g;
      flipped.values[c] = 1.0;
      const double dp = grid_flow_delta_p(flipped);
      CHECK(dp <= base * (1.0 + 1e-12));
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("conjugate gradient agrees with a dense solve") {
  const RngStream rng(3, StreamLabel::kDataset);
  for (std::uint32_t i = 0; i < 20; ++i) {
    const DesignGrid g = random_grid(8, 8, rng, i);
    const FlowSolution sol = solve_grid_flow(g);
    CHECK(sol.relative_residual <= 1e-10);
    const Eigen::VectorXd ref = dense_pressures(g, 1e-6);
    double diff = 0.0;
    for (int c = 0; c < 64; ++c) diff = std::max(diff, std::abs(sol.pressure[static_cast<std::size_t>(c)] - ref(c)));
    CHECK(diff / ref.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("flow solver details") {
  const DesignGrid g = random_grid(7, 6, RngStream(4, StreamLabel::kDataset), 0);
  CHECK(grid_flow_delta_p(g) == grid_flow_delta_p(g));

  FlowParams p;
  p.inlet_begin = 2;
  p.inlet_end = 4;
  p.outlet_begin = 1;
  p.outlet_end = 2;
  const double dp = grid_flow_delta_p(filled(6, 6, 1.0), p);
  CHECK(dp > 5.0 / 6.0);  // converging ports add resistance

  p.inlet_end = 9;
  CHECK_THROWS_AS(grid_flow_delta_p(filled(6, 6, 1.0), p), ConfigError);
  CHECK_THROWS_AS(grid_flow_delta_p(DesignGrid{4, 4, std::vector<double>(15, 1.0)}), ConfigError);
  DesignGrid nan = filled(4, 4, 1.0);
  nan.values[5] = NAN;
  CHECK_THROWS_AS(flow_fitness(nan), FitnessError);

  FlowParams capped;
  capped.max_iterations = 1;
  capped.tolerance = 1e-300;
  CHECK_THROWS_AS(solve_grid_flow(g, capped), NumericError);

  const GridFlowSystem sys(filled(4, 3, 1.0), {});
  CHECK(sys.size() == 12);
  CHECK(sys.grounded_cell() == 3);
}

TEST_CASE("fluid mask thresholds after clamping") {
  const DesignGrid g{2, 2, {0.5, 0.5000001, -3.0, 7.0}};
  CHECK_FALSE(g.fluid(0, 0));
  CHECK(g.fluid(1, 0));
  CHECK_FALSE(g.fluid(0, 1));
  CHECK(g.fluid(1, 1));
  CHECK(g.fluid_mask() == std::vector<bool>{false, true, false, true});
}

TEST_CASE("vacuum stack transmits perfectly") {
  const std::vector<double> eps(10, 1.0);
  for (double f : {0.01, 0.13, 0.7}) {
    const auto r = tmm_response(eps, 1.0, f);
    CHECK(std::abs(r.t - std::complex<double>(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(r.r) < 1e-12);
  }
  const auto empty = tmm_response(std::vector<double>{}, 1.0, 0.2);
  CHECK(empty.t == std::complex<double>(1.0, 0.0));
}

TEST_CASE("half-wave layer is transparent") {
  for (double eps : {2.0, 3.3, 4.0}) {
    const double f = 1.0 / (2.0 * std::sqrt(eps));  // delta = pi for d = 1
    const auto r = tmm_response(std::vector<double>{eps}, 1.0, f);
    CHECK(std::abs(std::abs(r.t) - 1.0) < 1e-12);
  }
  // a quarter-wave layer is not
  const auto q = tmm_response(std::vector<double>{4.0}, 1.0, 1.0 / 8.0);
  CHECK(std::abs(q.t) < 0.99);
}

TEST_CASE("lossless stacks conserve energy and match the Airy recursion") {
  const RngStream rng(5, StreamLabel::kDataset);
  for (std::uint32_t s = 0; s < 100; ++s) {
    std::vector<double> u(12);
    rng.uniforms(0, s, u);
    const auto eps = LayeredStack{u}.permittivities({});
    for (int j = 1; j <= 64; ++j) {
      const double f = 0.01 * j;
      const auto r = tmm_response(eps, 1.0, f);
      CHECK(std::abs(std::norm(r.r) + std::norm(r.t) - 1.0) < 1e-10);
      CHECK(std::abs(std::abs(r.r) - std::abs(airy_reflection(eps, 1.0, f))) < 1e-10);
    }
  }
}

TEST_CASE("permittivity mapping") {
  const LayeredStack s{{-1.0, 0.0, 0.25, 0.5, 1.0, 3.0}};
  CHECK(s.permittivities({}) == std::vector<double>{1.0, 1.0, 1.75, 2.5, 4.0, 4.0});
  StackParams q;
  q.quantization_levels = 3;  // levels at 0, 0.5, 1
  const auto e = LayeredStack{{0.2, 0.3, 0.8}}.permittivities(q);
  CHECK(e == std::vector<double>{1.0, 2.5, 4.0});
  CHECK_THROWS_AS(LayeredStack{{NAN}}.permittivities({}), FitnessError);
}

TEST_CASE("parabola target") {
  const auto t = parabola_target(5);
  CHECK(t.values[2] == 1.0);
  CHECK(t.values[0] == 0.5);
  CHECK(t.values[4] == 0.5);
  const auto big = parabola_target(64);
  for (std::size_t j = 0; j < 64; ++j) {
    CHECK(std::abs(big.values[j] - big.values[63 - j]) < 1e-15);
    CHECK(big.values[j] >= 0.5);
    CHECK(big.values[j] <= 1.0);
  }
  CHECK_THROWS_AS(parabola_target(1), ConfigError);
}

TEST_CASE("transmission error") {
  const auto target = parabola_target(64);
  MetasurfaceParams ms;
  const auto freqs = ms.frequencies(target);
  CHECK(freqs.front() == ms.f_min);
  CHECK(freqs.back() == doctest::Approx(ms.f_max));

  // vacuum: mean of 2 (x_j - 1/2)^2 over 64 points is exactly 65/378
  const LayeredStack vacuum{std::vector<double>(32, 0.0)};
  CHECK(transmission_mae(vacuum, target, freqs, ms.stack) == doctest::Approx(65.0 / 378.0).epsilon(1e-13));

  // a target equal to the stack's own |t| scores zero
  const LayeredStack stack{{0.1, 0.9, 0.4, 0.7, 0.2}};
  const auto t = tmm_transmission(stack, ms.stack, freqs);
  TransmissionTarget own = target;
  for (std::size_t j = 0; j < t.size(); ++j) own.values[j] = std::abs(t[j]);
  CHECK(transmission_mae_fitness(stack, own, freqs, ms.stack) == 0.0);

  // reordering frequencies together with their targets changes nothing
  TransmissionTarget rev = target;
  std::vector<double> rf(freqs.rbegin(), freqs.rend());
  std::reverse(rev.values.begin(), rev.values.end());
  std::reverse(rev.x.begin(), rev.x.end());
  CHECK(transmission_mae(stack, rev, rf, ms.stack) == doctest::Approx(transmission_mae(stack, target, freqs, ms.stack)).epsilon(1e-14));

  // component mode differs but agrees on vacuum for the real part
  const double comp = transmission_mae(stack, target, freqs, ms.stack, MagnitudeMode::kComponents);
  CHECK(comp >= 0.0);
  CHECK_THROWS_AS(transmission_mae(stack, target, std::vector<double>{0.1}, ms.stack), ConfigError);
}

TEST_CASE("task registry") {
  const Task flow = make_task("flow");
  CHECK(flow.fitness.dim == 256);
  CHECK(flow.shape.kind == DesignKind::kGrid);
  const std::vector<double> open(256, 1.0);
  CHECK(flow.objective(open) == doctest::Approx(15.0 / 16.0));
  CHECK(flow.fitness(open) == doctest::Approx(-std::log(15.0 / 16.0) / 5.0));

  const Task ms = make_task("metasurface");
  CHECK(ms.fitness.dim == 32);
  CHECK(ms.objective(std::vector<double>(32, 0.0)) == doctest::Approx(65.0 / 378.0));
  CHECK(ms.fitness(std::vector<double>(32, 0.0)) == doctest::Approx(-65.0 / 378.0));

  const Task toy = make_task("gmm_toy", {{"target", {1.0, -1.0}}});
  CHECK(toy.objective(std::vector<double>{1.0, -1.0}) == 0.0);
  CHECK(toy.fitness(std::vector<double>{2.0, -1.0}) == -1.0);

  const Task lin = make_task("linear", {{"g", {1.0, 2.0}}});
  CHECK(lin.objective(std::vector<double>{1.0, 1.0}) == -3.0);
  const Task quad = make_task("quadratic", {{"A", {{1.0, 0.0}, {0.0, 2.0}}}, {"b", {1.0, 1.0}}});
  CHECK(quad.fitness(std::vector<double>{1.0, 1.0}) == 5.0);

  CHECK_THROWS_AS(make_task("nope"), ConfigError);
  CHECK_THROWS_AS(make_task("flow", {{"widht", 4}}), ConfigError);
  CHECK_THROWS_AS(make_task("flow", {{"width", 1}}), ConfigError);
  CHECK_THROWS_AS(make_task("metasurface", {{"f_min", 0.3}, {"f_max", 0.2}}), ConfigError);
  CHECK_THROWS_AS(make_task("linear"), ConfigError);
  CHECK(task_names().size() == 5);
}
