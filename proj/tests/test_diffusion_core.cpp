#include <doctest.h>

#include <cmath>
#include <set>

#include "evodiff/diffusion.hpp"
#include "evodiff/error.hpp"
#include "evodiff/gmm_denoiser.hpp"
#include "evodiff/rng.hpp"
#include "evodiff/sampler.hpp"
#include "evodiff/schedule.hpp"
#include "test_support.hpp"

using namespace evodiff;
using testing_support::mean;
using testing_support::variance;

// Known-answer vectors for Philox4x32-10 (Random123 kat_vectors).
TEST_CASE("philox known answers") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng draws are addressed, not sequential") {
  const RngStream a(42, StreamLabel::kTrajectory);
  const auto first = a.normals(3, 7, 5);
  a.normals(0, 0, 100);
  CHECK(a.normals(3, 7, 5) == first);
  CHECK(RngStream(42, StreamLabel::kTrajectory).normals(3, 7, 5) == first);

  // a prefix of a longer draw is the shorter draw
  const auto longer = a.normals(3, 7, 9);
  CHECK(std::equal(first.begin(), first.end(), longer.begin()));

  CHECK(a.normals(3, 8, 5) != first);
  CHECK(a.normals(4, 7, 5) != first);
  CHECK(a.with_label(StreamLabel::kPopulation).normals(3, 7, 5) != first);
  CHECK(RngStream(43, StreamLabel::kTrajectory).normals(3, 7, 5) != first);
}

TEST_CASE("rng normals and uniforms have the right moments") {
  const RngStream rng(9, StreamLabel::kDataset);
  const auto z = rng.normals(1, 2, 200000);
  CHECK(std::abs(mean(z)) < 4.0 / std::sqrt(200000.0));
  CHECK(std::abs(variance(z) - 1.0) < 4.0 * std::sqrt(2.0 / 200000.0));
  std::vector<double> u(200000);
  rng.uniforms(1, 2, u);
  for (double v : u) REQUIRE((v >= 0.0 && v < 1.0));
  CHECK(std::abs(mean(u) - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 200000.0));
}

TEST_CASE("seed derivation is stable and spreads") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(1, k));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("single-step schedule identities") {
  const auto s = build_schedule(1, 0.1, 0.1);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.posterior_var(1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("hundred-step schedules") {
  // abar_T by direct product, computed outside the library
  const auto literal = build_schedule(100, 1e-4, 0.02);
  CHECK(literal.alpha_bar(100) == doctest::Approx(0.36356324805549223).epsilon(1e-12));

  const auto s = build_schedule(100, default_beta_range(100).min, default_beta_range(100).max);
  CHECK(default_beta_range(100).min == doctest::Approx(1e-3));
  CHECK(default_beta_range(100).max == doctest::Approx(0.2));
  CHECK(s.alpha_bar(100) < 0.05);
  CHECK(default_beta_range(1000).max == doctest::Approx(0.02));

  for (int t = 1; t <= 100; ++t) {
    CHECK(s.alpha(t) == doctest::Approx(1.0 - s.beta(t)));
    CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-14));
    const double expected = t == 1 ? s.beta(1)
                                   : s.beta(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
    CHECK(s.posterior_var(t) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(s.posterior_var(t) <= s.beta(t));
  }
  CHECK(s.beta(1) == doctest::Approx(1e-3));
  CHECK(s.beta(100) == doctest::Approx(0.2));
}

TEST_CASE("schedule rejects bad bounds") {
  CHECK_THROWS_AS(build_schedule(0, 1e-4, 0.02), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0.0, 0.02), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0.03, 0.02), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 1e-4, 1.0), ConfigError);
  const auto s = build_schedule(10, 1e-4, 0.02);
  CHECK_THROWS(s.beta(11));
  CHECK_THROWS(s.beta(0));
  CHECK(s.hash() == build_schedule(10, 1e-4, 0.02).hash());
  CHECK(s.hash() != build_schedule(10, 1e-4, 0.03).hash());
  CHECK(s.hash() != build_schedule(10, 1e-4, 0.02, ScheduleKind::kLinear, ReverseVariance::kBeta).hash());
}

TEST_CASE("forward noise statistics") {
  const auto s = build_schedule(100, 1e-3, 0.2);
  const RngStream rng(5, StreamLabel::kTrajectory);

  SUBCASE("zero input keeps mean 0 and variance 1 - abar") {
    const int t = 40;
    std::vector<double> xs;
    for (std::uint32_t i = 0; i < 20000; ++i) xs.push_back(forward_noise(std::vector<double>{0.0}, t, s, rng, i)[0]);
    const double v = 1.0 - s.alpha_bar(t);
    CHECK(std::abs(mean(xs)) < 4.0 * std::sqrt(v / 20000.0));
    CHECK(std::abs(variance(xs) - v) < 4.0 * v * std::sqrt(2.0 / 20000.0));
  }

  SUBCASE("t = T output barely correlates with x0") {
    std::vector<double> a, b;
    const RngStream data(6, StreamLabel::kDataset);
    for (std::uint32_t i = 0; i < 10000; ++i) {
      const double x0 = data.normals(0, i, 1)[0];
      a.push_back(x0);
      b.push_back(forward_noise(std::vector<double>{x0}, 100, s, rng, i)[0]);
    }
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.25);
  }

  SUBCASE("t = 1 with beta_1 = 1e-4 stays within 0.02 RMS") {
    const auto fine = build_schedule(100, 1e-4, 0.02);
    const std::vector<double> x0 = RngStream(8, StreamLabel::kDataset).normals(0, 0, 1000);
    const auto x1 = forward_noise(x0, 1, fine, rng);
    double acc = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) acc += (x1[i] - x0[i]) * (x1[i] - x0[i]);
    CHECK(std::sqrt(acc / 1000.0) < 0.02);
  }

  CHECK_THROWS_AS(forward_noise(std::vector<double>{0.0}, 0, s, rng), ConfigError);
  CHECK_THROWS_AS(forward_noise(std::vector<double>{0.0}, 101, s, rng), ConfigError);
}

TEST_CASE("reverse step") {
  const RngStream rng(11, StreamLabel::kTrajectory);
  DenoisingDistribution d{{1.5, -2.0}, 0.0, 7};
  CHECK(reverse_step(d, rng) == d.mean);

  d.variance = 0.3;
  CHECK(reverse_step(d, rng) == reverse_step(d, rng));

  // 1e5 independent draws need distinct counters, so vary the step
  std::vector<double> xs;
  for (int k = 1; k <= 100000; ++k) xs.push_back(reverse_step({{0.0}, 4.0, k}, rng)[0]);
  CHECK(std::abs(variance(xs) - 4.0) < 0.1);
}

TEST_CASE("posterior mean weights sum to the right limits") {
  const auto s = build_schedule(100, 1e-3, 0.2);
  const std::vector<double> xt{0.3, -1.0}, x0{2.0, 5.0};
  // at t = 1 the x0 coefficient is exactly 1 and the x_t coefficient 0
  const auto m1 = posterior_mean(xt, x0, 1, s);
  CHECK(m1[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m1[1] == doctest::Approx(5.0).epsilon(1e-12));
  // when x0 equals the forward mean the posterior mean is consistent with q(x_{t-1}|x0)
  const int t = 30;
  const std::vector<double> z{0.0, 0.0};
  std::vector<double> xs(2);
  for (int i = 0; i < 2; ++i) xs[i] = std::sqrt(s.alpha_bar(t)) * x0[i];
  const auto m = posterior_mean(xs, x0, t, s);
  for (int i = 0; i < 2; ++i) CHECK(m[i] == doctest::Approx(std::sqrt(s.alpha_bar(t - 1)) * x0[i]).epsilon(1e-12));
}

namespace {

GaussianMixturePrior two_blob_prior() {
  return {{0.3, 0.7}, {{-2.0, 1.0}, {2.0, -1.0}}, {{0.25, 0.25}, {0.25, 0.25}}};
}

}  // namespace

TEST_CASE("denoising loop consumes one trajectory draw per step") {
  const auto s = build_schedule(20, 1e-2, 0.3);
  const AnalyticGmmDenoiser d(two_blob_prior(), s);
  std::vector<std::pair<int, int>> draws;
  SamplingOptions opts;
  opts.record_states = true;
  opts.on_trajectory_draw = [&](int t, int i) { draws.emplace_back(t, i); };
  const auto traj = run_denoising(d, RngStream(3, StreamLabel::kTrajectory),
                                  RngStream(3, StreamLabel::kPopulation), opts);
  REQUIRE(draws.size() == 21);
  CHECK(draws.front() == std::pair{0, 0});
  for (int k = 1; k <= 20; ++k) CHECK(draws[static_cast<std::size_t>(k)] == std::pair{21 - k, 0});

  REQUIRE(traj.states.size() == 21);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    CHECK(traj.states[k].t == 20 - static_cast<int>(k));
    CHECK(traj.states[k].x.size() == 2);
    CHECK(traj.states[k].x0_hat.size() == 2);
  }
  CHECK(traj.states.front().x == traj.x_T);
  CHECK(traj.states.back().x == traj.x0);
  CHECK(traj.x_T == RngStream(3, StreamLabel::kTrajectory).normals(0, 0, 2));

  // recording states does not change the sample
  const auto plain = run_denoising(d, RngStream(3, StreamLabel::kTrajectory),
                                   RngStream(3, StreamLabel::kPopulation));
  CHECK(plain.x0 == traj.x0);
}

TEST_CASE("guided sampling without a fitness is rejected") {
  const auto s = build_schedule(20, 1e-2, 0.3);
  const AnalyticGmmDenoiser d(two_blob_prior(), s);
  SamplingOptions opts;
  opts.guidance = GuidanceConfig{};
  opts.guidance->window_high = 10;
  CHECK_THROWS_AS(run_denoising(d, RngStream(1, StreamLabel::kTrajectory),
                                RngStream(1, StreamLabel::kPopulation), opts),
                  ConfigError);
}

TEST_CASE("unguided sampling recovers a two-component mixture") {
  const auto s = build_schedule(100, 1e-3, 0.2);
  const AnalyticGmmDenoiser d(two_blob_prior(), s);
  const int n = 2000;
  int left = 0;
  double lx = 0, ly = 0, rx = 0, ry = 0;
  for (int i = 0; i < n; ++i) {
    const auto seed = derive_seed(77, static_cast<std::uint64_t>(i));
    const auto x = run_denoising(d, RngStream(seed, StreamLabel::kTrajectory),
                                 RngStream(seed, StreamLabel::kPopulation)).x0;
    if (x[0] < 0) {
      ++left;
      lx += x[0];
      ly += x[1];
    } else {
      rx += x[0];
      ry += x[1];
    }
  }
  const int right = n - left;
  CHECK(std::abs(static_cast<double>(left) / n - 0.3) < 0.05);
  CHECK(std::abs(lx / left + 2.0) < 0.1);
  CHECK(std::abs(ly / left - 1.0) < 0.1);
  CHECK(std::abs(rx / right - 2.0) < 0.1);
  CHECK(std::abs(ry / right + 1.0) < 0.1);
}
