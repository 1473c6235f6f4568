#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "boolnet/abstraction.hpp"
#include "boolnet/rng.hpp"
#include "oracles.hpp"

using namespace boolnet;

TEST_CASE("q1 hand values") {
  CHECK(q1(0.5, 1.0) == 0.0);
  CHECK(q1(1.5, 1.0) == 1.5);
  CHECK(q1(-2.0, -1.0) == -2.0);
  CHECK(q1(-0.5, 1.0) == 0.0);
  // At |m| = 1 the inner argument is 0 and the declared sgn(0) = -1 keeps
  // the result at zero.
  CHECK(q1(1.0, 1.0) == 0.0);
  CHECK(q1(-1.0, -1.0) == 0.0);
}

TEST_CASE("q1 dichotomy on a dense grid") {
  for (double w : {1.0, -1.0}) {
    for (int i = 0; i <= 6000; ++i) {
      double m = static_cast<double>(i) * 1e-3 - 3.0;
      double v = q1(m, w);
      bool pass_through = std::abs(m) > 1.0 && (m > 0.0) == (w > 0.0);
      if (pass_through) {
        REQUIRE(v == m);
      } else {
        REQUIRE(v == 0.0);
      }
    }
  }
  // Random magnitudes, including values near the threshold.
  StreamRng rng(5, 80);
  for (std::uint64_t c = 0; c < 100000; ++c) {
    double m = 2.5 * rng.normal(c);
    double w = (rng.bits(c + 200000) & 1) ? 1.0 : -1.0;
    double v = q1(m, w);
    bool pass_through = std::abs(m) > 1.0 && (m > 0.0) == (w > 0.0);
    REQUIRE(v == (pass_through ? m : 0.0));
  }
}

TEST_CASE("q0 deterministic") {
  CHECK(q0_deterministic(0.3) == 1.0);
  CHECK(q0_deterministic(-0.5) == -1.0);
  CHECK(q0_deterministic(0.0) == 1.0);
  CHECK(q0_deterministic(-0.0) == 1.0);
}

TEST_CASE("q0 stochastic is unbiased on [-1,1]") {
  StreamRng rng(9, 81);
  for (std::uint64_t c = 0; c < 10000; ++c) {
    CHECK(q0_stochastic(1.0, rng, c) == 1.0);
    CHECK(q0_stochastic(-1.0, rng, c + 10000) == -1.0);
    CHECK(q0_stochastic(2.5, rng, c + 20000) == 1.0);  // clamped
  }
  const std::size_t n = 1000000;
  double sum = 0.0;
  for (std::uint64_t c = 0; c < n; ++c) sum += q0_stochastic(0.5, rng, c);
  double mean = sum / static_cast<double>(n);
  // Var(q0(0.5)) = 1 - 0.25 = 0.75.
  CHECK(std::abs(mean - 0.5) <= 3.0 * std::sqrt(0.75 / n));

  sum = 0.0;
  for (std::uint64_t c = 0; c < n; ++c)
    sum += q0_stochastic(0.0, rng, c + n);
  CHECK(std::abs(sum / static_cast<double>(n)) <= 3.0 / std::sqrt(n));
}

TEST_CASE("small signals leave weights fixed and load the residual") {
  AbstractState s(std::vector<double>{1.0, -1.0, 1.0, -1.0});
  std::vector<double> g = {0.4, -0.3, 0.0, 0.9};
  double eta = 0.5;
  StreamRng rng(0, 82);
  auto stats = abstract_step(s, g, eta, Q0Mode::Deterministic, rng);
  CHECK(stats.flips == 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.last_delta[i] == 0.0);
    CHECK(s.last_h[i] == 0.0);
    CHECK(s.e[i] == eta * g[i]);
  }
  CHECK(s.w == std::vector<double>{1.0, -1.0, 1.0, -1.0});
}

TEST_CASE("threshold crossing trace") {
  AbstractState s(std::vector<double>{1.0});
  s.e[0] = 0.9;
  std::vector<double> g = {0.2};
  StreamRng rng(0, 83);
  auto stats = abstract_step(s, g, 1.0, Q0Mode::Deterministic, rng);
  double m = 1.0 * 0.2 + 0.9;  // crosses 1
  CHECK(stats.flips == 1);
  CHECK(s.w[0] == -1.0);
  CHECK(s.e[0] == 0.0);
  CHECK(s.last_delta[0] == m);
  CHECK(s.last_h[0] == -1.0 - (1.0 - m));
  CHECK(s.last_h[0] == doctest::Approx(-0.9).epsilon(1e-14));
  CHECK(stats.e_norm_sq == 0.0);
  CHECK(stats.delta_hat == 0.0);
}

TEST_CASE("zero gradient and zero residual is a fixed point") {
  AbstractState s(std::vector<double>{1.0, -1.0});
  std::vector<double> g = {0.0, 0.0};
  StreamRng rng(0, 84);
  auto stats = abstract_step(s, g, 0.7, Q0Mode::Deterministic, rng);
  CHECK(stats.flips == 0);
  CHECK(stats.m_norm_sq == 0.0);
  CHECK(stats.delta_hat == 0.0);
  CHECK(s.w == std::vector<double>{1.0, -1.0});
  CHECK(s.e == std::vector<double>{0.0, 0.0});
}

TEST_CASE("state constructor rejects non-sign weights") {
  CHECK_THROWS_AS(AbstractState(std::vector<double>{1.0, 0.5}),
                  std::invalid_argument);
  std::vector<double> bad_g = {std::numeric_limits<double>::quiet_NaN()};
  AbstractState s(std::vector<double>{1.0});
  StreamRng rng(0, 85);
  CHECK_THROWS_AS(abstract_step(s, bad_g, 1.0, Q0Mode::Deterministic, rng),
                  std::invalid_argument);
}

TEST_CASE("residual mass never exceeds accumulator mass") {
  const std::size_t d = 32;
  AbstractState s(std::vector<double>(d, 1.0));
  StreamRng grad_rng(3, 86);
  StreamRng rng(3, 87);
  std::vector<double> g(d);
  std::size_t flips = 0;
  for (std::size_t t = 0; t < 500; ++t) {
    for (std::size_t i = 0; i < d; ++i)
      g[i] = 6.0 * grad_rng.normal(t * d + i);
    auto stats = abstract_step(s, g, 0.1, Q0Mode::Deterministic, rng, 2.0);
    REQUIRE(stats.e_norm_sq <= stats.m_norm_sq);
    REQUIRE(stats.delta_hat <= 1.0);
    for (std::size_t i = 0; i < d; ++i) {
      REQUIRE(std::abs(s.w[i]) == 1.0);
      if (s.last_delta[i] == 0.0) REQUIRE(s.last_h[i] == 0.0);
    }
    flips += stats.flips;
  }
  CHECK(flips > 0);
}

TEST_CASE("rounding deviation is mean-zero under stochastic q0") {
  // Fixed w = +1 and delta = 1.5: u = -0.5, h = q0(u) - u.
  StreamRng rng(21, 88);
  const std::size_t n = 1000000;
  double u = 1.0 - 1.5;
  double sum = 0.0;
  for (std::uint64_t c = 0; c < n; ++c)
    sum += q0_stochastic(u, rng, c) - u;
  double mean = sum / static_cast<double>(n);
  CHECK(std::abs(mean) <= 3.0 * std::sqrt((1.0 - u * u) / n));
}

TEST_CASE("sign-descent degeneration matches the reference exactly") {
  const std::size_t d = 8, T = 100;
  std::vector<double> w0(d);
  for (std::size_t i = 0; i < d; ++i) w0[i] = 0.25 * static_cast<double>(i);
  std::vector<double> w = w0, e(d, 0.0);
  oracle::SignEfReference ref(w0);
  StreamRng grad_rng(13, 89);
  std::vector<double> g(d);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < d; ++i)
      g[i] = grad_rng.normal(t * d + i);
    sign_ef_step(w, e, g, 0.3, 0.05);
    ref.step(g, 0.3, 0.05);
    for (std::size_t i = 0; i < d; ++i) {
      REQUIRE(w[i] == ref.w[i]);
      REQUIRE(e[i] == ref.e[i]);
    }
  }
}

TEST_CASE("equivalence: constant stream flips at the hand-computed step") {
  OptimConfig cfg;
  cfg.eta0 = 1.0;
  cfg.beta_mode = BetaMode::Constant;
  cfg.beta_value = 1.0;

  // Side computation of the flip time: 0.3*t crosses 1 at the 4th step.
  auto w = BooleanTensor::filled({1}, true);
  OptimState st(1);
  std::vector<double> q = {0.3};
  std::size_t first_flip = 0;
  for (std::size_t t = 1; t <= 10; ++t) {
    auto stats = apply_step(w, st, q, cfg);
    if (stats.flips > 0 && first_flip == 0) first_flip = t;
  }
  CHECK(first_flip == 4);

  auto report = equivalence_check(
      [](std::size_t, std::span<double> g) { g[0] = 0.3; }, 10, 1, cfg);
  CHECK_FALSE(report.diverged);
}

TEST_CASE("equivalence: zero stream") {
  OptimConfig cfg;
  cfg.beta_mode = BetaMode::Constant;
  cfg.beta_value = 1.0;
  auto report = equivalence_check(
      [](std::size_t, std::span<double> g) {
        for (auto& v : g) v = 0.0;
      },
      100, 8, cfg);
  CHECK_FALSE(report.diverged);
}

TEST_CASE("equivalence: Gaussian streams, with and without clipping") {
  OptimConfig cfg;
  cfg.eta0 = 0.1;
  cfg.beta_mode = BetaMode::Constant;
  cfg.beta_value = 1.0;
  auto stream = [](std::size_t t, std::span<double> g) {
    StreamRng rng(77, 90);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = 8.0 * rng.normal(t * g.size() + i);
  };
  auto report = equivalence_check(stream, 1000, 128, cfg);
  CHECK_FALSE(report.diverged);

  cfg.kappa = 20.0;  // eta*kappa = 2
  report = equivalence_check(stream, 1000, 128, cfg);
  CHECK_FALSE(report.diverged);

  // Step schedule active during the run.
  cfg.schedule = EtaSchedule::step(0.5, 200);
  report = equivalence_check(stream, 1000, 128, cfg);
  CHECK_FALSE(report.diverged);
}

TEST_CASE("equivalence checker detects an injected threshold mismatch") {
  OptimConfig cfg;
  cfg.eta0 = 0.1;
  cfg.beta_mode = BetaMode::Constant;
  cfg.beta_value = 1.0;
  auto stream = [](std::size_t t, std::span<double> g) {
    StreamRng rng(78, 91);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = 8.0 * rng.normal(t * g.size() + i);
  };
  auto report = equivalence_check(stream, 200, 16, cfg, 0.5);
  CHECK(report.diverged);
  CHECK(report.field == "weight");
  CHECK(report.optimizer_value != report.abstract_value);

  cfg.beta_mode = BetaMode::Adaptive;
  CHECK_THROWS_AS(equivalence_check(stream, 10, 4, cfg),
                  std::invalid_argument);
}
