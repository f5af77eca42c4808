#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "martnet/sde.hpp"

using namespace martnet;

TEST_CASE("degenerate coefficients: frozen at x0, censored") {
  SdeCoefficients c;  // zero drift
  c.diffusion_kind = SdeCoefficients::Diffusion::Matrix;
  c.sigma_fn = [](const double*, double* s, int64_t d) {
    for (int64_t i = 0; i < d * d; ++i) s[i] = 0.0;
  };
  Domain dom = Domain::hypercube(3, 1.0);
  PathEnsemble e = sample_ensemble(c, dom, {0.1, 0.2, -0.3}, 4, 5, 0.1, 9);
  for (int64_t m = 0; m < 4; ++m) {
    CHECK(!e.exited(m));
    for (int64_t i = 0; i <= 5; ++i) {
      CHECK(e.stored_row(m, i)[0] == 0.1);
      CHECK(e.stored_row(m, i)[2] == -0.3);
    }
  }
}

TEST_CASE("deterministic drift exits the cube at index 10") {
  SdeCoefficients c = SdeCoefficients::constant({1.0, 0.0});
  c.diffusion_kind = SdeCoefficients::Diffusion::Matrix;
  c.sigma_fn = [](const double*, double* s, int64_t d) {
    for (int64_t i = 0; i < d * d; ++i) s[i] = 0.0;
  };
  Domain dom = Domain::hypercube(2, 1.0);
  PathEnsemble e = sample_ensemble(c, dom, {0.0, 0.0}, 1, 20, 0.1, 1);
  CHECK(e.exit_index[0] == 10);
  CHECK(e.exit_point[0] == 1.0);
  CHECK(e.exit_point[1] == 0.0);
  CHECK(e.exit_time[0] == doctest::Approx(1.0).epsilon(1e-12));
  // frozen past the exit
  CHECK(e.stored_row(0, 15)[0] == 1.0);
  CHECK(e.stored_row(0, 10)[0] == 1.0);
  CHECK(e.stored_row(0, 9)[0] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("positions start at x0 and stay in the closed domain") {
  Domain dom = Domain::ball(3, 1.0);
  PathEnsemble e =
      sample_ensemble(SdeCoefficients::brownian(), dom, {0.0, 0.0, 0.0}, 200, 50, 0.02, 3);
  for (int64_t m = 0; m < e.n_paths; ++m) {
    CHECK(e.stored_row(m, 0)[0] == 0.0);
    for (int64_t i = 0; i < e.prefix_len(m); ++i) {
      double r2 = 0;
      for (int64_t j = 0; j < 3; ++j) r2 += e.stored_row(m, i)[j] * e.stored_row(m, i)[j];
      CHECK(r2 <= 1.0 + 1e-12);
    }
    if (e.exited(m)) {
      double r2 = 0;
      for (int64_t j = 0; j < 3; ++j)
        r2 += e.exit_point[size_t(m * 3 + j)] * e.exit_point[size_t(m * 3 + j)];
      CHECK(std::fabs(std::sqrt(r2) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("brownian variance identity") {
  const int64_t M = 20000, N = 40;
  const double dt = 0.01;
  Domain dom = Domain::unbounded(10);
  PathEnsemble e = sample_ensemble(SdeCoefficients::brownian(), dom,
                                   std::vector<double>(10, 0.0), M, N, dt, 17);
  double s = 0, s2 = 0;
  for (int64_t m = 0; m < M; ++m) {
    double r2 = 0;
    for (int64_t j = 0; j < 10; ++j) {
      const double x = e.stored_row(m, N)[j];
      r2 += x * x;
    }
    s += r2;
    s2 += r2 * r2;
  }
  const double mean = s / M;
  const double se = std::sqrt((s2 / M - mean * mean) / M);
  CHECK(std::fabs(mean - 10.0 * N * dt) <= 4.0 * se);
}

TEST_CASE("per-step increment mean is near zero (weak martingale sanity)") {
  const int64_t M = 20000, N = 20;
  const double dt = 0.01;
  Domain dom = Domain::unbounded(2);
  PathEnsemble e = sample_ensemble(SdeCoefficients::brownian(), dom, {0.0, 0.0}, M, N, dt, 29);
  for (int64_t i = 0; i < N; ++i) {
    double s0 = 0;
    for (int64_t m = 0; m < M; ++m) s0 += e.stored_row(m, i + 1)[0] - e.stored_row(m, i)[0];
    CHECK(std::fabs(s0 / M) <= 4.0 * std::sqrt(dt / M));
  }
}

TEST_CASE("reproducibility: same inputs give bitwise-identical ensembles") {
  Domain dom = Domain::hypercube(4, 1.0);
  auto a = sample_ensemble(SdeCoefficients::brownian(), dom, {0, 0, 0, 0}, 300, 30, 0.01, 5);
  auto b = sample_ensemble(SdeCoefficients::brownian(), dom, {0, 0, 0, 0}, 300, 30, 0.01, 5);
  CHECK(a.pos == b.pos);
  CHECK(a.exit_index == b.exit_index);
  CHECK(a.exit_time == b.exit_time);
}

TEST_CASE("on-demand gather reproduces stored positions") {
  Domain dom = Domain::ball(3, 1.0);
  auto stored = sample_ensemble(SdeCoefficients::linear_drift(0.5), dom, {0.1, 0, 0}, 100,
                                25, 0.02, 11, true);
  auto lazy = sample_ensemble(SdeCoefficients::linear_drift(0.5), dom, {0.1, 0, 0}, 100,
                              25, 0.02, 11, false);
  CHECK(lazy.pos.empty());
  CHECK(lazy.exit_index == stored.exit_index);
  std::vector<int64_t> which{3, 17, 42, 99};
  PathBlock a, b;
  stored.gather(which, a);
  lazy.gather(which, b);
  CHECK(a.rows == b.rows);
  CHECK(a.offs == b.offs);
}

TEST_CASE("exit monotonicity under shrinking ball") {
  auto big = sample_ensemble(SdeCoefficients::brownian(), Domain::ball(2, 1.0), {0, 0}, 500,
                             200, 0.01, 77);
  auto small = sample_ensemble(SdeCoefficients::brownian(), Domain::ball(2, 0.8), {0, 0},
                               500, 200, 0.01, 77);
  for (int64_t m = 0; m < 500; ++m) {
    const int32_t eb = big.exit_index[size_t(m)], es = small.exit_index[size_t(m)];
    if (es == kCensored) CHECK(eb == kCensored);
    if (eb != kCensored && es != kCensored) CHECK(es <= eb);
  }
}

TEST_CASE("detect_exit examples") {
  {
    Domain cube = Domain::hypercube(3, 1.0);
    double prev[3] = {0.9, 0.0, 0.0}, next[3] = {1.1, 0.0, 0.0};
    ExitHit h = detect_exit(prev, next, cube);
    CHECK(h.crossed);
    CHECK(h.point[0] == 1.0);
    CHECK(h.frac == doctest::Approx(0.5));
  }
  {
    Domain ball = Domain::ball(3, 1.0);
    double prev[3] = {0.0, 0.0, 0.0}, next[3] = {2.0, 0.0, 0.0};
    ExitHit h = detect_exit(prev, next, ball);
    CHECK(h.crossed);
    CHECK(h.point[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h.frac == doctest::Approx(0.5));
  }
  {
    // random interior/exterior pairs land on the sphere to 1e-12
    Domain ball = Domain::ball(5, 0.7);
    RandomStream rs(3, StreamKind::Misc, 8);
    for (int rep = 0; rep < 200; ++rep) {
      double prev[5], next[5];
      double r2 = 0;
      for (int j = 0; j < 5; ++j) {
        prev[j] = 0.3 * rs.normal();
        r2 += prev[j] * prev[j];
      }
      if (r2 >= 0.49) continue;
      for (int j = 0; j < 5; ++j) next[j] = prev[j] + 2.0 * rs.normal();
      if (ball.interior(next)) continue;
      ExitHit h = detect_exit(prev, next, ball);
      REQUIRE(h.crossed);
      double pr2 = 0;
      for (int j = 0; j < 5; ++j) pr2 += h.point[size_t(j)] * h.point[size_t(j)];
      CHECK(std::fabs(std::sqrt(pr2) - 0.7) <= 1e-12);
    }
  }
}

TEST_CASE("indicator weights follow the exit index") {
  Domain dom = Domain::unbounded(2);
  PathEnsemble e = sample_ensemble(SdeCoefficients::brownian(), dom, {0, 0}, 5, 10, 0.1, 1);
  auto w = drifted_brownian_indicator(e, 7);
  for (double x : w) CHECK(x == 1.0);  // all censored

  e.exit_index[2] = 3;
  CHECK(drifted_brownian_indicator(e, 5)[2] == 0.0);
  CHECK(drifted_brownian_indicator(e, 3)[2] == 1.0);
  // counting oracle: sum over i equals min(exit, N) + 1
  double total = 0;
  for (int64_t i = 0; i <= e.n_steps; ++i) total += drifted_brownian_indicator(e, i)[2];
  CHECK(total == 4.0);
  double total_censored = 0;
  for (int64_t i = 0; i <= e.n_steps; ++i)
    total_censored += drifted_brownian_indicator(e, i)[0];
  CHECK(total_censored == double(e.n_steps + 1));
}

TEST_CASE("invalid inputs are rejected") {
  Domain dom = Domain::hypercube(2, 1.0);
  CHECK_THROWS_AS(sample_ensemble(SdeCoefficients::brownian(), dom, {2.0, 0.0}, 1, 1, 0.1, 1),
                  InvalidInput);

  SdeCoefficients bad;
  bad.drift_kind = SdeCoefficients::Drift::Custom;
  bad.drift_fn = [](const double*, double* mu, int64_t d) {
    for (int64_t j = 0; j < d; ++j) mu[j] = std::nan("");
  };
  CHECK_THROWS_AS(sample_ensemble(bad, dom, {0.0, 0.0}, 1, 3, 0.1, 1), SimulationError);
}

TEST_CASE("ensemble cache round-trips and verifies its header") {
  Domain dom = Domain::ball(3, 1.0);
  auto e = sample_ensemble(SdeCoefficients::brownian(), dom, {0, 0, 0}, 50, 20, 0.05, 13);
  const char* path = "/tmp/martnet_ens_test.bin";
  save_ensemble(path, e, "drift:zero");
  auto r = load_ensemble(path, e.coeffs, dom, {0, 0, 0}, 50, 20, 0.05, 13, "drift:zero");
  CHECK(r.pos == e.pos);
  CHECK(r.exit_index == e.exit_index);
  CHECK(r.exit_time == e.exit_time);
  CHECK_THROWS_AS(
      load_ensemble(path, e.coeffs, dom, {0, 0, 0}, 50, 20, 0.05, 14, "drift:zero"),
      InvalidInput);
  std::remove(path);
}
