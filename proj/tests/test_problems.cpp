#include <doctest.h>

#include <cmath>
#include <vector>

#include "martnet/problems.hpp"

using namespace martnet;

namespace {

// Central finite-difference Laplacian, h = 1e-4.
double fd_laplacian(const PointFn& u, const double* x, int64_t d, double h = 1e-4) {
  std::vector<double> y(x, x + d);
  double s = 0.0;
  const double u0 = u(y.data());
  for (int64_t j = 0; j < d; ++j) {
    const double keep = y[size_t(j)];
    y[size_t(j)] = keep + h;
    const double up = u(y.data());
    y[size_t(j)] = keep - h;
    const double um = u(y.data());
    y[size_t(j)] = keep;
    s += (up - 2.0 * u0 + um) / (h * h);
  }
  return s;
}

std::vector<double> random_interior(const Domain& dom, RandomStream& rs, double shrink) {
  std::vector<double> x(size_t(dom.dim));
  do {
    for (auto& v : x) v = shrink * (2.0 * rs.uniform() - 1.0) * std::max(dom.half_width, 1.0);
  } while (dom.bounded() && !dom.interior(x.data()));
  return x;
}

}  // namespace

TEST_CASE("linear pbe values at reference points") {
  ProblemSpec p = make_linear_pbe(20, Domain::hypercube(20, 1.0), -1.0, 2.0);
  std::vector<double> zero(20, 0.0);
  CHECK(p.exact_solution(zero.data()) == doctest::Approx(20.0));
  CHECK(p.source_f(zero.data()) == doctest::Approx(-100.0));
  std::vector<double> ones(20, 1.0);
  CHECK(p.g(ones.data()) == doctest::Approx(20.0 * std::cos(2.0)).epsilon(1e-12));
  // diagonal form: u(t*e) = d cos(omega t / sqrt(d))
  const double t = 0.7;
  std::vector<double> diag(20, t / std::sqrt(20.0));
  CHECK(p.exact_solution(diag.data()) ==
        doctest::Approx(20.0 * std::cos(2.0 * t / std::sqrt(20.0))).epsilon(1e-12));
}

TEST_CASE("linear pbe rejects non-negative c") {
  CHECK_THROWS_AS(make_linear_pbe(3, Domain::hypercube(3, 1.0), 0.5, 2.0), InvalidInput);
}

TEST_CASE("pde residual of the linear pbe vanishes (finite differences)") {
  ProblemSpec p = make_linear_pbe(6, Domain::hypercube(6, 1.0), -1.0, 2.0);
  RandomStream rs(4, StreamKind::Misc, 2);
  for (int rep = 0; rep < 100; ++rep) {
    auto x = random_interior(p.domain, rs, 0.9);
    const double res = fd_laplacian(p.exact_solution, x.data(), 6) +
                       (-1.0) * p.exact_solution(x.data()) - p.source_f(x.data());
    CHECK(std::fabs(res) <= 1e-5);
  }
}

TEST_CASE("nonlinear pbe data") {
  ProblemSpec p = make_nonlinear_pbe(10, 1.0, 2.0);
  std::vector<double> zero(10, 0.0);
  std::vector<double> edge(10, 0.0);
  edge[0] = 1.0;
  CHECK(p.g(edge.data()) == doctest::Approx(2.0));
  CHECK(p.source_f(zero.data()) == doctest::Approx(-40.0));
  CHECK(p.exact_solution(zero.data()) == 0.0);

  // residual of -Delta u + sinh u - f at random interior points
  RandomStream rs(5, StreamKind::Misc, 3);
  for (int rep = 0; rep < 100; ++rep) {
    auto x = random_interior(p.domain, rs, 0.5);
    const double res = -fd_laplacian(p.exact_solution, x.data(), 10) +
                       std::sinh(p.exact_solution(x.data())) - p.source_f(x.data());
    CHECK(std::fabs(res) <= 1e-5);
  }
}

TEST_CASE("laplace eigen data") {
  ProblemSpec p = make_laplace_eigen(10, 1.0);
  CHECK(*p.exact_eigenvalue == doctest::Approx(10.0 * M_PI * M_PI).epsilon(1e-14));
  ProblemSpec p1 = make_laplace_eigen(1, M_PI);
  CHECK(*p1.exact_eigenvalue == doctest::Approx(1.0).epsilon(1e-14));

  // the printed product-of-sines mode vanishes on the boundary ...
  std::vector<double> face(10, 0.5);
  face[3] = 1.0;
  CHECK(std::fabs(p.exact_solution(face.data())) <= 1e-15);
  // ... and satisfies -Delta u = lambda u (finite-difference residual)
  RandomStream rs(6, StreamKind::Misc, 4);
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_interior(p.domain, rs, 0.9);
    const double res = -fd_laplacian(p.exact_solution, x.data(), 10) -
                       *p.exact_eigenvalue * p.exact_solution(x.data());
    CHECK(std::fabs(res) <= 1e-5);
  }
}

TEST_CASE("fokker-planck eigen data") {
  ProblemSpec p = make_fokker_planck_eigen(5, 5.0);
  CHECK(*p.exact_eigenvalue == 5.0);

  // drift is x itself
  std::vector<double> e1{1.0, 0.0, 0.0, 0.0, 0.0};
  std::vector<double> mu(5);
  p.coefficients.drift(e1.data(), mu.data(), 5);
  CHECK(mu[0] == 1.0);
  CHECK(mu[1] == 0.0);

  // loss coefficient d - c/2 + lambda/2 = 5 at lambda = c = 5
  CHECK(p.zeroth_order_coefficient(e1.data(), 5.0) == doctest::Approx(5.0));

  // eigen identity: Delta psi = (4|x|^2 - 2d) psi checked by finite differences
  RandomStream rs(7, StreamKind::Misc, 5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(5);
    for (auto& v : x) v = 2.0 * rs.uniform() - 1.0;
    double r2 = 0;
    for (double v : x) r2 += v * v;
    if (r2 > 4.0) continue;
    const double psi = p.exact_solution(x.data());
    const double lap = fd_laplacian(p.exact_solution, x.data(), 5);
    CHECK(std::fabs(lap - (4.0 * r2 - 10.0) * psi) <= 1e-5);
  }
}

TEST_CASE("mollifier values and monotonicity") {
  const double a = 5.0 / 11.0;
  ProblemSpec p = make_fokker_planck_eigen(3, 3.0, a);
  std::vector<double> x{0.0, 0.0, 0.0};
  CHECK(p.mollifier(x.data()) == 1.0);
  x = {a, 0.0, 0.0};
  CHECK(p.mollifier(x.data()) == doctest::Approx(0.5).epsilon(1e-14));
  x = {1.0, 0.0, 0.0};
  CHECK(p.mollifier(x.data()) == doctest::Approx(25.0 / 146.0).epsilon(1e-12));

  double prev = 2.0;
  for (double r = 0.0; r < 8.0; r += 0.25) {
    x = {r, 0.0, 0.0};
    const double v = p.mollifier(x.data());
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    CHECK(v < prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("mollify composes") {
  PointFn raw = [](const double* x) { return x[0] * x[0]; };
  PointFn rho = [](const double* x) { return 1.0 / (1.0 + x[0] * x[0]); };
  PointFn u = mollify(raw, rho);
  double x = 2.0;
  CHECK(u(&x) == doctest::Approx(4.0 / 5.0));
}

TEST_CASE("boundary data matches the exact solution on sampled points") {
  ProblemSpec p = make_linear_pbe(4, Domain::ball(4, 1.0), -1.0, 2.0);
  RandomStream rs(8, StreamKind::Boundary, 0);
  Tensor B = sample_boundary(p.domain, 200, rs);
  for (int64_t i = 0; i < B.rows; ++i) {
    const double* x = B.data() + i * 4;
    CHECK(std::fabs(p.g(x) - p.exact_solution(x)) <= 1e-12);
    double r2 = 0;
    for (int64_t j = 0; j < 4; ++j) r2 += x[j] * x[j];
    CHECK(std::fabs(std::sqrt(r2) - 1.0) <= 1e-12);
  }
}

TEST_CASE("boundary sampler statistics") {
  {
    // d=1 cube: points split evenly between the two endpoints
    Domain dom = Domain::hypercube(1, 1.0);
    RandomStream rs(9, StreamKind::Boundary, 1);
    Tensor B = sample_boundary(dom, 10000, rs);
    int64_t plus = 0;
    for (int64_t i = 0; i < B.rows; ++i) {
      CHECK(std::fabs(std::fabs(B.v[size_t(i)]) - 1.0) <= 1e-15);
      plus += B.v[size_t(i)] > 0;
    }
    // binomial: 4 sigma of n=1e4, p=1/2 is 200
    CHECK(std::abs(plus - 5000) < 200);
  }
  {
    // d=2 cube: half the samples sit on the |x1| = 1 faces
    Domain dom = Domain::hypercube(2, 1.0);
    RandomStream rs(10, StreamKind::Boundary, 2);
    Tensor B = sample_boundary(dom, 10000, rs);
    int64_t on_x1 = 0;
    for (int64_t i = 0; i < B.rows; ++i)
      on_x1 += std::fabs(std::fabs(B.at(i, 0)) - 1.0) <= 1e-15;
    CHECK(std::abs(on_x1 - 5000) < 200);
  }
  CHECK_THROWS_AS(
      [] {
        Domain dom = Domain::unbounded(3);
        RandomStream rs(1, StreamKind::Boundary, 3);
        sample_boundary(dom, 10, rs);
      }(),
      InvalidInput);
}
