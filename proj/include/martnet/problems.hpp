#pragma once

#include <functional>
#include <optional>
#include <string>

#include "martnet/sde.hpp"

namespace martnet {

enum class ProblemKind : uint8_t { BVP = 0, Eigen = 1 };

using PointFn = std::function<double(const double*)>;

// One benchmark problem: domain, diffusion coefficients, boundary data, and
// the generator applied to the solution decomposed as
//
//   Lu = alpha(x) + (beta0 + beta_lambda * lambda) * u + gamma_sinh * sinh(u)
//
// which covers every loss integrand used here (lambda only appears in
// eigenvalue problems). Function fields are pure and safe to call
// concurrently.
struct ProblemSpec {
  std::string name;
  int64_t dim = 0;
  Domain domain;
  SdeCoefficients coefficients;
  ProblemKind kind = ProblemKind::BVP;

  PointFn alpha;  // null means 0
  double beta0 = 0.0;
  double beta_lambda = 0.0;
  double gamma_sinh = 0.0;

  PointFn boundary_g;      // null means homogeneous data
  PointFn exact_solution;  // null when unknown
  std::optional<double> exact_eigenvalue;
  PointFn mollifier;  // unbounded eigenproblems only

  PointFn source_f;  // linear source for the Feynman-Kac estimate
  double fk_c = 0.0; // zeroth-order coefficient in  Delta u + c u = f
  bool fk_available = false;

  double g(const double* x) const { return boundary_g ? boundary_g(x) : 0.0; }

  // f(x, u) of the strong form; linear problems ignore u.
  double source(const double* x, double u) const {
    if (gamma_sinh != 0.0) return source_f(x);  // nonlinear PBE: f(x) independent of u
    if (kind == ProblemKind::Eigen) return 0.0 * u;
    return source_f(x);
  }

  // Eigenproblem loss coefficient in front of u (FP test: d - c/2 + lambda/2).
  double zeroth_order_coefficient(const double* x, double lambda) const {
    (void)x;
    return -(beta0 + beta_lambda * lambda);
  }

  double integrand(const double* x, double u, double lambda) const {
    double v = (beta0 + beta_lambda * lambda) * u;
    if (alpha) v += alpha(x);
    if (gamma_sinh != 0.0) v += gamma_sinh * std::sinh(u);
    return v;
  }
};

// Linear Poisson-Boltzmann:  Delta u + c u = f  on a cube or ball, with the
// manufactured solution u = sum_i cos(omega x_i). The driving process is
// plain Brownian motion (generator Delta/2).
inline ProblemSpec make_linear_pbe(int64_t d, Domain domain, double c, double omega) {
  require(c < 0.0, "linear pbe: c must be negative");
  require(domain.dim == d, "linear pbe: domain dimension mismatch");
  ProblemSpec p;
  p.name = domain.kind == DomainKind::Ball ? "pbe-ball" : "pbe-cube";
  p.dim = d;
  p.domain = std::move(domain);
  p.coefficients = SdeCoefficients::brownian();
  p.kind = ProblemKind::BVP;
  auto u_exact = [d, omega](const double* x) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += std::cos(omega * x[j]);
    return s;
  };
  p.exact_solution = u_exact;
  p.boundary_g = u_exact;
  p.source_f = [u_exact, c, omega](const double* x) {
    return (c - omega * omega) * u_exact(x);
  };
  p.alpha = [f = p.source_f](const double* x) { return 0.5 * f(x); };
  p.beta0 = -0.5 * c;
  p.fk_c = c;
  p.fk_available = true;
  return p;
}

// Nonlinear Poisson-Boltzmann:  -Delta u + sinh u = f  on the ball of radius
// L, manufactured solution u = a * |x|^2.
inline ProblemSpec make_nonlinear_pbe(int64_t d, double L, double a) {
  ProblemSpec p;
  p.name = "pbe-sinh";
  p.dim = d;
  p.domain = Domain::ball(d, L);
  p.coefficients = SdeCoefficients::brownian();
  p.kind = ProblemKind::BVP;
  auto u_exact = [d, a](const double* x) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += x[j] * x[j];
    return a * s;
  };
  p.exact_solution = u_exact;
  p.boundary_g = [a, L](const double*) { return a * L * L; };
  p.source_f = [u_exact, a, d](const double* x) {
    return -2.0 * a * double(d) + std::sinh(u_exact(x));
  };
  // Lu = (sinh u - f)/2 with the sinh evaluated on the trained function.
  p.alpha = [f = p.source_f](const double* x) { return -0.5 * f(x); };
  p.gamma_sinh = 0.5;
  return p;
}

// Laplace eigenvalue problem  -Delta u = lambda u  on [-L,L]^d with zero
// boundary data. The product-of-sines eigenfunction printed with eigenvalue
// d (pi/L)^2 vanishes on the boundary and satisfies the PDE (verified by the
// finite-difference residual test); it is the reference mode here even though
// it is not the fundamental one.
inline ProblemSpec make_laplace_eigen(int64_t d, double L) {
  require(L > 0.0, "laplace eigen: L must be positive");
  ProblemSpec p;
  p.name = "laplace-eig";
  p.dim = d;
  p.domain = Domain::hypercube(d, L);
  p.coefficients = SdeCoefficients::brownian();
  p.kind = ProblemKind::Eigen;
  p.beta_lambda = -0.5;  // Lu = -(lambda/2) u for the generator Delta/2
  p.exact_eigenvalue = double(d) * (M_PI / L) * (M_PI / L);
  p.exact_solution = [d, L](const double* x) {
    double s = 1.0;
    for (int64_t j = 0; j < d; ++j) s *= std::sin(M_PI * x[j] / L);
    return s;
  };
  return p;
}

// Fokker-Planck eigenvalue problem with quadratic potential W = |x|^2 on all
// of R^d:  -Delta psi - div(psi grad W) + c psi = lambda psi.  In generator
// form L psi = -(Delta W / 2 - c/2 + lambda/2) psi with drift grad(W)/2 = x.
// The ground state is psi = exp(-|x|^2) at lambda = c.
inline ProblemSpec make_fokker_planck_eigen(int64_t d, double c,
                                            double mollifier_alpha = 5.0 / 11.0) {
  ProblemSpec p;
  p.name = "fokker-planck-eig";
  p.dim = d;
  p.domain = Domain::unbounded(d);
  p.coefficients = SdeCoefficients::linear_drift(1.0);  // mu = x
  p.kind = ProblemKind::Eigen;
  p.beta0 = -(double(d) - 0.5 * c);  // Delta W / 2 = d
  p.beta_lambda = -0.5;
  p.exact_eigenvalue = c;
  p.exact_solution = [d](const double* x) {
    double r2 = 0.0;
    for (int64_t j = 0; j < d; ++j) r2 += x[j] * x[j];
    return std::exp(-r2);
  };
  p.mollifier = [d, mollifier_alpha](const double* x) {
    double r2 = 0.0;
    for (int64_t j = 0; j < d; ++j) r2 += x[j] * x[j];
    return 1.0 / (1.0 + r2 / (mollifier_alpha * mollifier_alpha));
  };
  return p;
}

// u(x) = rho(x) * u_raw(x); gradients flow through both factors when the
// equivalent composition is built on the tape.
inline PointFn mollify(PointFn u_raw, PointFn rho) {
  return [u_raw = std::move(u_raw), rho = std::move(rho)](const double* x) {
    return rho(x) * u_raw(x);
  };
}

}  // namespace martnet
