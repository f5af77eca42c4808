#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "martnet/common.hpp"
#include "martnet/rng.hpp"
#include "martnet/tensor.hpp"

namespace martnet {

enum class DomainKind : uint8_t { Hypercube = 0, Ball = 1, Unbounded = 2 };

// Bounded domains are centered boxes/balls of half-width L. The interior test
// treats a band of width 1e-12*max(1,L) around the boundary as already
// outside, so a step landing numerically on the boundary counts as a hit.
struct Domain {
  DomainKind kind = DomainKind::Unbounded;
  int64_t dim = 0;
  double half_width = 0.0;
  std::vector<double> center;  // empty means the origin

  static Domain hypercube(int64_t d, double L, std::vector<double> c = {}) {
    require(L > 0.0, "domain: half-width must be positive");
    return {DomainKind::Hypercube, d, L, std::move(c)};
  }
  static Domain ball(int64_t d, double L, std::vector<double> c = {}) {
    require(L > 0.0, "domain: radius must be positive");
    return {DomainKind::Ball, d, L, std::move(c)};
  }
  static Domain unbounded(int64_t d) { return {DomainKind::Unbounded, d, 0.0, {}}; }

  bool bounded() const { return kind != DomainKind::Unbounded; }
  double center_at(int64_t j) const { return center.empty() ? 0.0 : center[size_t(j)]; }
  double boundary_tol() const { return 1e-12 * std::max(1.0, half_width); }

  bool interior(const double* x) const {
    switch (kind) {
      case DomainKind::Unbounded:
        return true;
      case DomainKind::Hypercube: {
        const double lim = half_width - boundary_tol();
        for (int64_t j = 0; j < dim; ++j)
          if (std::fabs(x[j] - center_at(j)) >= lim) return false;
        return true;
      }
      case DomainKind::Ball: {
        double r2 = 0.0;
        for (int64_t j = 0; j < dim; ++j) {
          const double u = x[j] - center_at(j);
          r2 += u * u;
        }
        const double lim = half_width - boundary_tol();
        return r2 < lim * lim;
      }
    }
    return true;
  }

  // Distance of x to the boundary surface (0 when exactly on it).
  double boundary_gap(const double* x) const {
    switch (kind) {
      case DomainKind::Unbounded:
        return std::numeric_limits<double>::infinity();
      case DomainKind::Hypercube: {
        double m = 0.0;
        for (int64_t j = 0; j < dim; ++j)
          m = std::max(m, std::fabs(x[j] - center_at(j)));
        return std::fabs(half_width - m);
      }
      case DomainKind::Ball: {
        double r2 = 0.0;
        for (int64_t j = 0; j < dim; ++j) {
          const double u = x[j] - center_at(j);
          r2 += u * u;
        }
        return std::fabs(half_width - std::sqrt(r2));
      }
    }
    return 0.0;
  }
};

struct ExitHit {
  bool crossed = false;
  double frac = 0.0;  // fraction of the step [prev, next] at the crossing
  std::vector<double> point;
};

// Intersection of the segment [prev, next] with the boundary: closed-form
// root for the ball, per-face clipping for the hypercube. The returned point
// is pinned onto the boundary surface exactly.
inline ExitHit detect_exit(const double* prev, const double* next, const Domain& dom) {
  ExitHit hit;
  if (!dom.bounded() || dom.interior(next)) return hit;
  const int64_t d = dom.dim;
  hit.crossed = true;
  hit.point.assign(size_t(d), 0.0);

  if (dom.kind == DomainKind::Hypercube) {
    double s = 1.0;
    int64_t face = -1;
    double face_val = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = dom.center_at(j);
      const double u = next[j] - c;
      if (std::fabs(u) < dom.half_width - dom.boundary_tol()) continue;
      const double target = c + (u > 0 ? dom.half_width : -dom.half_width);
      const double denom = next[j] - prev[j];
      double sj = denom != 0.0 ? (target - prev[j]) / denom : 1.0;
      sj = std::min(std::max(sj, 0.0), 1.0);
      if (face < 0 || sj < s) {
        s = sj;
        face = j;
        face_val = target;
      }
    }
    for (int64_t j = 0; j < d; ++j) {
      double p = prev[j] + s * (next[j] - prev[j]);
      const double c = dom.center_at(j);
      p = std::min(std::max(p, c - dom.half_width), c + dom.half_width);
      hit.point[size_t(j)] = p;
    }
    if (face >= 0) hit.point[size_t(face)] = face_val;
    hit.frac = s;
    return hit;
  }

  // Ball: positive root of |prev + s*(next - prev) - c|^2 = L^2.
  double a = 0.0, b = 0.0, cc = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    const double p = prev[j] - dom.center_at(j);
    const double dir = next[j] - prev[j];
    a += dir * dir;
    b += p * dir;
    cc += p * p;
  }
  cc -= dom.half_width * dom.half_width;
  double s = 1.0;
  if (a > 0.0) {
    const double disc = std::max(b * b - a * cc, 0.0);
    s = (-b + std::sqrt(disc)) / a;
    s = std::min(std::max(s, 0.0), 1.0);
  }
  double r = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    const double p = prev[j] + s * (next[j] - prev[j]) - dom.center_at(j);
    hit.point[size_t(j)] = p;
    r += p * p;
  }
  r = std::sqrt(r);
  const double scale = r > 0.0 ? dom.half_width / r : 0.0;
  for (int64_t j = 0; j < d; ++j)
    hit.point[size_t(j)] = dom.center_at(j) + hit.point[size_t(j)] * scale;
  hit.frac = s;
  return hit;
}

// n points uniform w.r.t. surface measure: cube faces are picked uniformly
// among the 2d faces, ball points are normalized Gaussians.
inline Tensor sample_boundary(const Domain& dom, int64_t n, RandomStream& rs) {
  require(dom.bounded(), "sample_boundary: domain must be bounded");
  const int64_t d = dom.dim;
  Tensor X(n, d);
  for (int64_t i = 0; i < n; ++i) {
    double* x = X.data() + i * d;
    if (dom.kind == DomainKind::Hypercube) {
      const uint64_t face = rs.uniform_below(uint64_t(2 * d));
      for (int64_t j = 0; j < d; ++j)
        x[j] = dom.center_at(j) + (2.0 * rs.uniform() - 1.0) * dom.half_width;
      x[face / 2] = dom.center_at(int64_t(face / 2)) +
                    (face % 2 == 0 ? dom.half_width : -dom.half_width);
    } else {
      double r2 = 0.0;
      do {
        r2 = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          x[j] = rs.normal();
          r2 += x[j] * x[j];
        }
      } while (r2 == 0.0);
      const double scale = dom.half_width / std::sqrt(r2);
      for (int64_t j = 0; j < d; ++j) x[j] = dom.center_at(j) + x[j] * scale;
    }
  }
  return X;
}

}  // namespace martnet
