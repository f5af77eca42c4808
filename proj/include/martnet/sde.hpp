#pragma once

#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "martnet/binio.hpp"
#include "martnet/domain.hpp"
#include "martnet/rng.hpp"

namespace martnet {

// Drift and diffusion of the Ito process. The common cases (zero drift,
// mu = a*x, identity diffusion) have dedicated kinds so the stepping loop
// stays cheap; anything else goes through the custom callbacks.
struct SdeCoefficients {
  enum class Drift : uint8_t { Zero = 0, Linear = 1, Constant = 2, Custom = 3 };
  enum class Diffusion : uint8_t { Identity = 0, Matrix = 1 };

  Drift drift_kind = Drift::Zero;
  double linear_coeff = 0.0;             // mu(x) = linear_coeff * x
  std::vector<double> constant_drift;    // mu(x) = constant vector
  std::function<void(const double*, double*, int64_t)> drift_fn;

  Diffusion diffusion_kind = Diffusion::Identity;
  std::function<void(const double*, double*, int64_t)> sigma_fn;  // row-major d x d

  static SdeCoefficients brownian() { return {}; }
  static SdeCoefficients linear_drift(double a) {
    SdeCoefficients c;
    c.drift_kind = Drift::Linear;
    c.linear_coeff = a;
    return c;
  }
  static SdeCoefficients constant(std::vector<double> mu) {
    SdeCoefficients c;
    c.drift_kind = Drift::Constant;
    c.constant_drift = std::move(mu);
    return c;
  }

  void drift(const double* x, double* mu, int64_t d) const {
    switch (drift_kind) {
      case Drift::Zero:
        for (int64_t j = 0; j < d; ++j) mu[j] = 0.0;
        return;
      case Drift::Linear:
        for (int64_t j = 0; j < d; ++j) mu[j] = linear_coeff * x[j];
        return;
      case Drift::Constant:
        for (int64_t j = 0; j < d; ++j) mu[j] = constant_drift[size_t(j)];
        return;
      case Drift::Custom:
        drift_fn(x, mu, d);
        return;
    }
  }

  std::string tag() const {
    switch (drift_kind) {
      case Drift::Zero: return "drift:zero";
      case Drift::Linear: return "drift:linear:" + std::to_string(linear_coeff);
      case Drift::Constant: return "drift:const";
      case Drift::Custom: return "drift:custom";
    }
    return "?";
  }
};

constexpr int32_t kCensored = -1;

// One batch of materialized paths: row r of `rows` is one d-dimensional
// position; path b owns rows [offs[b], offs[b+1]).
struct PathBlock {
  int64_t d = 0;
  std::vector<int64_t> paths;
  std::vector<int64_t> offs;
  std::vector<double> rows;

  const double* row(int64_t r) const { return rows.data() + r * d; }
};

// M Euler-Maruyama trajectories from one starting point. Killed paths store
// positions up to and including the interpolated boundary point; logically
// every index past the exit repeats that point. Storage is either the
// prefix-compressed position array or on-demand regeneration from the
// counter-based noise streams (exit data is always kept for all paths).
struct PathEnsemble {
  int64_t d = 0;
  int64_t n_paths = 0;  // M
  int64_t n_steps = 0;  // N
  double dt = 0.0;
  uint64_t seed = 0;
  std::vector<double> x0;
  Domain domain;
  SdeCoefficients coeffs;
  bool stores_positions = true;

  std::vector<int32_t> exit_index;  // kCensored or the first boundary index
  std::vector<double> exit_time;    // interpolated crossing time
  std::vector<double> exit_point;   // M x d, valid for exited paths
  std::vector<int64_t> offsets;     // M+1 row offsets when stored
  std::vector<double> pos;          // prefix rows, row-major d columns

  bool exited(int64_t m) const { return exit_index[size_t(m)] != kCensored; }
  // Number of stored rows for path m (exit row included).
  int64_t prefix_len(int64_t m) const {
    return exited(m) ? exit_index[size_t(m)] + 1 : n_steps + 1;
  }
  const double* stored_row(int64_t m, int64_t i) const {
    return pos.data() + (offsets[size_t(m)] + std::min(i, prefix_len(m) - 1)) * d;
  }
  double censored_fraction() const {
    int64_t c = 0;
    for (int64_t m = 0; m < n_paths; ++m) c += !exited(m);
    return double(c) / double(n_paths);
  }

  void gather(const std::vector<int64_t>& which, PathBlock& out) const;
};

namespace detail {

// Walks one path, invoking emit(row_index, x) for every stored index
// 0..prefix_len-1. Returns exit data through the out-parameters.
template <class Emit>
inline void walk_path(const SdeCoefficients& coeffs, const Domain& dom,
                      const std::vector<double>& x0, int64_t n_steps, double dt,
                      uint64_t seed, int64_t path, int32_t* exit_idx,
                      double* exit_t, double* exit_pt, Emit&& emit) {
  const int64_t d = int64_t(x0.size());
  const double sqrt_dt = std::sqrt(dt);
  RandomStream rs(seed, StreamKind::Paths, uint64_t(path));
  std::vector<double> x = x0;
  std::vector<double> nxt(static_cast<size_t>(d));
  std::vector<double> mu(static_cast<size_t>(d));
  std::vector<double> z(static_cast<size_t>(d));
  std::vector<double> sigma;
  emit(int64_t(0), x.data());
  *exit_idx = kCensored;
  for (int64_t i = 0; i < n_steps; ++i) {
    coeffs.drift(x.data(), mu.data(), d);
    rs.fill_normal(z.data(), d);
    if (coeffs.diffusion_kind == SdeCoefficients::Diffusion::Identity) {
      for (int64_t j = 0; j < d; ++j)
        nxt[size_t(j)] = x[size_t(j)] + mu[size_t(j)] * dt + sqrt_dt * z[size_t(j)];
    } else {
      sigma.resize(size_t(d * d));
      coeffs.sigma_fn(x.data(), sigma.data(), d);
      for (int64_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (int64_t k = 0; k < d; ++k) s += sigma[size_t(j * d + k)] * z[size_t(k)];
        nxt[size_t(j)] = x[size_t(j)] + mu[size_t(j)] * dt + sqrt_dt * s;
      }
    }
    for (int64_t j = 0; j < d; ++j)
      if (!std::isfinite(nxt[size_t(j)]))
        throw SimulationError("sde: non-finite position at path " +
                              std::to_string(path) + ", step " + std::to_string(i + 1));
    if (dom.bounded() && !dom.interior(nxt.data())) {
      ExitHit hit = detect_exit(x.data(), nxt.data(), dom);
      *exit_idx = int32_t(i + 1);
      *exit_t = (double(i) + hit.frac) * dt;
      std::memcpy(exit_pt, hit.point.data(), size_t(d) * sizeof(double));
      emit(i + 1, hit.point.data());
      return;
    }
    x = nxt;
    emit(i + 1, x.data());
  }
}

}  // namespace detail

inline PathEnsemble sample_ensemble(const SdeCoefficients& coeffs, const Domain& domain,
                                    const std::vector<double>& x0, int64_t M, int64_t N,
                                    double dt, uint64_t seed, bool store_positions = true) {
  require(M >= 1 && N >= 1, "sample_ensemble: need M >= 1 and N >= 1");
  require(dt > 0.0, "sample_ensemble: dt must be positive");
  require(int64_t(x0.size()) == domain.dim, "sample_ensemble: x0 dimension mismatch");
  require(domain.interior(x0.data()), "sample_ensemble: x0 must be interior to the domain");

  PathEnsemble e;
  e.d = domain.dim;
  e.n_paths = M;
  e.n_steps = N;
  e.dt = dt;
  e.seed = seed;
  e.x0 = x0;
  e.domain = domain;
  e.coeffs = coeffs;
  e.stores_positions = store_positions;
  e.exit_index.assign(size_t(M), kCensored);
  e.exit_time.assign(size_t(M), 0.0);
  e.exit_point.assign(size_t(M * e.d), 0.0);

  // Pass 1: exit data only.
  std::string err;
  int64_t err_m = -1;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t m = 0; m < M; ++m) {
    try {
      detail::walk_path(coeffs, domain, x0, N, dt, seed, m, &e.exit_index[size_t(m)],
                        &e.exit_time[size_t(m)], e.exit_point.data() + m * e.d,
                        [](int64_t, const double*) {});
    } catch (const std::exception& ex) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (err_m < 0 || m < err_m) {
        err_m = m;
        err = ex.what();
      }
    }
  }
  if (err_m >= 0) throw SimulationError(err);
  if (!store_positions) return e;

  // Pass 2: positions into the prefix-compressed layout.
  e.offsets.assign(size_t(M + 1), 0);
  for (int64_t m = 0; m < M; ++m)
    e.offsets[size_t(m + 1)] = e.offsets[size_t(m)] + e.prefix_len(m);
  e.pos.assign(size_t(e.offsets[size_t(M)] * e.d), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t m = 0; m < M; ++m) {
    double* base = e.pos.data() + e.offsets[size_t(m)] * e.d;
    int32_t idx;
    double t;
    std::vector<double> pt(static_cast<size_t>(e.d));
    detail::walk_path(coeffs, domain, x0, N, dt, seed, m, &idx, &t, pt.data(),
                      [&](int64_t i, const double* row) {
                        std::memcpy(base + i * e.d, row, size_t(e.d) * sizeof(double));
                      });
  }
  return e;
}

inline void PathEnsemble::gather(const std::vector<int64_t>& which, PathBlock& out) const {
  const int64_t B = int64_t(which.size());
  out.d = d;
  out.paths = which;
  out.offs.assign(size_t(B + 1), 0);
  for (int64_t b = 0; b < B; ++b)
    out.offs[size_t(b + 1)] = out.offs[size_t(b)] + prefix_len(which[size_t(b)]);
  out.rows.resize(size_t(out.offs[size_t(B)] * d));
  if (stores_positions) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t b = 0; b < B; ++b) {
      const int64_t m = which[size_t(b)];
      std::memcpy(out.rows.data() + out.offs[size_t(b)] * d,
                  pos.data() + offsets[size_t(m)] * d,
                  size_t(prefix_len(m) * d) * sizeof(double));
    }
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t b = 0; b < B; ++b) {
      const int64_t m = which[size_t(b)];
      double* base = out.rows.data() + out.offs[size_t(b)] * d;
      int32_t idx;
      double t;
      std::vector<double> pt(static_cast<size_t>(d));
      detail::walk_path(coeffs, domain, x0, n_steps, dt, seed, m, &idx, &t, pt.data(),
                        [&](int64_t i, const double* row) {
                          std::memcpy(base + i * d, row, size_t(d) * sizeof(double));
                        });
    }
  }
}

// Indicator weights I(t_i <= tau) per path: 1 when the path is censored or
// i <= exit_index.
inline std::vector<double> drifted_brownian_indicator(const PathEnsemble& e, int64_t i) {
  require(i >= 0 && i <= e.n_steps, "indicator: time index out of range");
  std::vector<double> w(size_t(e.n_paths), 0.0);
  for (int64_t m = 0; m < e.n_paths; ++m)
    w[size_t(m)] = (!e.exited(m) || i <= e.exit_index[size_t(m)]) ? 1.0 : 0.0;
  return w;
}

// ---------------------------------------------------------------------------
// Ensemble cache file ("MNEN", version 1): header carrying the generation
// recipe, then exit data and (when stored) the prefix-compressed positions.
// Readers verify the header against the requesting configuration.
// ---------------------------------------------------------------------------
inline void save_ensemble(const std::string& path, const PathEnsemble& e,
                          const std::string& coeff_tag) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "ensemble cache: cannot open for writing: " + path);
  std::fwrite("MNEN", 1, 4, f);
  detail::put<uint32_t>(f, 1);
  detail::put<int64_t>(f, e.d);
  detail::put<int64_t>(f, e.n_paths);
  detail::put<int64_t>(f, e.n_steps);
  detail::put<double>(f, e.dt);
  detail::put<uint64_t>(f, e.seed);
  detail::put<uint8_t>(f, uint8_t(e.domain.kind));
  detail::put<double>(f, e.domain.half_width);
  detail::put_vec(f, e.domain.center);
  detail::put_vec(f, e.x0);
  const uint32_t tag_len = uint32_t(coeff_tag.size());
  detail::put<uint32_t>(f, tag_len);
  std::fwrite(coeff_tag.data(), 1, tag_len, f);
  detail::put<uint8_t>(f, e.stores_positions ? 1 : 0);
  detail::put_vec(f, e.exit_index);
  detail::put_vec(f, e.exit_time);
  detail::put_vec(f, e.exit_point);
  detail::put_vec(f, e.offsets);
  detail::put_vec(f, e.pos);
  std::fclose(f);
}

// Loads a cached ensemble; every header field must match the expected values.
inline PathEnsemble load_ensemble(const std::string& path, const SdeCoefficients& coeffs,
                                  const Domain& domain, const std::vector<double>& x0,
                                  int64_t M, int64_t N, double dt, uint64_t seed,
                                  const std::string& coeff_tag) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "ensemble cache: cannot open: " + path);
  char magic[4];
  require(std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "MNEN", 4) == 0,
          "ensemble cache: bad magic");
  require(detail::get<uint32_t>(f) == 1, "ensemble cache: unsupported version");
  PathEnsemble e;
  e.d = detail::get<int64_t>(f);
  e.n_paths = detail::get<int64_t>(f);
  e.n_steps = detail::get<int64_t>(f);
  e.dt = detail::get<double>(f);
  e.seed = detail::get<uint64_t>(f);
  e.domain.kind = DomainKind(detail::get<uint8_t>(f));
  e.domain.dim = e.d;
  e.domain.half_width = detail::get<double>(f);
  detail::get_vec(f, e.domain.center);
  detail::get_vec(f, e.x0);
  const uint32_t tag_len = detail::get<uint32_t>(f);
  std::string tag(tag_len, '\0');
  require(std::fread(tag.data(), 1, tag_len, f) == tag_len, "ensemble cache: truncated");
  e.stores_positions = detail::get<uint8_t>(f) != 0;
  detail::get_vec(f, e.exit_index);
  detail::get_vec(f, e.exit_time);
  detail::get_vec(f, e.exit_point);
  detail::get_vec(f, e.offsets);
  detail::get_vec(f, e.pos);
  std::fclose(f);

  const bool header_ok = e.d == domain.dim && e.n_paths == M && e.n_steps == N &&
                         e.dt == dt && e.seed == seed && e.domain.kind == domain.kind &&
                         e.domain.half_width == domain.half_width && e.x0 == x0 &&
                         tag == coeff_tag;
  require(header_ok, "ensemble cache: header does not match the requesting config");
  e.coeffs = coeffs;
  return e;
}

}  // namespace martnet
