#pragma once

#include <utility>
#include <vector>

#include "martnet/net.hpp"
#include "martnet/problems.hpp"

namespace martnet {

// Trapezoid weights over k+1 nodes: 1/2 at the ends, 1 inside; k = 0 keeps a
// single unit weight.
struct TrapezoidWeights {
  int64_t k = 0;
  std::vector<double> w;
};

inline TrapezoidWeights trapezoid_weights(int64_t k) {
  require(k >= 0, "trapezoid_weights: k must be non-negative");
  TrapezoidWeights t;
  t.k = k;
  t.w.assign(size_t(k + 1), 1.0);
  if (k >= 1) t.w.front() = t.w.back() = 0.5;
  return t;
}

// Discrete increment of the solution martingale over [t_i, t_{i+k}]:
// u_k - u_0 - dt * sum_l w_l * drift_l.
inline double martingale_increment(const std::vector<double>& u_vals,
                                   const std::vector<double>& drift_vals, double dt,
                                   int64_t k) {
  require(int64_t(u_vals.size()) == k + 1 && int64_t(drift_vals.size()) == k + 1,
          "martingale_increment: need k+1 aligned values");
  const TrapezoidWeights tw = trapezoid_weights(k);
  double quad = 0.0;
  for (int64_t l = 0; l <= k; ++l) quad += tw.w[size_t(l)] * drift_vals[size_t(l)];
  return u_vals.back() - u_vals.front() - dt * quad;
}

// Loss hyper-parameters (weights, exponents, batch bounds, mode flags).
struct LossWeights {
  double alpha_bdry = 0.0;
  double alpha_fk = 0.0;
  double alpha_normal = 0.0;
  double alpha_eig = 0.0;
  double p = 1.0, q = 1.0, r = 1.0;  // fractional exponents
  bool fractional = false;
  double c_norm = 1.0;
  int p_norm = 1;  // 1 or 2
  std::vector<std::vector<double>> normal_points;
  bool dt_prefactor = false;
  // Straddling increments: truncate the quadrature at the interpolated exit
  // time (default), or zero the weights of nodes at/past the exit index.
  bool straddle_zero_weights = false;

  void validate() const {
    require(alpha_bdry >= 0 && alpha_fk >= 0 && alpha_normal >= 0 && alpha_eig >= 0,
            "loss weights: negative weight");
    require(p > 0 && q > 0 && r > 0, "loss weights: exponents must be positive");
    require(c_norm > 0, "loss weights: c_norm must be positive");
    require(p_norm == 1 || p_norm == 2, "loss weights: p_norm must be 1 or 2");
  }
};

// Without-replacement path subset for one epoch (Floyd's algorithm, keyed by
// (seed, epoch) so the draw is reproducible).
struct MiniBatch {
  int64_t epoch = 0;
  bool full_batch = false;
  std::vector<int64_t> indices;
};

inline MiniBatch select_minibatch(int64_t M, int64_t m1, int64_t m2, int64_t epoch,
                                  uint64_t seed, int64_t fixed_size = -1,
                                  uint64_t substream = 0) {
  MiniBatch b;
  b.epoch = epoch;
  RandomStream rs(seed, StreamKind::Batch, (uint64_t(epoch) << 20) | substream);
  int64_t B;
  if (fixed_size > 0) {
    require(fixed_size <= M, "minibatch: fixed size exceeds M");
    B = fixed_size;
  } else {
    require(m1 > m2 && m2 >= 1, "minibatch: need m1 > m2 >= 1");
    const int64_t lo = (M + m1 - 1) / m1;
    const int64_t hi = M / m2;
    require(lo >= 1 && hi >= lo && hi <= M, "minibatch: bounds exceed M");
    B = lo + int64_t(rs.uniform_below(uint64_t(hi - lo + 1)));
  }
  b.full_batch = B == M;
  b.indices.reserve(size_t(B));
  std::vector<bool> taken(size_t(M), false);
  for (int64_t j = M - B; j < M; ++j) {
    const int64_t t = int64_t(rs.uniform_below(uint64_t(j + 1)));
    if (taken[size_t(t)]) {
      taken[size_t(j)] = true;
      b.indices.push_back(j);
    } else {
      taken[size_t(t)] = true;
      b.indices.push_back(t);
    }
  }
  std::sort(b.indices.begin(), b.indices.end());
  return b;
}

namespace detail {

// Quadrature nodes (path-local index, weight) for the increment over
// [t_i, t_{i+k}] of a path exiting at index e (kCensored for never).
// Truncated mode integrates up to the interpolated exit time; zero-weight
// mode keeps the full trapezoid weights on nodes strictly before e.
inline void increment_quadrature(int64_t i, int64_t k, double dt, int32_t exit_idx,
                                 double exit_time, bool zero_weights,
                                 std::vector<std::pair<int64_t, double>>& nodes) {
  nodes.clear();
  const bool censored = exit_idx == kCensored;
  const int64_t e = censored ? INT64_MAX : exit_idx;
  if (censored || e > i + k) {  // fully interior
    for (int64_t l = 0; l <= k; ++l)
      nodes.emplace_back(i + l, dt * (k >= 1 && (l == 0 || l == k) ? 0.5 : 1.0));
    return;
  }
  if (e <= i) return;  // fully past the exit: increment is exactly zero
  if (zero_weights) {
    for (int64_t l = 0; l <= k && i + l < e; ++l)
      nodes.emplace_back(i + l, dt * (k >= 1 && (l == 0 || l == k) ? 0.5 : 1.0));
    return;
  }
  // Truncated: trapezoid over [t_i, t_{e-1}] plus the partial segment
  // [t_{e-1}, tau] ending at the boundary point (node e).
  const int64_t n_full = e - i;  // nodes i .. e-1
  if (n_full >= 2) {
    for (int64_t j = 0; j < n_full; ++j)
      nodes.emplace_back(i + j, dt * ((j == 0 || j == n_full - 1) ? 0.5 : 1.0));
  } else {
    nodes.emplace_back(i, 0.0);  // placeholder keeps the node list non-empty
  }
  const double delta = exit_time - double(e - 1) * dt;
  if (delta > 0.0) {
    nodes.emplace_back(e - 1, 0.5 * delta);
    nodes.emplace_back(e, 0.5 * delta);
  }
  // merge duplicate node e-1 entries
  for (size_t a = 0; a + 1 < nodes.size(); ++a)
    for (size_t b = a + 1; b < nodes.size(); ++b)
      if (nodes[a].first == nodes[b].first) {
        nodes[a].second += nodes[b].second;
        nodes.erase(nodes.begin() + int64_t(b));
        --b;
      }
}

}  // namespace detail

// Everything needed to evaluate the martingale loss for one mini-batch:
// the stacked input points, the mollifier values per row, sparse linear
// combinations over the per-row u values (and sinh(u) for the nonlinear PBE),
// and the per-increment constants from the x-dependent integrand part.
struct MartAssembly {
  int64_t n_rows = 0;
  int64_t n_idx = 0;    // number of increment indices (N - k + 1)
  int64_t n_time = 0;   // N, the loss divisor
  int64_t k = 1;
  double dt = 0.0;
  int64_t batch_size = 0;
  Tensor X;                  // [n_rows x d]
  std::vector<double> rho;   // mollifier per row; empty when absent
  Tape::Triplets base;       // u-difference and beta0 quadrature
  Tape::Triplets lam;        // beta_lambda quadrature (scaled by lambda later)
  Tape::Triplets sinh_t;     // gamma quadrature applied to sinh(u)
  std::vector<double> consts;  // per-index constant from alpha
  std::vector<int32_t> alive;  // per-index count of contributing paths
};

inline MartAssembly assemble_martingale(const ProblemSpec& prob, const PathEnsemble& ens,
                                        const std::vector<int64_t>& batch, int64_t k,
                                        const LossWeights& w) {
  require(!batch.empty(), "martingale loss: empty mini-batch");
  require(k >= 1, "martingale loss: k must be >= 1");
  require(k <= ens.n_steps, "martingale loss: k exceeds the number of steps");

  MartAssembly A;
  A.k = k;
  A.dt = ens.dt;
  A.n_time = ens.n_steps;
  A.n_idx = ens.n_steps - k + 1;
  A.batch_size = int64_t(batch.size());

  PathBlock block;
  ens.gather(batch, block);
  A.n_rows = block.offs.back();
  A.X = Tensor(A.n_rows, ens.d, std::move(block.rows));

  if (prob.mollifier) {
    A.rho.resize(size_t(A.n_rows));
    for (int64_t r = 0; r < A.n_rows; ++r)
      A.rho[size_t(r)] = prob.mollifier(A.X.data() + r * ens.d);
  }
  std::vector<double> alpha_row;
  if (prob.alpha) {
    alpha_row.resize(size_t(A.n_rows));
    for (int64_t r = 0; r < A.n_rows; ++r)
      alpha_row[size_t(r)] = prob.alpha(A.X.data() + r * ens.d);
  }

  A.base.n_out = A.lam.n_out = A.sinh_t.n_out = A.n_idx;
  A.consts.assign(size_t(A.n_idx), 0.0);
  A.alive.assign(size_t(A.n_idx), 0);
  const double wm = 1.0 / double(A.batch_size);

  const size_t est = size_t(A.n_rows) * size_t(k + 3);
  A.base.row.reserve(est);
  A.base.col.reserve(est);
  A.base.w.reserve(est);

  std::vector<std::pair<int64_t, double>> nodes;
  for (int64_t b = 0; b < A.batch_size; ++b) {
    const int64_t m = batch[size_t(b)];
    const int32_t e = ens.exit_index[size_t(m)];
    const bool censored = e == kCensored;
    const int64_t last = block.offs[size_t(b + 1)] - block.offs[size_t(b)] - 1;
    const int64_t row0 = block.offs[size_t(b)];
    const int64_t i_max = censored ? A.n_idx - 1 : std::min<int64_t>(A.n_idx - 1, e - 1);
    for (int64_t i = 0; i <= i_max; ++i) {
      A.alive[size_t(i)]++;
      const int32_t ri = int32_t(i);
      const int64_t right = std::min(i + k, last);
      A.base.push(ri, int32_t(row0 + right), wm);
      A.base.push(ri, int32_t(row0 + i), -wm);
      detail::increment_quadrature(i, k, ens.dt, e, ens.exit_time[size_t(m)],
                                   w.straddle_zero_weights, nodes);
      for (const auto& [node, qw] : nodes) {
        if (qw == 0.0) continue;
        const int64_t row = row0 + std::min(node, last);
        if (!alpha_row.empty()) A.consts[size_t(i)] -= wm * qw * alpha_row[size_t(row)];
        if (prob.beta0 != 0.0) A.base.push(ri, int32_t(row), -wm * qw * prob.beta0);
        if (prob.beta_lambda != 0.0)
          A.lam.push(ri, int32_t(row), -wm * qw * prob.beta_lambda);
        if (prob.gamma_sinh != 0.0)
          A.sinh_t.push(ri, int32_t(row), -wm * qw * prob.gamma_sinh);
      }
    }
  }
  return A;
}

// sinh composed from the closed primitive set: tanh(x) / sqrt(1 - tanh^2 x).
// Accurate to |x| ~ 19; the floor saturates it beyond instead of overflowing.
inline Tape::Id sinh_node(Tape& g, Tape::Id x) {
  Tape::Id t = g.tanh(x);
  Tape::Id sech2 = g.add_const(g.scale(g.square(t), -1.0), 1.0);
  return g.mul(t, g.pow_scalar(sech2, -0.5, 1e-17));
}

// Martingale loss node: (1/N) sum_i s_i^2, optionally scaled by 1/dt, where
// s_i is the batch mean of the increments. u_col holds the (mollified)
// network values per assembly row; lambda_node is the eigenvalue node or -1.
struct MartLossNodes {
  Tape::Id loss = -1;
  Tape::Id means = -1;  // the per-index batch means s_i
};

inline MartLossNodes loss_mart_node(Tape& g, const MartAssembly& A, Tape::Id u_col,
                                    Tape::Id lambda_node, const LossWeights& w) {
  Tape::Id s = g.seg_combine(u_col, A.base);
  if (!A.lam.w.empty()) {
    require(lambda_node >= 0, "martingale loss: eigen problem needs a lambda node");
    s = g.add(s, g.mul_scalar(lambda_node, g.seg_combine(u_col, A.lam)));
  }
  if (!A.sinh_t.w.empty()) s = g.add(s, g.seg_combine(sinh_node(g, u_col), A.sinh_t));
  bool any_const = false;
  for (double c : A.consts) any_const |= c != 0.0;
  if (any_const) s = g.add(s, g.constant(Tensor(A.n_idx, 1, A.consts)));
  double scale = 1.0 / double(A.n_time);
  if (w.dt_prefactor) scale /= A.dt;
  MartLossNodes out;
  out.means = s;
  out.loss = g.scale(g.sum(g.square(s)), scale);
  return out;
}

// Mollified network values for the assembly rows.
inline Tape::Id mollified_forward(Tape& g, const MlpParams& net, const MartAssembly& A,
                                  MlpVars* vars_out) {
  MlpVars vars = mlp_forward(g, net, g.constant(A.X));
  Tape::Id u = vars.out;
  if (!A.rho.empty()) u = g.mul(u, g.constant(Tensor(A.n_rows, 1, A.rho)));
  if (vars_out) *vars_out = vars;
  return u;
}

// ---------------------------------------------------------------------------
// Reference-path (tape-free) martingale statistics: evaluates an arbitrary
// callable along the stored paths and returns per-index mean increments with
// standard errors plus the loss value. Used by the oracle suites; kept
// independent of the triplet assembly above so the two routes check each
// other.
// ---------------------------------------------------------------------------
struct IncrementStats {
  std::vector<double> mean;     // batch mean of increments per index
  std::vector<double> se;       // standard error of that mean
  std::vector<int64_t> alive;   // contributing paths per index
  double loss = 0.0;            // (1/N) sum_i mean_i^2 (dt prefactor applied)
  double max_abs_z = 0.0;       // max |mean|/se over indices with alive >= 30
};

template <class PointEval>
IncrementStats martingale_oracle_stats(const ProblemSpec& prob, const PathEnsemble& ens,
                                       const std::vector<int64_t>& batch, int64_t k,
                                       double lambda, const LossWeights& w,
                                       PointEval&& u_fn) {
  require(!batch.empty(), "oracle stats: empty batch");
  const int64_t n_idx = ens.n_steps - k + 1;
  IncrementStats st;
  st.mean.assign(size_t(n_idx), 0.0);
  st.se.assign(size_t(n_idx), 0.0);
  st.alive.assign(size_t(n_idx), 0);
  std::vector<double> sum(size_t(n_idx), 0.0), sum2(size_t(n_idx), 0.0);

  PathBlock block;
  ens.gather(batch, block);
  std::vector<std::pair<int64_t, double>> nodes;
  std::vector<double> uval;
  for (int64_t b = 0; b < int64_t(batch.size()); ++b) {
    const int64_t m = batch[size_t(b)];
    const int32_t e = ens.exit_index[size_t(m)];
    const bool censored = e == kCensored;
    const int64_t row0 = block.offs[size_t(b)];
    const int64_t last = block.offs[size_t(b + 1)] - row0 - 1;
    uval.resize(size_t(last + 1));
    for (int64_t i = 0; i <= last; ++i) {
      double v = u_fn(block.row(row0 + i));
      if (prob.mollifier) v *= prob.mollifier(block.row(row0 + i));
      uval[size_t(i)] = v;
    }
    const int64_t i_max = censored ? n_idx - 1 : std::min<int64_t>(n_idx - 1, e - 1);
    for (int64_t i = 0; i <= i_max; ++i) {
      const int64_t right = std::min(i + k, last);
      double inc = uval[size_t(right)] - uval[size_t(i)];
      detail::increment_quadrature(i, k, ens.dt, e, ens.exit_time[size_t(m)],
                                   w.straddle_zero_weights, nodes);
      for (const auto& [node, qw] : nodes) {
        if (qw == 0.0) continue;
        const int64_t row = std::min(node, last);
        inc -= qw * prob.integrand(block.row(row0 + row), uval[size_t(row)], lambda);
      }
      sum[size_t(i)] += inc;
      sum2[size_t(i)] += inc * inc;
      st.alive[size_t(i)]++;
    }
  }

  const double B = double(batch.size());
  for (int64_t i = 0; i < n_idx; ++i) {
    const double mean_batch = sum[size_t(i)] / B;  // zeros included, as in the loss
    st.mean[size_t(i)] = mean_batch;
    const double var = std::max(sum2[size_t(i)] / B - mean_batch * mean_batch, 0.0);
    st.se[size_t(i)] = std::sqrt(var / B);
    st.loss += mean_batch * mean_batch;
    if (st.alive[size_t(i)] >= 30 && st.se[size_t(i)] > 0.0)
      st.max_abs_z = std::max(st.max_abs_z, std::fabs(mean_batch) / st.se[size_t(i)]);
  }
  st.loss /= double(ens.n_steps);
  if (w.dt_prefactor) st.loss /= ens.dt;
  return st;
}

// ---------------------------------------------------------------------------
// Feynman-Kac point estimate for the linear PBE (network independent):
//   u(x0) ~ mean_j [ g(X_tau) e^{c tau/2} - 1/2 sum_i f(X_i) e^{c t_i/2} dt_i ]
// with the quadrature truncated at the interpolated exit time. The minus sign
// on the source term is the one validated by the closed-form oracles.
// ---------------------------------------------------------------------------
struct FkEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double censored_fraction = 0.0;
  bool censored_warning = false;
};

inline FkEstimate feynman_kac_estimate(const ProblemSpec& prob, const PathEnsemble& ens,
                                       double censored_threshold = 0.01) {
  require(prob.fk_available, "feynman-kac: problem has no linear source form");
  require(ens.domain.bounded(), "feynman-kac: domain must be bounded");
  const double c = prob.fk_c;
  double s = 0.0, s2 = 0.0;
  const int64_t chunk = 8192;
  PathBlock block;
  std::vector<int64_t> which;
  for (int64_t lo = 0; lo < ens.n_paths; lo += chunk) {
    const int64_t hi = std::min(ens.n_paths, lo + chunk);
    which.resize(size_t(hi - lo));
    for (int64_t m = lo; m < hi; ++m) which[size_t(m - lo)] = m;
    ens.gather(which, block);
    for (int64_t b = 0; b < hi - lo; ++b) {
      const int64_t m = lo + b;
      const int64_t row0 = block.offs[size_t(b)];
      const int64_t last = block.offs[size_t(b + 1)] - row0 - 1;
      const bool exited = ens.exited(m);
      const double tau = exited ? ens.exit_time[size_t(m)] : double(ens.n_steps) * ens.dt;
      double term = 0.0;
      if (exited)
        term += prob.g(ens.exit_point.data() + m * ens.d) * std::exp(0.5 * c * tau);
      const int64_t n_seg = exited ? last : ens.n_steps;  // f nodes strictly before exit
      for (int64_t i = 0; i < n_seg; ++i) {
        const double ti = double(i) * ens.dt;
        const double dt_eff = std::min(ens.dt, tau - ti);
        if (dt_eff <= 0.0) break;
        term -= 0.5 * prob.source_f(block.row(row0 + i)) * std::exp(0.5 * c * ti) * dt_eff;
      }
      s += term;
      s2 += term * term;
    }
  }
  FkEstimate est;
  const double M = double(ens.n_paths);
  est.value = s / M;
  est.std_error = std::sqrt(std::max(s2 / M - est.value * est.value, 0.0) / M);
  est.censored_fraction = ens.censored_fraction();
  est.censored_warning = est.censored_fraction > censored_threshold;
  return est;
}

// (u_theta(x0) - fk_estimate)^2
inline Tape::Id loss_fk_node(Tape& g, Tape::Id u_x0, double fk_value) {
  return g.square(g.add_const(u_x0, -fk_value));
}

// (1/N_bdry) sum_k (u(x_k) - g(x_k))^2
inline Tape::Id loss_bdry_node(Tape& g, const ProblemSpec& prob, const MlpParams& net,
                               const Tensor& pts) {
  require(pts.rows >= 1, "boundary loss: no points");
  MlpVars vars = mlp_forward(g, net, g.constant(pts));
  Tensor gv(pts.rows, 1);
  for (int64_t i = 0; i < pts.rows; ++i) gv.v[size_t(i)] = prob.g(pts.data() + i * pts.cols);
  return g.mean(g.square(g.sub(vars.out, g.constant(std::move(gv)))));
}

// ((1/m) sum_i |u(x_i)|^p - c)^2 on the fixed normalization points.
inline Tape::Id loss_normal_node(Tape& g, Tape::Id u_pts, int p_norm, double c_norm) {
  Tape::Id level = p_norm == 2 ? g.mean(g.square(u_pts)) : g.mean(g.abs(u_pts));
  return g.square(g.add_const(level, -c_norm));
}

// alpha_eig * (lambda_now - lambda_lagged)^2; zero during the warm-up.
inline double loss_eig_stabilization(const std::vector<double>& lambda_history,
                                     int64_t epoch, double alpha_eig, int64_t lag = 100) {
  if (epoch < lag) return 0.0;
  const double d = lambda_history[size_t(epoch)] - lambda_history[size_t(epoch - lag)];
  return alpha_eig * d * d;
}

// Loss_mart + alpha_fk Loss_fk + alpha_bdry Loss_bdry (absent terms pass -1).
inline Tape::Id total_loss_bvp_node(Tape& g, Tape::Id mart, Tape::Id bdry, Tape::Id fk,
                                    const LossWeights& w) {
  Tape::Id total = mart;
  if (fk >= 0 && w.alpha_fk != 0.0) total = g.add(total, g.scale(fk, w.alpha_fk));
  if (bdry >= 0 && w.alpha_bdry != 0.0) total = g.add(total, g.scale(bdry, w.alpha_bdry));
  return total;
}

// Plain form: Loss_mart + alpha_bdry Loss_bdry + alpha_normal Loss_normal (+ stab).
// Fractional form: (Loss_mart^p + alpha_normal Loss_normal^q)^r with the bases
// floored at 1e-12, plus any boundary/stabilization terms.
inline Tape::Id total_loss_eig_node(Tape& g, Tape::Id mart, Tape::Id bdry, Tape::Id normal,
                                    Tape::Id stab, const LossWeights& w) {
  constexpr double kFloor = 1e-12;
  Tape::Id total;
  if (w.fractional) {
    Tape::Id inner = g.pow_scalar(mart, w.p, kFloor);
    if (normal >= 0 && w.alpha_normal != 0.0)
      inner = g.add(inner, g.scale(g.pow_scalar(normal, w.q, kFloor), w.alpha_normal));
    total = g.pow_scalar(inner, w.r, kFloor);
  } else {
    total = mart;
    if (normal >= 0 && w.alpha_normal != 0.0)
      total = g.add(total, g.scale(normal, w.alpha_normal));
  }
  if (bdry >= 0 && w.alpha_bdry != 0.0) total = g.add(total, g.scale(bdry, w.alpha_bdry));
  if (stab >= 0) total = g.add(total, stab);
  return total;
}

}  // namespace martnet
