#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "martnet/common.hpp"

namespace martnet {

// Adamax moment state for one parameter tensor. u carries the running
// infinity norm of the gradients; it stays non-negative by construction.
struct AdamaxState {
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> u;
};

// theta <- theta - lr/(1 - beta1^step) * m / (u + eps), with
// m <- beta1 m + (1-beta1) g and u <- max(beta2 u, |g|).
inline void adamax_step(double* theta, const double* grad, int64_t n,
                        AdamaxState& st, double lr) {
  require(lr > 0.0, "adamax: learning rate must be positive");
  if (st.m.empty()) {
    st.m.assign(size_t(n), 0.0);
    st.u.assign(size_t(n), 0.0);
  }
  require(int64_t(st.m.size()) == n, "adamax: state size mismatch");
  st.step += 1;
  const double corr = 1.0 - std::pow(st.beta1, double(st.step));
  for (int64_t i = 0; i < n; ++i) {
    const double g = grad[i];
    if (!std::isfinite(g))
      throw TrainingDiverged("adamax: non-finite gradient at parameter index " +
                             std::to_string(i));
    st.m[size_t(i)] = st.beta1 * st.m[size_t(i)] + (1.0 - st.beta1) * g;
    st.u[size_t(i)] = std::max(st.beta2 * st.u[size_t(i)], std::fabs(g));
    const double denom = st.u[size_t(i)] + st.epsilon;
    if (denom == 0.0) continue;  // eps = 0 and no gradient seen yet
    theta[i] -= lr / corr * st.m[size_t(i)] / denom;
  }
}

// Stepped decay with optional extra one-off factors, e.g. an initial rate of
// 0.01 decayed by 0.99 every 100 epochs, or 1/150 halved every 500 epochs
// with two extra halvings late in the run.
struct LrSchedule {
  double initial = 1e-3;
  double decay_factor = 1.0;
  int64_t decay_every = 1;
  std::vector<std::pair<int64_t, double>> extra_factors;

  double at(int64_t epoch) const {
    require(epoch >= 0, "lr schedule: epoch must be non-negative");
    double lr = initial;
    if (decay_factor != 1.0 && decay_every > 0)
      lr *= std::pow(decay_factor, double(epoch / decay_every));
    for (const auto& [ep, f] : extra_factors)
      if (epoch >= ep) lr *= f;
    return lr;
  }
};

inline double lr_at(const LrSchedule& s, int64_t epoch) { return s.at(epoch); }

}  // namespace martnet
