#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "martnet/tensor.hpp"

namespace martnet {

// Reverse-mode autodiff over a define-by-run tape. The tape is rebuilt every
// epoch; creation order is the topological order. Forward values are computed
// eagerly at node creation.
//
// Primitive set: matmul, add (incl. row-broadcast bias), subtract, elementwise
// multiply (incl. scalar-node broadcast), scalar power, sum, mean, square,
// tanh, tanh-approximated GELU, relu^p, absolute value, plus a sparse linear
// combination (seg_combine) used to assemble per-time-index path sums.
class Tape {
 public:
  using Id = int32_t;

  enum class Op : uint8_t {
    Leaf, MatmulNT, AddRowVec, Add, Sub, Mul, MulScalar, Scale, AddConst,
    PowScalar, Sum, Mean, Square, Tanh, GeluTanh, ReluPow, Abs, SegCombine,
  };

  // y[row[t]] += w[t] * x[col[t]]
  struct Triplets {
    int64_t n_out = 0;
    std::vector<int32_t> row;
    std::vector<int32_t> col;
    std::vector<double> w;
    void push(int32_t r, int32_t c, double weight) {
      row.push_back(r);
      col.push_back(c);
      w.push_back(weight);
    }
  };

  Id constant(Tensor t) { return emplace(Op::Leaf, -1, -1, std::move(t), false); }
  Id scalar(double x) { return constant(Tensor::scalar(x)); }

  Id param(const Tensor& t) {
    Id id = emplace(Op::Leaf, -1, -1, t, true);
    params_.push_back(id);
    return id;
  }

  // A[m x k] * B[n x k]^T -> [m x n]
  Id matmul_nt(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.cols == B.cols, "matmul: inner dimensions disagree");
    Tensor out(A.rows, B.rows);
    martnet::matmul_nt(A.data(), A.rows, A.cols, B.data(), B.rows, out.data());
    return emplace(Op::MatmulNT, a, b, std::move(out));
  }

  Id add_rowvec(Id a, Id bias) {
    const Tensor& A = val(a);
    const Tensor& B = val(bias);
    require(B.cols == 1 && B.rows == A.cols, "add_rowvec: bias must be [cols x 1]");
    Tensor out = A;
    const double* b = B.data();
    ewise(out, [&](int64_t i, double x) { return x + b[i % out.cols]; });
    return emplace(Op::AddRowVec, a, bias, std::move(out));
  }

  Id add(Id a, Id b) { return binary(Op::Add, a, b, [](double x, double y) { return x + y; }); }
  Id sub(Id a, Id b) { return binary(Op::Sub, a, b, [](double x, double y) { return x - y; }); }
  Id mul(Id a, Id b) { return binary(Op::Mul, a, b, [](double x, double y) { return x * y; }); }

  // s[1x1] * A, with gradient into both factors.
  Id mul_scalar(Id s, Id a) {
    require(val(s).size() == 1, "mul_scalar: first operand must be a scalar node");
    const double sv = val(s).v[0];
    Tensor out = val(a);
    ewise(out, [&](int64_t, double x) { return sv * x; });
    return emplace(Op::MulScalar, s, a, std::move(out));
  }

  Id scale(Id a, double c) {
    Tensor out = val(a);
    ewise(out, [&](int64_t, double x) { return c * x; });
    Id id = emplace(Op::Scale, a, -1, std::move(out));
    nodes_[id].c0 = c;
    return id;
  }

  Id add_const(Id a, double c) {
    Tensor out = val(a);
    ewise(out, [&](int64_t, double x) { return x + c; });
    return emplace(Op::AddConst, a, -1, std::move(out));
  }

  // pow(max(x, floor), p). A positive floor keeps fractional powers away from
  // zero bases; callers pass floor = 0 when the base is strictly positive.
  Id pow_scalar(Id a, double p, double floor = 0.0) {
    Tensor out = val(a);
    ewise(out, [&](int64_t, double x) { return std::pow(std::max(x, floor), p); });
    Id id = emplace(Op::PowScalar, a, -1, std::move(out));
    nodes_[id].c0 = p;
    nodes_[id].c1 = floor;
    return id;
  }

  Id sum(Id a) {
    double s = 0.0;
    for (double x : val(a).v) s += x;
    return emplace(Op::Sum, a, -1, Tensor::scalar(s));
  }

  Id mean(Id a) {
    double s = 0.0;
    for (double x : val(a).v) s += x;
    return emplace(Op::Mean, a, -1, Tensor::scalar(s / double(val(a).size())));
  }

  Id square(Id a) { return unary(Op::Square, a, [](double x) { return x * x; }); }
  Id tanh(Id a) { return unary(Op::Tanh, a, [](double x) { return std::tanh(x); }); }
  Id abs(Id a) { return unary(Op::Abs, a, [](double x) { return std::fabs(x); }); }

  Id gelu_tanh(Id a) {
    return unary(Op::GeluTanh, a, [](double x) { return gelu_tanh_fwd(x); });
  }

  Id relu_pow(Id a, int p) {
    require(p >= 1, "relu_pow: exponent must be a positive integer");
    Id id = unary(Op::ReluPow, a, [&](double x) {
      return x > 0.0 ? std::pow(x, double(p)) : 0.0;
    });
    nodes_[id].c0 = double(p);
    return id;
  }

  Id seg_combine(Id a, Triplets trip) {
    const Tensor& A = val(a);
    require(A.cols == 1, "seg_combine: input must be a column vector");
    Tensor out(trip.n_out, 1);
    const size_t nnz = trip.w.size();
    for (size_t t = 0; t < nnz; ++t)
      out.v[size_t(trip.row[t])] += trip.w[t] * A.v[size_t(trip.col[t])];
    Id id = emplace(Op::SegCombine, a, -1, std::move(out));
    nodes_[id].trip = int32_t(triplets_.size());
    triplets_.push_back(std::move(trip));
    return id;
  }

  const Tensor& val(Id id) const { return nodes_[size_t(id)].val; }
  const Tensor& grad(Id id) const { return grads_[size_t(id)]; }
  const std::vector<Id>& params() const { return params_; }
  size_t n_nodes() const { return nodes_.size(); }

  // Backpropagate from a scalar node through the recorded computation.
  void backward(Id root) {
    require(val(root).size() == 1, "backward: root must be a scalar");
    grads_.assign(nodes_.size(), Tensor{});
    ensure_grad(root).v[0] = 1.0;
    for (Id id = root; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (grads_[size_t(id)].v.empty() || n.op == Op::Leaf) continue;
      step_back(id, n);
    }
  }

  static double gelu_tanh_fwd(double x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double a = 0.044715;
    return 0.5 * x * (1.0 + std::tanh(c * (x + a * x * x * x)));
  }
  static double gelu_tanh_deriv(double x) {
    constexpr double c = 0.7978845608028654;
    constexpr double a = 0.044715;
    const double t = std::tanh(c * (x + a * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * a * x * x);
  }

 private:
  struct Node {
    Op op;
    Id a = -1, b = -1;
    Tensor val;
    double c0 = 0.0, c1 = 0.0;
    int32_t trip = -1;
    bool needs_grad = false;
  };

  Id emplace(Op op, Id a, Id b, Tensor val, bool needs_grad_leaf = false) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = std::move(val);
    n.needs_grad = needs_grad_leaf || (a >= 0 && nodes_[size_t(a)].needs_grad) ||
                   (b >= 0 && nodes_[size_t(b)].needs_grad);
    nodes_.push_back(std::move(n));
    return Id(nodes_.size() - 1);
  }

  template <class F>
  Id unary(Op op, Id a, F f) {
    Tensor out = val(a);
    ewise(out, [&](int64_t, double x) { return f(x); });
    return emplace(op, a, -1, std::move(out));
  }

  template <class F>
  Id binary(Op op, Id a, Id b, F f) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.same_shape(B), "elementwise op: shapes disagree");
    Tensor out = A;
    const double* y = B.data();
    ewise(out, [&](int64_t i, double x) { return f(x, y[i]); });
    return emplace(op, a, b, std::move(out));
  }

  template <class F>
  static void ewise(Tensor& t, F f) {
    const int64_t n = t.size();
    double* d = t.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 16384)
#endif
    for (int64_t i = 0; i < n; ++i) d[i] = f(i, d[i]);
  }

  Tensor& ensure_grad(Id id) {
    Tensor& g = grads_[size_t(id)];
    if (g.v.empty()) {
      const Tensor& v = val(id);
      g = Tensor(v.rows, v.cols);
    }
    return g;
  }

  bool wants(Id id) const { return id >= 0 && nodes_[size_t(id)].needs_grad; }

  void step_back(Id id, Node& n) {
    const Tensor& g = grads_[size_t(id)];
    switch (n.op) {
      case Op::MatmulNT: {
        // C = A * B^T
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (wants(n.a))
          matmul_nn(g.data(), g.rows, g.cols, B.data(), B.cols, scratch_, ensure_grad(n.a));
        if (wants(n.b)) matmul_tn_acc(g.data(), g.rows, g.cols, A.data(), A.cols,
                                      ensure_grad(n.b).data());
        break;
      }
      case Op::AddRowVec: {
        if (wants(n.a)) acc(ensure_grad(n.a), g);
        if (wants(n.b)) colsum_acc(g.data(), g.rows, g.cols, ensure_grad(n.b).data());
        break;
      }
      case Op::Add: {
        if (wants(n.a)) acc(ensure_grad(n.a), g);
        if (wants(n.b)) acc(ensure_grad(n.b), g);
        break;
      }
      case Op::Sub: {
        if (wants(n.a)) acc(ensure_grad(n.a), g);
        if (wants(n.b)) acc_scaled(ensure_grad(n.b), g, -1.0);
        break;
      }
      case Op::Mul: {
        if (wants(n.a)) acc_mul(ensure_grad(n.a), g, val(n.b));
        if (wants(n.b)) acc_mul(ensure_grad(n.b), g, val(n.a));
        break;
      }
      case Op::MulScalar: {
        const double s = val(n.a).v[0];
        if (wants(n.b)) acc_scaled(ensure_grad(n.b), g, s);
        if (wants(n.a)) {
          const Tensor& x = val(n.b);
          double dot = 0.0;
          for (int64_t i = 0; i < g.size(); ++i) dot += g.v[size_t(i)] * x.v[size_t(i)];
          ensure_grad(n.a).v[0] += dot;
        }
        break;
      }
      case Op::Scale:
        if (wants(n.a)) acc_scaled(ensure_grad(n.a), g, n.c0);
        break;
      case Op::AddConst:
        if (wants(n.a)) acc(ensure_grad(n.a), g);
        break;
      case Op::PowScalar: {
        if (!wants(n.a)) break;
        const Tensor& x = val(n.a);
        Tensor& gx = ensure_grad(n.a);
        const double p = n.c0, floor = n.c1;
        for (int64_t i = 0; i < x.size(); ++i) {
          const double xv = x.v[size_t(i)];
          if (xv < floor) continue;  // clamped region is flat
          gx.v[size_t(i)] += g.v[size_t(i)] * p * std::pow(xv, p - 1.0);
        }
        break;
      }
      case Op::Sum: {
        if (!wants(n.a)) break;
        Tensor& gx = ensure_grad(n.a);
        const double gv = g.v[0];
        for (double& x : gx.v) x += gv;
        break;
      }
      case Op::Mean: {
        if (!wants(n.a)) break;
        Tensor& gx = ensure_grad(n.a);
        const double gv = g.v[0] / double(gx.size());
        for (double& x : gx.v) x += gv;
        break;
      }
      case Op::Square: {
        if (!wants(n.a)) break;
        acc_with(ensure_grad(n.a), g, val(n.a), [](double x) { return 2.0 * x; });
        break;
      }
      case Op::Tanh: {
        if (!wants(n.a)) break;
        acc_with(ensure_grad(n.a), g, n.val, [](double y) { return 1.0 - y * y; });
        break;
      }
      case Op::GeluTanh: {
        if (!wants(n.a)) break;
        acc_with(ensure_grad(n.a), g, val(n.a), [](double x) { return gelu_tanh_deriv(x); });
        break;
      }
      case Op::ReluPow: {
        if (!wants(n.a)) break;
        const double p = n.c0;
        acc_with(ensure_grad(n.a), g, val(n.a), [p](double x) {
          return x > 0.0 ? p * std::pow(x, p - 1.0) : 0.0;
        });
        break;
      }
      case Op::Abs: {
        if (!wants(n.a)) break;
        acc_with(ensure_grad(n.a), g, val(n.a), [](double x) {
          return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        });
        break;
      }
      case Op::SegCombine: {
        if (!wants(n.a)) break;
        const Triplets& tr = triplets_[size_t(n.trip)];
        Tensor& gx = ensure_grad(n.a);
        const size_t nnz = tr.w.size();
        for (size_t t = 0; t < nnz; ++t)
          gx.v[size_t(tr.col[t])] += tr.w[t] * g.v[size_t(tr.row[t])];
        break;
      }
      case Op::Leaf:
        break;
    }
  }

  // dX += dC * W for MatmulNT backward; scratch avoids aliasing the += target.
  static void matmul_nn(const double* dC, int64_t m, int64_t n, const double* W,
                        int64_t k, std::vector<double>& scratch, Tensor& dst) {
    scratch.assign(size_t(m * k), 0.0);
    martnet::matmul_nn(dC, m, n, W, k, scratch.data());
    double* d = dst.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k > 16384)
#endif
    for (int64_t i = 0; i < m * k; ++i) d[i] += scratch[size_t(i)];
  }

  static void acc(Tensor& dst, const Tensor& src) {
    double* d = dst.data();
    const double* s = src.data();
    const int64_t n = dst.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 16384)
#endif
    for (int64_t i = 0; i < n; ++i) d[i] += s[i];
  }

  static void acc_scaled(Tensor& dst, const Tensor& src, double c) {
    double* d = dst.data();
    const double* s = src.data();
    const int64_t n = dst.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 16384)
#endif
    for (int64_t i = 0; i < n; ++i) d[i] += c * s[i];
  }

  static void acc_mul(Tensor& dst, const Tensor& g, const Tensor& other) {
    double* d = dst.data();
    const double* gs = g.data();
    const double* o = other.data();
    const int64_t n = dst.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 16384)
#endif
    for (int64_t i = 0; i < n; ++i) d[i] += gs[i] * o[i];
  }

  template <class F>
  static void acc_with(Tensor& dst, const Tensor& g, const Tensor& x, F deriv) {
    double* d = dst.data();
    const double* gs = g.data();
    const double* xs = x.data();
    const int64_t n = dst.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n > 16384)
#endif
    for (int64_t i = 0; i < n; ++i) d[i] += gs[i] * deriv(xs[i]);
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<Triplets> triplets_;
  std::vector<Id> params_;
  std::vector<double> scratch_;
};

}  // namespace martnet
