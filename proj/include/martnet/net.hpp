#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "martnet/binio.hpp"
#include "martnet/rng.hpp"
#include "martnet/tape.hpp"

namespace martnet {

enum class Activation : uint8_t { Tanh = 0, GeluTanh = 1, ReluPow = 2 };

struct ActTag {
  Activation kind = Activation::Tanh;
  int power = 1;  // ReluPow only

  bool operator==(const ActTag&) const = default;
};

// Value and derivative of one activation at a scalar point.
struct ActEval {
  double value;
  double deriv;
};

inline ActEval activation_eval(ActTag tag, double x) {
  switch (tag.kind) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return {t, 1.0 - t * t};
    }
    case Activation::GeluTanh:
      return {Tape::gelu_tanh_fwd(x), Tape::gelu_tanh_deriv(x)};
    case Activation::ReluPow: {
      const double p = double(tag.power);
      if (x <= 0.0) return {0.0, 0.0};
      return {std::pow(x, p), p * std::pow(x, p - 1.0)};
    }
  }
  return {0.0, 0.0};
}

inline std::string activation_name(ActTag tag) {
  switch (tag.kind) {
    case Activation::Tanh: return "tanh";
    case Activation::GeluTanh: return "gelu";
    case Activation::ReluPow: return "relu^" + std::to_string(tag.power);
  }
  return "?";
}

inline ActTag parse_activation(const std::string& s) {
  if (s == "tanh") return {Activation::Tanh, 1};
  if (s == "gelu") return {Activation::GeluTanh, 1};
  if (s.rfind("relu^", 0) == 0) {
    const int p = std::stoi(s.substr(5));
    require(p >= 1, "activation: relu power must be >= 1");
    return {Activation::ReluPow, p};
  }
  throw InvalidInput("activation: unknown tag '" + s + "'");
}

// Fully-connected network parameters. weights[l] is [sizes[l+1] x sizes[l]],
// biases[l] is [sizes[l+1] x 1]; one activation tag per hidden layer; the
// final layer is affine. Eigenvalue problems carry either a trainable scalar
// or (behind a config switch) a tiny relu^9 network evaluated at input 1.
struct MlpParams {
  std::vector<int64_t> layer_sizes;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  std::vector<ActTag> activations;
  std::optional<double> eigenvalue;
  std::shared_ptr<MlpParams> eigen_net;

  int64_t input_dim() const { return layer_sizes.front(); }
  int64_t n_layers() const { return int64_t(weights.size()); }
};

inline MlpParams make_mlp(std::vector<int64_t> sizes, std::vector<ActTag> acts,
                          uint64_t init_seed) {
  require(sizes.size() >= 2, "mlp: need at least input and output sizes");
  require(acts.size() + 2 == sizes.size(),
          "mlp: need one activation tag per hidden layer");
  MlpParams p;
  p.layer_sizes = std::move(sizes);
  p.activations = std::move(acts);
  for (size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    const int64_t fan_in = p.layer_sizes[l];
    const int64_t fan_out = p.layer_sizes[l + 1];
    Tensor W(fan_out, fan_in);
    // Glorot uniform; biases start at zero.
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    RandomStream rs(init_seed, StreamKind::Init, uint64_t(l));
    for (double& w : W.v) w = (2.0 * rs.uniform() - 1.0) * bound;
    p.weights.push_back(std::move(W));
    p.biases.emplace_back(fan_out, 1);
  }
  return p;
}

// Tape forward pass; returns the output node plus the parameter node ids in
// (weight, bias) per-layer order so gradients can be routed back.
struct MlpVars {
  Tape::Id out = -1;
  std::vector<Tape::Id> weight_ids;
  std::vector<Tape::Id> bias_ids;
};

inline Tape::Id apply_activation(Tape& g, Tape::Id h, ActTag tag) {
  switch (tag.kind) {
    case Activation::Tanh: return g.tanh(h);
    case Activation::GeluTanh: return g.gelu_tanh(h);
    case Activation::ReluPow: return g.relu_pow(h, tag.power);
  }
  return h;
}

inline MlpVars mlp_forward(Tape& g, const MlpParams& p, Tape::Id x,
                           const std::vector<Tape::Id>* reuse_params = nullptr) {
  require(g.val(x).cols == p.input_dim(), "mlp forward: input width mismatch");
  MlpVars vars;
  Tape::Id h = x;
  for (int64_t l = 0; l < p.n_layers(); ++l) {
    Tape::Id w, b;
    if (reuse_params) {
      w = (*reuse_params)[size_t(2 * l)];
      b = (*reuse_params)[size_t(2 * l + 1)];
    } else {
      w = g.param(p.weights[size_t(l)]);
      b = g.param(p.biases[size_t(l)]);
    }
    vars.weight_ids.push_back(w);
    vars.bias_ids.push_back(b);
    h = g.add_rowvec(g.matmul_nt(h, w), b);
    if (l + 1 < p.n_layers()) h = apply_activation(g, h, p.activations[size_t(l)]);
  }
  vars.out = h;
  return vars;
}

// Plain forward evaluation (no tape); Y gets one output row per input row.
inline void mlp_eval(const MlpParams& p, const Tensor& X, Tensor& Y) {
  require(X.cols == p.input_dim(), "mlp eval: input width mismatch");
  Tensor cur = X;
  for (int64_t l = 0; l < p.n_layers(); ++l) {
    const Tensor& W = p.weights[size_t(l)];
    const Tensor& B = p.biases[size_t(l)];
    Tensor next(cur.rows, W.rows);
    matmul_nt(cur.data(), cur.rows, cur.cols, W.data(), W.rows, next.data());
    const bool hidden = l + 1 < p.n_layers();
    const ActTag tag = hidden ? p.activations[size_t(l)] : ActTag{};
    for (int64_t i = 0; i < next.rows; ++i)
      for (int64_t j = 0; j < next.cols; ++j) {
        double v = next.at(i, j) + B.v[size_t(j)];
        if (hidden) v = activation_eval(tag, v).value;
        next.at(i, j) = v;
      }
    cur = std::move(next);
  }
  Y = std::move(cur);
}

inline double mlp_eval_scalar(const MlpParams& p, const std::vector<double>& x) {
  Tensor X(1, int64_t(x.size()), x);
  Tensor Y;
  mlp_eval(p, X, Y);
  return Y.v[0];
}

// Current eigenvalue: trainable scalar, or the eigen net evaluated at 1.
inline double lambda_value(const MlpParams& p) {
  if (p.eigen_net) return mlp_eval_scalar(*p.eigen_net, {1.0});
  require(p.eigenvalue.has_value(), "lambda_value: parameters carry no eigenvalue");
  return *p.eigenvalue;
}

// ---------------------------------------------------------------------------
// Checkpoint file. Byte layout (all integers little-endian, doubles IEEE-754
// little-endian, documented in README.md):
//   magic "MNCK" | u32 version=1 | u32 n_sizes | i64 sizes[] |
//   u32 n_act | (u8 kind, u32 power)[] | u8 eig_mode (0 none, 1 scalar, 2 net) |
//   [f64 eigenvalue if mode 1] | per layer: f64 W[out*in] row-major, f64 b[out] |
//   [nested record without magic/version if mode 2]
// ---------------------------------------------------------------------------
namespace detail {

inline void write_mlp_body(std::FILE* f, const MlpParams& p) {
  put<uint32_t>(f, uint32_t(p.layer_sizes.size()));
  for (int64_t s : p.layer_sizes) put<int64_t>(f, s);
  put<uint32_t>(f, uint32_t(p.activations.size()));
  for (const ActTag& a : p.activations) {
    put<uint8_t>(f, uint8_t(a.kind));
    put<uint32_t>(f, uint32_t(a.power));
  }
  const uint8_t mode = (p.eigenvalue ? 1 : 0) | (p.eigen_net ? 2 : 0);
  put<uint8_t>(f, mode);
  if (mode & 1) put<double>(f, *p.eigenvalue);
  for (size_t l = 0; l < p.weights.size(); ++l) {
    put_doubles(f, p.weights[l].v);
    put_doubles(f, p.biases[l].v);
  }
  if (mode & 2) write_mlp_body(f, *p.eigen_net);
}

inline MlpParams read_mlp_body(std::FILE* f) {
  MlpParams p;
  const uint32_t n_sizes = get<uint32_t>(f);
  for (uint32_t i = 0; i < n_sizes; ++i) p.layer_sizes.push_back(get<int64_t>(f));
  const uint32_t n_act = get<uint32_t>(f);
  for (uint32_t i = 0; i < n_act; ++i) {
    ActTag a;
    a.kind = Activation(get<uint8_t>(f));
    a.power = int(get<uint32_t>(f));
    p.activations.push_back(a);
  }
  const uint8_t mode = get<uint8_t>(f);
  if (mode & 1) p.eigenvalue = get<double>(f);
  for (size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    Tensor W(p.layer_sizes[l + 1], p.layer_sizes[l]);
    Tensor B(p.layer_sizes[l + 1], 1);
    get_doubles(f, W.v);
    get_doubles(f, B.v);
    p.weights.push_back(std::move(W));
    p.biases.push_back(std::move(B));
  }
  if (mode & 2) p.eigen_net = std::make_shared<MlpParams>(read_mlp_body(f));
  return p;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const MlpParams& p) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "checkpoint: cannot open for writing: " + path);
  std::fwrite("MNCK", 1, 4, f);
  detail::put<uint32_t>(f, 1);
  detail::write_mlp_body(f, p);
  std::fclose(f);
}

inline MlpParams load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "checkpoint: cannot open: " + path);
  char magic[4];
  require(std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "MNCK", 4) == 0,
          "checkpoint: bad magic");
  require(detail::get<uint32_t>(f) == 1, "checkpoint: unsupported version");
  MlpParams p = detail::read_mlp_body(f);
  std::fclose(f);
  return p;
}

}  // namespace martnet
