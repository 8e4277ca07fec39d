#pragma once
// Test-only oracles: a straight-line long-double evaluator of the network
// chain and finite-difference derivatives built on it. Deliberately shares
// no code with the production evaluation path.

#include "pf/nnet.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace pf::testing {

inline long double ref_act(Activation a, long double v) {
  switch (a) {
    case Activation::Tanh: return std::tanh(v);
    case Activation::Relu: return v > 0 ? v : 0;
    case Activation::Identity: return v;
  }
  return v;
}

inline std::vector<long double> ref_forward(const NetworkParams& p, std::vector<long double> z) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& W = p.layers[l].weights;
    const auto& b = p.layers[l].bias;
    std::vector<long double> next(static_cast<std::size_t>(W.rows()));
    for (Index i = 0; i < W.rows(); ++i) {
      long double acc = 0;
      for (Index j = 0; j < W.cols(); ++j) acc += static_cast<long double>(W(i, j)) * z[static_cast<std::size_t>(j)];
      acc -= b(i);
      next[static_cast<std::size_t>(i)] = ref_act(p.activation_of(l), acc);
    }
    z = std::move(next);
  }
  return z;
}

inline long double ref_u(const NetworkParams& p, long double x, long double t) {
  return ref_forward(p, {x, t})[0];
}

/// Central finite differences, step h.
inline DualTriple fd_derivatives(const NetworkParams& p, double x, double t, double h = 1e-4) {
  const long double u0 = ref_u(p, x, t);
  const long double up = ref_u(p, x + h, t), um = ref_u(p, x - h, t);
  const long double tp = ref_u(p, x, t + h), tm = ref_u(p, x, t - h);
  DualTriple d;
  d.value = static_cast<double>(u0);
  d.d_dx = static_cast<double>((up - um) / (2.0L * h));
  d.d_dt = static_cast<double>((tp - tm) / (2.0L * h));
  d.d2_dx2 = static_cast<double>((up - 2.0L * u0 + um) / (static_cast<long double>(h) * h));
  return d;
}

inline bool close_rel(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), abs_floor);
}

/// Random tanh network with normal weights and biases.
inline NetworkParams random_net(const std::vector<Index>& widths, std::uint64_t seed,
                                double bias_scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  NetworkParams p;
  p.activation = Activation::Tanh;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1])};
    const double s = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = 1.5 * s * normal(rng);
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = bias_scale * normal(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

}  // namespace pf::testing
