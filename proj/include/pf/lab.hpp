#pragma once

#include "pf/core.hpp"
#include "pf/nnet.hpp"
#include "pf/pinn.hpp"

#include <span>
#include <vector>

namespace pf {

// ---------------------------------------------------------------------------
// Gaussian-derivative kernels

/// exp(-r^2 / 2h^2) / (sqrt(2 pi) h)
double gaussian_kernel(double r, double h);

struct DerivativeKernels {
  double w1 = 0;  // -(r/h^2) g_h(r)
  double w2 = 0;  // ((r^2 - h^2)/h^4) g_h(r)
};

DerivativeKernels derivative_kernels(double r, double h);

/// Kernels are truncated at |r| <= kKernelReach * h.
inline constexpr double kKernelReach = 8.0;

/// Smoothing width h and a frozen advecting field on a uniform periodic grid
/// of n nodes (see periodic_grid).
struct KernelSpec {
  double h = 0;
  Index n = 0;
  double nu = 0.01 / kPi;
  Vector u_field;  // empty means zero
  Interval domain{0.0, 1.0};

  double dx() const { return domain.length() / static_cast<double>(n); }
};

/// Row i holds dx * K(x_i, x_i - x_j) summed over periodic images, where
/// K(x, r) = -u(x) W1(r) + nu W2(r). Kernels act by convolution,
/// (M f)_i ~ integral K(x_i, r) f(x_i - r) dr, which turns W1 into d/dx and
/// W2 into d^2/dx^2 on smooth fields.
Matrix burgers_kernel_matrix(const KernelSpec& spec);

/// Quadrature matrices of W1 and W2 alone on the same periodic grid.
Matrix first_derivative_matrix(Index n, double h, Interval domain = {0.0, 1.0});
Matrix second_derivative_matrix(Index n, double h, Interval domain = {0.0, 1.0});

// ---------------------------------------------------------------------------
// Relaxation dynamics

struct RelaxationState {
  Vector z;
  double omega = 1.0;  // in (0, 1]
  Vector bias;         // empty means zero
  Activation f = Activation::Identity;
};

/// z' = (1 - omega) z + omega f(W z - b). The attractor f(W z - b) is built
/// with the same code path as one network layer.
Vector relaxation_step(const RelaxationState& state, const Matrix& w);

struct RelaxationRun {
  double dt = 1e-4;
  Index steps = 0;
  double omega = 1.0;
  Activation f = Activation::Identity;
  bool normalize = false;  // rescale to the initial norm after every step
};

/// Iterates relaxation_step with W = I + dt K, K = burgers_kernel_matrix(spec),
/// and zero bias; returns z_0 .. z_steps. With f = identity and omega = 1 each
/// step is explicit Euler for f_t = -u f_x + nu f_xx.
std::vector<Vector> simulate_relaxation(const KernelSpec& spec, const Vector& z0, const RelaxationRun& run);

// ---------------------------------------------------------------------------
// Path counting and Boltzmann composition

/// log10 of N^L.
double path_count_log10(double n, double l);

/// Weight count N^2 L of L square N x N layers.
double weight_count(double n, double l);

struct PathComposition {
  std::vector<Matrix> hops;  // row-stochastic e^{-beta S} / Z per source node
  Matrix total;              // hops[0] * hops[1] * ... * hops[L-1]
};

/// Temperature is folded into beta.
PathComposition boltzmann_path_composition(std::span<const Matrix> actions, double beta);

struct ContrastStats {
  Index layer = 0;
  double negative_fraction = 0;
  double row_sum_mean = 0;
  double row_sum_rms_deviation = 0;  // sqrt(mean((row sum - 1)^2)), zero for a stochastic matrix
};

ContrastStats matrix_contrast(const Matrix& w);

/// matrix_contrast for each square hidden layer.
std::vector<ContrastStats> transformer_vs_boltzmann_contrast(const NetworkParams& params);

}  // namespace pf
