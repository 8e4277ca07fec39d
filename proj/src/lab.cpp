#include "pf/lab.hpp"

#include "pf/forensics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pf {
namespace {

void check_width(double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Configuration, "kernel width h must be positive");
}

// Kernel sums over all periodic images of offset d, for d = 0..n-1.
struct OffsetSums {
  Vector w1, w2;
};

OffsetSums offset_sums(Index n, double h, Interval domain) {
  if (n < 2) throw Error(ErrorKind::Configuration, "kernel grid needs at least two nodes");
  check_width(h);
  const double length = domain.length();
  const double dx = length / static_cast<double>(n);
  if (h < 2.0 * dx * (1.0 - 1e-12)) {
    std::ostringstream msg;
    msg << "kernel width h=" << h << " is below 2 dx=" << 2.0 * dx << "; refine the grid or widen h";
    throw Error(ErrorKind::UnderResolved, msg.str());
  }
  const double reach = kKernelReach * h;
  OffsetSums s{Vector::Zero(n), Vector::Zero(n)};
  for (Index d = 0; d < n; ++d) {
    const double r0 = static_cast<double>(d) * dx;
    const auto m_lo = static_cast<long>(std::ceil((-reach - r0) / length));
    const auto m_hi = static_cast<long>(std::floor((reach - r0) / length));
    for (long m = m_lo; m <= m_hi; ++m) {
      const DerivativeKernels k = derivative_kernels(r0 + static_cast<double>(m) * length, h);
      s.w1(d) += k.w1;
      s.w2(d) += k.w2;
    }
  }
  return s;
}

Matrix circulant(const Vector& by_offset, double scale) {
  const Index n = by_offset.size();
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = scale * by_offset((i - j + n) % n);
  return m;
}

}  // namespace

double gaussian_kernel(double r, double h) {
  check_width(h);
  return std::exp(-r * r / (2.0 * h * h)) / (std::sqrt(2.0 * kPi) * h);
}

DerivativeKernels derivative_kernels(double r, double h) {
  const double g = gaussian_kernel(r, h);
  const double h2 = h * h;
  return {-(r / h2) * g, ((r * r - h2) / (h2 * h2)) * g};
}

Matrix burgers_kernel_matrix(const KernelSpec& spec) {
  if (spec.u_field.size() != 0 && spec.u_field.size() != spec.n)
    throw Error(ErrorKind::ShapeMismatch, "u_field length must match the kernel grid");
  const OffsetSums s = offset_sums(spec.n, spec.h, spec.domain);
  const double dx = spec.dx();
  Matrix m = circulant(s.w2, dx * spec.nu);
  if (spec.u_field.size() != 0) m -= spec.u_field.asDiagonal() * circulant(s.w1, dx);
  return m;
}

Matrix first_derivative_matrix(Index n, double h, Interval domain) {
  return circulant(offset_sums(n, h, domain).w1, domain.length() / static_cast<double>(n));
}

Matrix second_derivative_matrix(Index n, double h, Interval domain) {
  return circulant(offset_sums(n, h, domain).w2, domain.length() / static_cast<double>(n));
}

Vector relaxation_step(const RelaxationState& state, const Matrix& w) {
  if (!(state.omega > 0.0 && state.omega <= 1.0))
    throw Error(ErrorKind::Configuration, "relaxation omega must lie in (0, 1]");
  if (w.cols() != state.z.size() || w.rows() != state.z.size())
    throw Error(ErrorKind::ShapeMismatch, "relaxation matrix must be square and match z");
  if (state.bias.size() != 0 && state.bias.size() != state.z.size())
    throw Error(ErrorKind::ShapeMismatch, "relaxation bias must match z");
  const Layer layer{w, state.bias.size() != 0 ? state.bias : Vector::Zero(state.z.size())};
  Vector attractor = affine(layer, state.z);
  activate_inplace(state.f, attractor);
  return (1.0 - state.omega) * state.z + state.omega * attractor;
}

std::vector<Vector> simulate_relaxation(const KernelSpec& spec, const Vector& z0, const RelaxationRun& run) {
  if (z0.size() != spec.n) throw Error(ErrorKind::ShapeMismatch, "initial field length must match the kernel grid");
  if (run.steps < 0 || !(run.dt > 0.0)) throw Error(ErrorKind::Configuration, "relaxation needs dt > 0 and steps >= 0");
  const Matrix w = Matrix::Identity(spec.n, spec.n) + run.dt * burgers_kernel_matrix(spec);
  const double norm0 = z0.norm();

  std::vector<Vector> trajectory;
  trajectory.reserve(static_cast<std::size_t>(run.steps + 1));
  trajectory.push_back(z0);
  RelaxationState state{z0, run.omega, Vector(), run.f};
  for (Index s = 0; s < run.steps; ++s) {
    state.z = relaxation_step(state, w);
    if (run.normalize && norm0 > 0.0) state.z = normalize_layer(state.z, norm0);
    const double norm = state.z.norm();
    const bool grew = norm0 > 0.0 ? norm > 10.0 * norm0 : norm > 0.0;
    if (!std::isfinite(norm) || grew) {
      std::ostringstream msg;
      msg << "relaxation norm grew from " << norm0 << " to " << norm << " at step " << s + 1 << "; reduce dt";
      throw Error(ErrorKind::Instability, msg.str());
    }
    trajectory.push_back(state.z);
  }
  return trajectory;
}

double path_count_log10(double n, double l) {
  if (n < 1.0 || l < 0.0) throw Error(ErrorKind::Configuration, "path count needs N >= 1 and L >= 0");
  return l * std::log10(n);
}

double weight_count(double n, double l) { return n * n * l; }

PathComposition boltzmann_path_composition(std::span<const Matrix> actions, double beta) {
  if (actions.empty()) throw Error(ErrorKind::Configuration, "path composition needs at least one layer");
  if (!(beta >= 0.0)) throw Error(ErrorKind::Configuration, "beta must be non-negative");
  const Index n = actions.front().rows();
  PathComposition out;
  for (const Matrix& s : actions) {
    if (s.rows() != n || s.cols() != n) throw Error(ErrorKind::ShapeMismatch, "action layers must be square and conformable");
    Matrix p(n, n);
    for (Index i = 0; i < n; ++i) {
      // Shift by the row minimum so the largest factor is exactly 1.
      const double smin = s.row(i).minCoeff();
      p.row(i) = (-beta * (s.row(i).array() - smin)).exp();
      p.row(i) /= p.row(i).sum();
    }
    out.hops.push_back(std::move(p));
  }
  out.total = out.hops.front();
  for (std::size_t l = 1; l < out.hops.size(); ++l) out.total = out.total * out.hops[l];
  return out;
}

ContrastStats matrix_contrast(const Matrix& w) {
  ContrastStats c;
  c.negative_fraction = static_cast<double>((w.array() < 0.0).count()) / static_cast<double>(w.size());
  const Vector sums = w.rowwise().sum();
  c.row_sum_mean = sums.mean();
  c.row_sum_rms_deviation = std::sqrt((sums.array() - 1.0).square().mean());
  return c;
}

std::vector<ContrastStats> transformer_vs_boltzmann_contrast(const NetworkParams& params) {
  std::vector<ContrastStats> out;
  for (Index l : square_hidden_layers(params)) {
    ContrastStats c = matrix_contrast(params.layers[static_cast<std::size_t>(l)].weights);
    c.layer = l;
    out.push_back(c);
  }
  return out;
}

}  // namespace pf
