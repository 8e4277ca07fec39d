#pragma once

#include "pf/core.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace pf {

enum class Activation { Tanh, Relu, Identity };

const char* to_string(Activation a);
Activation parse_activation(std::string_view name);

template <typename Scalar>
struct BasicLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;     // out
};

/// Dense feed-forward chain z_{l+1} = f(W_l z_l - b_l). The bias is
/// subtracted, so dumped biases carry the opposite sign of the additive
/// convention.
template <typename Scalar>
struct BasicNetwork {
  std::vector<BasicLayer<Scalar>> layers;
  Activation activation = Activation::Tanh;             // hidden layers
  Activation output_activation = Activation::Identity;  // last layer

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().weights.rows(); }
  Activation activation_of(std::size_t l) const {
    return l + 1 == layers.size() ? output_activation : activation;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
    return n;
  }
};

using Layer = BasicLayer<double>;
using NetworkParams = BasicNetwork<double>;

/// Throws ShapeMismatch / Overflow when the invariants of NetworkParams fail.
void validate(const NetworkParams& params);

/// Same-shaped network with every weight and bias set to zero.
NetworkParams zeros_like(const NetworkParams& params);

/// Zero-mean normal weights with variance 1/fan_in, zero biases.
NetworkParams init_network(std::span<const Index> widths, Activation hidden,
                           std::uint64_t seed);

/// In-place hyperbolic tangent over contiguous doubles, within 2 ulp of
/// std::tanh. A rational approximation covers |x| < 0.625 and
/// 1 - 2/(e^{2|x|} + 1) the rest; the loop vectorizes.
void tanh_inplace(double* values, Index count);

template <typename Derived>
void activate_inplace(Activation a, Eigen::PlainObjectBase<Derived>& z) {
  switch (a) {
    case Activation::Tanh:
      if constexpr (std::is_same_v<typename Derived::Scalar, double>)
        tanh_inplace(z.data(), z.size());
      else
        z = z.unaryExpr([](auto v) { using std::tanh; return tanh(v); });
      break;
    case Activation::Relu: z.derived().array() = z.derived().array().max(0); break;
    case Activation::Identity: break;
  }
}

/// W z - b, column by column. Shared by forward() and the relaxation map so
/// both produce identical bits.
template <typename Scalar, typename Derived>
MatrixX<Scalar> affine(const BasicLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& z) {
  MatrixX<Scalar> a = layer.weights * z;
  a.colwise() -= layer.bias;
  return a;
}

template <typename Scalar>
VectorX<Scalar> affine(const BasicLayer<Scalar>& layer, const VectorX<Scalar>& z) {
  VectorX<Scalar> a = layer.weights * z;
  a -= layer.bias;
  return a;
}

template <typename Scalar>
VectorX<Scalar> forward(const BasicNetwork<Scalar>& params, const VectorX<Scalar>& input) {
  VectorX<Scalar> z = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.weights.cols() != z.size() || layer.bias.size() != layer.weights.rows())
      throw Error(ErrorKind::ShapeMismatch,
                  "layer " + std::to_string(l) + " expects input of length " +
                      std::to_string(layer.weights.cols()) + ", got " + std::to_string(z.size()));
    z = affine(layer, z);
    activate_inplace(params.activation_of(l), z);
    if (!z.allFinite())
      throw Error(ErrorKind::Overflow, "non-finite activation at layer " + std::to_string(l));
  }
  return z;
}

/// Network output together with its first and second input derivatives,
/// for networks with input (x, t) and scalar output.
struct DualTriple {
  double value = 0;
  double d_dx = 0;
  double d_dt = 0;
  double d2_dx2 = 0;
};

/// Which slots are carried through a batched evaluation.
enum class Slots { Value, Derivatives };

/// Column-per-point values of a layer (or the output) and, when
/// Slots::Derivatives is carried, their x, t and xx derivatives. The slots
/// are stored side by side as column blocks [value | dx | dt | dxx] so that
/// one matrix product advances all of them.
struct SlotBatch {
  Matrix data;
  Index points = 0;

  SlotBatch() = default;
  SlotBatch(Index rows, Index points, Slots slots)
      : data(Matrix::Zero(rows, slots == Slots::Derivatives ? 4 * points : points)),
        points(points) {}

  bool has_derivatives() const { return data.cols() == 4 * points && points > 0; }
  auto value() { return data.leftCols(points); }
  auto value() const { return data.leftCols(points); }
  auto dx() { return data.middleCols(points, points); }
  auto dx() const { return data.middleCols(points, points); }
  auto dt() { return data.middleCols(2 * points, points); }
  auto dt() const { return data.middleCols(2 * points, points); }
  auto dxx() { return data.middleCols(3 * points, points); }
  auto dxx() const { return data.middleCols(3 * points, points); }
};

/// Recorded batched evaluation. Inputs are 2 x points (row 0 = x, row 1 = t)
/// when derivatives are carried; any width otherwise.
class Tape {
 public:
  Tape(const NetworkParams& params, const Matrix& inputs, Slots slots);

  const SlotBatch& output() const { return layers_.back().out; }
  Slots slots() const { return slots_; }
  Index points() const { return input_.points; }

  /// Reverse sweep. `adjoint` holds dE/d(output slot) and has the shape of
  /// output(). Gradients are added into `grad`, which must be shaped like
  /// the recorded params.
  void backpropagate(const SlotBatch& adjoint, NetworkParams& grad) const;

 private:
  struct Record {
    SlotBatch out;  // post-activation slots
    Matrix pre;     // pre-activation slots (non-identity layers only)
  };
  const NetworkParams* params_;
  Slots slots_;
  SlotBatch input_;
  std::vector<Record> layers_;
};

DualTriple derivatives(const NetworkParams& params, double x, double t);

/// One additive piece of a loss: a batch of input points plus a head that
/// maps the network's output slots to a scalar and writes the derivative of
/// that scalar with respect to each slot into `adjoint`.
struct LossTerm {
  Matrix inputs;
  Slots slots = Slots::Value;
  std::function<double(const SlotBatch& output, SlotBatch& adjoint)> head;
};

struct LossGradient {
  double value = 0;
  NetworkParams gradient;
};

double loss_value(const NetworkParams& params, std::span<const LossTerm> terms);

/// dE/dW_l and dE/db_l by reverse accumulation. Throws NonFiniteLoss before
/// any differentiation if E is not finite.
LossGradient loss_gradient(const NetworkParams& params, std::span<const LossTerm> terms);

/// Rescale z to the given L2 norm. Vectors already at the target norm (to
/// rounding) are returned unchanged, which makes the map idempotent.
Vector normalize_layer(const Vector& z, double target_norm);

}  // namespace pf
