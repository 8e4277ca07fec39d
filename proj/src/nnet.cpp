#include "pf/nnet.hpp"

#include <limits>
#include <random>

namespace pf {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw Error(ErrorKind::Configuration, "unknown activation '" + std::string(name) + "'");
}

void tanh_inplace(double* values, Index count) {
  thread_local std::vector<double> scratch;
  scratch.resize(static_cast<std::size_t>(count));
  double* __restrict v = values;
  double* __restrict e = scratch.data();
  Eigen::Map<Eigen::ArrayXd>(e, count) =
      (2.0 * Eigen::Map<const Eigen::ArrayXd>(v, count).abs().min(20.0)).exp();
  for (Index i = 0; i < count; ++i) {
    const double x = v[i];
    const double z = x * x;
    const double p = (-9.64399179425052238628e-1 * z - 9.92877231001918586564e1) * z -
                     1.61468768441708447952e3;
    const double q = ((z + 1.12811678491632931402e2) * z + 2.23548839060100448583e3) * z +
                     4.84406305325125486048e3;
    const double small = x + x * z * p / q;
    const double large = std::copysign(1.0 - 2.0 / (e[i] + 1.0), x);
    v[i] = std::fabs(x) < 0.625 ? small : large;
  }
}

void validate(const NetworkParams& params) {
  if (params.layers.empty()) throw Error(ErrorKind::ShapeMismatch, "network has no layers");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.bias.size() != layer.weights.rows())
      throw Error(ErrorKind::ShapeMismatch,
                  "layer " + std::to_string(l) + ": bias length " +
                      std::to_string(layer.bias.size()) + " != weight rows " +
                      std::to_string(layer.weights.rows()));
    if (l > 0 && layer.weights.cols() != params.layers[l - 1].weights.rows())
      throw Error(ErrorKind::ShapeMismatch,
                  "layer " + std::to_string(l) + ": input dimension " +
                      std::to_string(layer.weights.cols()) + " != previous output dimension " +
                      std::to_string(params.layers[l - 1].weights.rows()));
    if (!layer.weights.allFinite() || !layer.bias.allFinite())
      throw Error(ErrorKind::Overflow, "non-finite parameter in layer " + std::to_string(l));
  }
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams out;
  out.activation = params.activation;
  out.output_activation = params.output_activation;
  out.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers)
    out.layers.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                          Vector::Zero(layer.bias.size())});
  return out;
}

NetworkParams init_network(std::span<const Index> widths, Activation hidden, std::uint64_t seed) {
  if (widths.size() < 2) throw Error(ErrorKind::Configuration, "need at least input and output width");
  std::mt19937_64 rng(seed);
  NormalSampler<std::mt19937_64> normal;
  NetworkParams params;
  params.activation = hidden;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l];
    const Index fan_out = widths[l + 1];
    if (fan_in <= 0 || fan_out <= 0) throw Error(ErrorKind::Configuration, "layer widths must be positive");
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Index i = 0; i < fan_out; ++i)
      for (Index j = 0; j < fan_in; ++j) layer.weights(i, j) = scale * normal(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Tape::Tape(const NetworkParams& params, const Matrix& inputs, Slots slots)
    : params_(&params), slots_(slots) {
  if (params.layers.empty()) throw Error(ErrorKind::ShapeMismatch, "network has no layers");
  if (inputs.rows() != params.input_dim())
    throw Error(ErrorKind::ShapeMismatch,
                "layer 0 expects input of length " + std::to_string(params.input_dim()) + ", got " +
                    std::to_string(inputs.rows()));
  const Index n = inputs.cols();
  if (slots == Slots::Derivatives) {
    if (inputs.rows() != 2)
      throw Error(ErrorKind::ShapeMismatch, "input derivatives need a 2-dimensional (x, t) input");
    for (std::size_t l = 0; l < params.layers.size(); ++l)
      if (params.activation_of(l) == Activation::Relu)
        throw Error(ErrorKind::UnsupportedActivation,
                    "relu at layer " + std::to_string(l) + " has no second derivative");
  }

  input_ = SlotBatch(inputs.rows(), n, slots);
  input_.value() = inputs;
  if (slots == Slots::Derivatives) {
    input_.dx().row(0).setOnes();
    input_.dt().row(1).setOnes();
  }

  layers_.reserve(params.layers.size());
  const SlotBatch* in = &input_;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    if (layer.weights.cols() != in->data.rows() || layer.bias.size() != layer.weights.rows())
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l) + " does not chain");
    Record rec;
    Matrix pre = layer.weights * in->data;
    pre.leftCols(n).colwise() -= layer.bias;

    const Activation act = params.activation_of(l);
    if (act == Activation::Identity) {
      rec.out.data = std::move(pre);
      rec.out.points = n;
    } else if (act == Activation::Relu) {
      rec.out.points = n;
      rec.out.data = pre.array().max(0.0).matrix();
      rec.pre = std::move(pre);
    } else {
      rec.out = SlotBatch(pre.rows(), n, slots);
      rec.out.value() = pre.leftCols(n);
      tanh_inplace(rec.out.data.data(), rec.out.value().size());
      const auto y = rec.out.value().array();
      if (slots == Slots::Derivatives) {
        const Eigen::ArrayXXd f1 = 1.0 - y.square();
        const auto ax = pre.middleCols(n, n).array();
        rec.out.dx().array() = f1 * ax;
        rec.out.dt().array() = f1 * pre.middleCols(2 * n, n).array();
        rec.out.dxx().array() =
            f1 * (pre.middleCols(3 * n, n).array() - 2.0 * y * ax.square());
        rec.pre = std::move(pre);
      }
    }
    if (!rec.out.data.allFinite())
      throw Error(ErrorKind::Overflow, "non-finite activation at layer " + std::to_string(l));
    layers_.push_back(std::move(rec));
    in = &layers_.back().out;
  }
}

void Tape::backpropagate(const SlotBatch& adjoint, NetworkParams& grad) const {
  const NetworkParams& params = *params_;
  const Index n = input_.points;
  const bool derivs = slots_ == Slots::Derivatives;
  Matrix g = adjoint.data;
  Matrix abar;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Record& rec = layers_[li];
    const SlotBatch& in = li == 0 ? input_ : layers_[li - 1].out;
    const Activation act = params.activation_of(li);
    if (act == Activation::Identity) {
      abar = std::move(g);
    } else if (act == Activation::Relu) {
      abar = (rec.pre.array() > 0.0).select(g.array(), 0.0).matrix();
    } else {
      abar.resize(g.rows(), g.cols());
      const auto y = rec.out.value().array();
      const Eigen::ArrayXXd f1 = 1.0 - y.square();
      if (!derivs) {
        abar.array() = g.array() * f1;
      } else {
        const Eigen::ArrayXXd f2 = -2.0 * y * f1;
        const auto ax = rec.pre.middleCols(n, n).array();
        const auto at = rec.pre.middleCols(2 * n, n).array();
        const auto axx = rec.pre.middleCols(3 * n, n).array();
        const auto gv = g.leftCols(n).array();
        const auto gx = g.middleCols(n, n).array();
        const auto gt = g.middleCols(2 * n, n).array();
        const auto gxx = g.middleCols(3 * n, n).array();
        // tanh''' = tanh' (6 tanh^2 - 2)
        abar.leftCols(n).array() = gv * f1 + (gx * ax + gt * at + gxx * axx) * f2 +
                                   gxx * ax.square() * f1 * (6.0 * y.square() - 2.0);
        abar.middleCols(n, n).array() = gx * f1 + 2.0 * gxx * f2 * ax;
        abar.middleCols(2 * n, n).array() = gt * f1;
        abar.middleCols(3 * n, n).array() = gxx * f1;
      }
    }
    Layer& gl = grad.layers[li];
    gl.weights.noalias() += abar * in.data.transpose();
    gl.bias -= abar.leftCols(n).rowwise().sum();
    if (li > 0) g.noalias() = params.layers[li].weights.transpose() * abar;
  }
}

DualTriple derivatives(const NetworkParams& params, double x, double t) {
  if (params.output_dim() != 1)
    throw Error(ErrorKind::ShapeMismatch, "derivatives need a scalar-output network");
  Matrix input(2, 1);
  input << x, t;
  const Tape tape(params, input, Slots::Derivatives);
  const SlotBatch& out = tape.output();
  return {out.value()(0, 0), out.dx()(0, 0), out.dt()(0, 0), out.dxx()(0, 0)};
}

namespace {

double evaluate_terms(const NetworkParams& params, std::span<const LossTerm> terms,
                      std::vector<Tape>& tapes, std::vector<SlotBatch>& adjoints) {
  double total = 0.0;
  tapes.reserve(terms.size());
  adjoints.reserve(terms.size());
  for (const LossTerm& term : terms) {
    tapes.emplace_back(params, term.inputs, term.slots);
    const SlotBatch& out = tapes.back().output();
    SlotBatch adj;
    adj.points = out.points;
    adj.data = Matrix::Zero(out.data.rows(), out.data.cols());
    total += term.head(out, adj);
    adjoints.push_back(std::move(adj));
  }
  return total;
}

}  // namespace

double loss_value(const NetworkParams& params, std::span<const LossTerm> terms) {
  std::vector<Tape> tapes;
  std::vector<SlotBatch> adjoints;
  return evaluate_terms(params, terms, tapes, adjoints);
}

LossGradient loss_gradient(const NetworkParams& params, std::span<const LossTerm> terms) {
  validate(params);
  std::vector<Tape> tapes;
  std::vector<SlotBatch> adjoints;
  LossGradient result;
  result.value = evaluate_terms(params, terms, tapes, adjoints);
  if (!std::isfinite(result.value))
    throw Error(ErrorKind::NonFiniteLoss, "loss evaluated to a non-finite value");
  result.gradient = zeros_like(params);
  for (std::size_t i = 0; i < tapes.size(); ++i) tapes[i].backpropagate(adjoints[i], result.gradient);
  return result;
}

Vector normalize_layer(const Vector& z, double target_norm) {
  if (!(target_norm > 0.0) || !std::isfinite(target_norm))
    throw Error(ErrorKind::DegenerateInput, "target norm must be positive and finite");
  const double norm = z.norm();
  if (norm == 0.0) throw Error(ErrorKind::DegenerateInput, "cannot normalize the zero vector");
  if (!std::isfinite(norm)) throw Error(ErrorKind::Overflow, "vector norm is not finite");
  const double tol = 2.0 * static_cast<double>(z.size() + 4) * std::numeric_limits<double>::epsilon();
  if (std::abs(norm - target_norm) <= tol * target_norm) return z;
  return z * (target_norm / norm);
}

}  // namespace pf
