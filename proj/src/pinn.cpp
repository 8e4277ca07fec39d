#include "pf/pinn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace pf {

namespace {

constexpr std::uint64_t kCollocationStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kBatchStream = 0xBF58476D1CE4E5B9ULL;

Error config_error(const std::string& key, const std::string& why) {
  return Error(ErrorKind::Configuration, "invalid config key '" + key + "': " + why);
}

// Uniform in the open interval (0, 1).
template <typename Engine>
double open01(Engine& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

const char* to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "adam") return Optimizer::Adam;
  throw config_error("optimizer", "expected sgd or adam, got '" + std::string(name) + "'");
}

void PinnConfig::validate() const {
  if (hidden_layers < 1) throw config_error("hidden_layers", "must be >= 1");
  if (width < 1) throw config_error("width", "must be >= 1");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw config_error("nu", "must be > 0");
  if (!(x_domain.hi > x_domain.lo)) throw config_error("x_domain", "interval is degenerate");
  if (!(t_domain.hi > t_domain.lo)) throw config_error("t_domain", "interval is degenerate");
  if (n_interior <= 0) throw config_error("n_interior", "must be > 0");
  if (n_initial <= 0) throw config_error("n_initial", "must be > 0");
  if (n_boundary <= 0) throw config_error("n_boundary", "must be > 0");
  if (!(learning_rate > 0.0)) throw config_error("learning_rate", "must be > 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw config_error("lr_decay", "must be in (0, 1]");
  if (steps < 0) throw config_error("steps", "must be >= 0");
  if (batch_interior < 0) throw config_error("batch_interior", "must be >= 0");
  if (lambda_res < 0 || lambda_ic < 0 || lambda_bc < 0)
    throw config_error("loss_weights", "must be >= 0");
  if (log_every < 1) throw config_error("log_every", "must be >= 1");
}

std::vector<Index> PinnConfig::widths() const {
  std::vector<Index> w{2};
  for (int l = 0; l < hidden_layers; ++l) w.push_back(width);
  w.push_back(1);
  return w;
}

double PinnConfig::learning_rate_at(int step) const {
  if (lr_decay == 1.0 || steps <= 1) return learning_rate;
  return learning_rate * std::pow(lr_decay, static_cast<double>(step) / (steps - 1));
}

Collocation sample_collocation(const PinnConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const Interval xd = config.x_domain, td = config.t_domain;
  Collocation c;
  c.interior.resize(2, config.n_interior);
  for (Index k = 0; k < config.n_interior; ++k) {
    c.interior(0, k) = xd.lo + xd.length() * open01(rng);
    c.interior(1, k) = td.lo + td.length() * (1.0 - uniform01(rng));  // (t_lo, t_hi]
  }
  c.initial.resize(2, config.n_initial);
  for (Index k = 0; k < config.n_initial; ++k) {
    c.initial(0, k) = xd.lo + xd.length() * uniform01(rng);
    c.initial(1, k) = td.lo;
  }
  const Index nb = config.n_boundary;
  c.boundary.resize(2, 2 * nb);
  for (Index k = 0; k < nb; ++k) {
    const double t = td.lo + td.length() * (1.0 - uniform01(rng));
    c.boundary(0, k) = xd.lo;
    c.boundary(1, k) = t;
    c.boundary(0, nb + k) = xd.hi;
    c.boundary(1, nb + k) = t;
  }
  return c;
}

Collocation training_collocation(const PinnConfig& config) {
  return sample_collocation(config, config.seed ^ kCollocationStream);
}

double initial_condition(double x) { return std::sin(2.0 * kPi * x); }

double residual(const NetworkParams& params, double x, double t, double nu) {
  const DualTriple d = derivatives(params, x, t);
  return d.d_dt + d.value * d.d_dx - nu * d.d2_dx2;
}

std::vector<LossTerm> pinn_loss_terms(const PinnConfig& config, const Matrix& interior,
                                      const Matrix& initial, const Matrix& boundary,
                                      LossBreakdown* sink) {
  if (interior.cols() == 0 || initial.cols() == 0 || boundary.cols() == 0 ||
      boundary.cols() % 2 != 0)
    throw Error(ErrorKind::Configuration, "collocation sets must be non-empty");
  std::vector<LossTerm> terms(3);

  const double nu = config.nu;
  const double lres = config.lambda_res;
  terms[0].inputs = interior;
  terms[0].slots = Slots::Derivatives;
  terms[0].head = [nu, lres, sink](const SlotBatch& out, SlotBatch& adj) {
    const double n = static_cast<double>(out.points);
    const auto u = out.value().row(0).array();
    const auto ux = out.dx().row(0).array();
    const Eigen::ArrayXXd r =
        (out.dt().row(0).array() + u * ux - nu * out.dxx().row(0).array()).matrix();
    const double mean_sq = r.square().sum() / n;
    const Eigen::ArrayXXd s = (2.0 * lres / n) * r;
    adj.value().row(0).array() = s * ux;
    adj.dx().row(0).array() = s * u;
    adj.dt().row(0).array() = s;
    adj.dxx().row(0).array() = -nu * s;
    if (sink) sink->residual = mean_sq;
    return lres * mean_sq;
  };

  const double lic = config.lambda_ic;
  Eigen::RowVectorXd target(initial.cols());
  for (Index k = 0; k < initial.cols(); ++k) target(k) = initial_condition(initial(0, k));
  terms[1].inputs = initial;
  terms[1].head = [lic, sink, target](const SlotBatch& out, SlotBatch& adj) {
    const double n = static_cast<double>(out.points);
    const Eigen::RowVectorXd d = out.value().row(0) - target;
    const double mean_sq = d.squaredNorm() / n;
    adj.value().row(0) = (2.0 * lic / n) * d;
    if (sink) sink->ic = mean_sq;
    return lic * mean_sq;
  };

  const double lbc = config.lambda_bc;
  terms[2].inputs = boundary;
  terms[2].head = [lbc, sink](const SlotBatch& out, SlotBatch& adj) {
    const Index nb = out.points / 2;
    const double n = static_cast<double>(nb);
    const Eigen::RowVectorXd d = out.value().row(0).head(nb) - out.value().row(0).tail(nb);
    const double mean_sq = d.squaredNorm() / n;
    adj.value().row(0).head(nb) = (2.0 * lbc / n) * d;
    adj.value().row(0).tail(nb) = (-2.0 * lbc / n) * d;
    if (sink) sink->bc = mean_sq;
    return lbc * mean_sq;
  };
  return terms;
}

LossBreakdown pinn_loss(const NetworkParams& params, const PinnConfig& config,
                        const Collocation& sets) {
  LossBreakdown out;
  const auto terms = pinn_loss_terms(config, sets.interior, sets.initial, sets.boundary, &out);
  out.total = loss_value(params, terms);
  return out;
}

PinnGradient pinn_loss_gradient(const NetworkParams& params, const PinnConfig& config,
                                const Matrix& interior, const Matrix& initial,
                                const Matrix& boundary) {
  PinnGradient out;
  const auto terms = pinn_loss_terms(config, interior, initial, boundary, &out.loss);
  LossGradient g = loss_gradient(params, terms);
  out.loss.total = g.value;
  out.gradient = std::move(g.gradient);
  return out;
}

AdamState::AdamState(const NetworkParams& like, double beta1, double beta2, double eps)
    : m_(zeros_like(like)), v_(zeros_like(like)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamState::step(NetworkParams& params, const NetworkParams& grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m.array() = beta1_ * m.array() + (1.0 - beta1_) * g.array();
    v.array() = beta2_ * v.array() + (1.0 - beta2_) * g.array().square();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weights, grad.layers[l].weights, m_.layers[l].weights,
           v_.layers[l].weights);
    update(params.layers[l].bias, grad.layers[l].bias, m_.layers[l].bias, v_.layers[l].bias);
  }
}

void sgd_step(NetworkParams& params, const NetworkParams& grad, double lr) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    params.layers[l].weights -= lr * grad.layers[l].weights;
    params.layers[l].bias -= lr * grad.layers[l].bias;
  }
}

TrainResult train(const PinnConfig& config, const ProgressFn& progress) {
  config.validate();
  const auto widths = config.widths();
  return train_from(init_network(widths, config.activation, config.seed), config, progress);
}

namespace {

bool params_finite(const NetworkParams& p) {
  for (const auto& layer : p.layers)
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

// Cycles through the fixed interior set in seeded random order, one epoch
// at a time.
class InteriorBatcher {
 public:
  InteriorBatcher(const Matrix& interior, Index batch, std::uint64_t seed)
      : interior_(interior), batch_(batch), rng_(seed), order_(interior.cols()) {
    std::iota(order_.begin(), order_.end(), Index{0});
    reshuffle();
  }

  bool full() const { return batch_ <= 0 || batch_ >= interior_.cols(); }

  const Matrix& next() {
    if (full()) return interior_;
    current_.resize(2, batch_);
    for (Index j = 0; j < batch_; ++j) {
      if (pos_ == static_cast<Index>(order_.size())) reshuffle();
      current_.col(j) = interior_.col(order_[pos_++]);
    }
    return current_;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
    pos_ = 0;
  }

  const Matrix& interior_;
  Index batch_;
  std::mt19937_64 rng_;
  std::vector<Index> order_;
  Index pos_ = 0;
  Matrix current_;
};

}  // namespace

TrainResult train_from(NetworkParams params, const PinnConfig& config, const ProgressFn& progress) {
  config.validate();
  validate(params);
  const Collocation sets = training_collocation(config);
  InteriorBatcher batcher(sets.interior, config.batch_interior, config.seed ^ kBatchStream);
  AdamState adam(params);
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  auto record = [&](int step) {
    HistoryRecord rec;
    rec.step = step;
    try {
      rec.loss = pinn_loss(params, config, sets);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Overflow) throw;
      rec.loss.total = std::numeric_limits<double>::quiet_NaN();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.records.push_back(rec);
    if (progress) progress(rec);
    return rec;
  };
  auto diverge = [&](int step, const NetworkParams& last_good, const std::string& why) {
    TrainResult checkpoint{last_good, result.history, step};
    return DivergenceError("training diverged at step " + std::to_string(step) + ": " + why,
                           std::move(checkpoint));
  };

  record(0);
  NetworkParams last_good = params;
  for (int step = 0; step < config.steps; ++step) {
    PinnGradient g;
    try {
      g = pinn_loss_gradient(params, config, batcher.next(), sets.initial, sets.boundary);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonFiniteLoss || e.kind() == ErrorKind::Overflow)
        throw diverge(step, params, e.what());
      throw;
    }
    last_good = params;
    const double lr = config.learning_rate_at(step);
    if (config.optimizer == Optimizer::Sgd)
      sgd_step(params, g.gradient, lr);
    else
      adam.step(params, g.gradient, lr);
    if (!params_finite(params)) throw diverge(step, last_good, "non-finite parameters");
    const int done = step + 1;
    if (done % config.log_every == 0 || done == config.steps) {
      const HistoryRecord rec = record(done);
      if (!std::isfinite(rec.loss.total)) throw diverge(done, last_good, "non-finite loss");
    }
  }
  result.params = std::move(params);
  result.steps_completed = config.steps;
  return result;
}

Vector predict_field(const NetworkParams& params, const Vector& x_grid, double t) {
  Matrix inputs(2, x_grid.size());
  inputs.row(0) = x_grid.transpose();
  inputs.row(1).setConstant(t);
  const Tape tape(params, inputs, Slots::Value);
  return tape.output().value().row(0).transpose();
}

}  // namespace pf
