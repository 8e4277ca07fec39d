#pragma once

#include "pf/nnet.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pf {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

enum class Optimizer { Sgd, Adam };

const char* to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

/// Everything needed to reproduce a Burgers PINN run bit for bit.
struct PinnConfig {
  int hidden_layers = 8;   // hidden activations z_1..z_L, each of `width`
  Index width = 100;
  Activation activation = Activation::Tanh;
  double nu = 0.01 / kPi;
  Interval x_domain{0.0, 1.0};
  Interval t_domain{0.0, 1.0};
  Index n_interior = 10000;
  Index n_initial = 512;
  Index n_boundary = 512;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 3e-3;
  double lr_decay = 0.03;     // learning rate falls geometrically to lr * lr_decay at the last step
  int steps = 10000;
  Index batch_interior = 1000;  // interior points per step drawn from the fixed set; 0 = all
  double lambda_res = 1.0;
  double lambda_ic = 1.0;
  double lambda_bc = 1.0;
  std::uint64_t seed = 42;
  int log_every = 500;

  /// Throws Configuration naming the offending field.
  void validate() const;
  /// Layer widths {2, width x hidden_layers, 1}.
  std::vector<Index> widths() const;
  /// Learning rate used at a given (0-based) step.
  double learning_rate_at(int step) const;
};

/// Fixed collocation sets. Points are columns (row 0 = x, row 1 = t).
struct Collocation {
  Matrix interior;
  Matrix initial;
  Matrix boundary;  // first n_boundary columns at x_lo, next n_boundary at x_hi, same t
};

Collocation sample_collocation(const PinnConfig& config, std::uint64_t seed);

/// The fixed sets train() uses for a config (seeded from config.seed).
Collocation training_collocation(const PinnConfig& config);

/// u(x, 0) imposed by the initial-condition term.
double initial_condition(double x);

/// Burgers residual u_t + u u_x - nu u_xx of the network at (x, t).
double residual(const NetworkParams& params, double x, double t, double nu);

struct LossBreakdown {
  double total = 0;
  double residual = 0;  // mean squared residual
  double ic = 0;        // mean squared initial-condition mismatch
  double bc = 0;        // mean squared periodicity mismatch
};

/// Loss terms over the given sets; the heads store each unweighted term in
/// `*sink` as they are evaluated.
std::vector<LossTerm> pinn_loss_terms(const PinnConfig& config, const Matrix& interior,
                                      const Matrix& initial, const Matrix& boundary,
                                      LossBreakdown* sink);

LossBreakdown pinn_loss(const NetworkParams& params, const PinnConfig& config,
                        const Collocation& sets);

struct PinnGradient {
  LossBreakdown loss;
  NetworkParams gradient;
};

PinnGradient pinn_loss_gradient(const NetworkParams& params, const PinnConfig& config,
                                const Matrix& interior, const Matrix& initial,
                                const Matrix& boundary);

struct HistoryRecord {
  int step = 0;
  LossBreakdown loss;
  double wall_seconds = 0;
};

struct TrainingHistory {
  std::vector<HistoryRecord> records;
};

struct TrainResult {
  NetworkParams params;
  TrainingHistory history;
  int steps_completed = 0;
};

/// Raised when the loss stops being finite; carries the last finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainResult checkpoint)
      : Error(ErrorKind::Divergence, what), checkpoint_(std::move(checkpoint)) {}
  const TrainResult& checkpoint() const { return checkpoint_; }

 private:
  TrainResult checkpoint_;
};

using ProgressFn = std::function<void(const HistoryRecord&)>;

/// Optimizer state for Adam; moments are shaped like the network.
class AdamState {
 public:
  explicit AdamState(const NetworkParams& like, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8);
  void step(NetworkParams& params, const NetworkParams& grad, double lr);

 private:
  NetworkParams m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// W <- W - lr * dE/dW for every weight and bias.
void sgd_step(NetworkParams& params, const NetworkParams& grad, double lr);

TrainResult train(const PinnConfig& config, const ProgressFn& progress = {});

/// Continue from given parameters (train() starts from init_network()).
TrainResult train_from(NetworkParams params, const PinnConfig& config,
                       const ProgressFn& progress = {});

/// u(x_i, t) for every grid node.
Vector predict_field(const NetworkParams& params, const Vector& x_grid, double t);

}  // namespace pf
