#pragma once

#include "pf/core.hpp"
#include "pf/pinn.hpp"

#include <functional>
#include <vector>

namespace pf {

/// u sampled on a uniform periodic grid at time t.
struct FieldSnapshot {
  double t = 0;
  Vector grid;
  Vector u;
};

/// Which transport term the finite-difference solver carries.
enum class Advection {
  Burgers,  // conservative flux (u^2/2)_x
  None,     // pure diffusion (closed-form check)
  Frozen,   // a(x) f_x with a fixed external field a
};

struct BurgersProblem {
  double nu = 0.01 / kPi;
  Index n_x = 1024;
  double cfl = 0.4;
  std::vector<double> times{0.5};
  Advection advection = Advection::Burgers;
  Vector frozen_field;  // length n_x, used with Advection::Frozen
  Interval x_domain{0.0, 1.0};
};

/// Nodes lo + i (hi - lo) / n, i = 0..n-1 (the right end is the periodic image of the left).
Vector periodic_grid(Index n, Interval domain = {0.0, 1.0});

/// Second-order central differences with explicit RK2 (Heun) steps and
/// periodic wraparound. Snapshots are returned in the order of the sorted
/// requested times, each hit exactly.
std::vector<FieldSnapshot> solve_burgers(const BurgersProblem& problem,
                                         const std::function<double(double)>& u0);

/// ||a - b||_2 / ||b||_2 over a shared grid.
double relative_l2_error(const FieldSnapshot& a, const FieldSnapshot& b);

double grid_mean(const FieldSnapshot& s);
double grid_energy(const FieldSnapshot& s);

}  // namespace pf
