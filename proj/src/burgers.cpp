#include "pf/burgers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pf {

Vector periodic_grid(Index n, Interval domain) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = domain.lo + domain.length() * static_cast<double>(i) / n;
  return x;
}

namespace {

// du/dt for the semi-discrete system.
void rhs(const BurgersProblem& p, double dx, const Vector& u, Vector& out) {
  const Index n = u.size();
  const double inv2dx = 1.0 / (2.0 * dx);
  const double diff = p.nu / (dx * dx);
  for (Index i = 0; i < n; ++i) {
    const Index ip = i + 1 == n ? 0 : i + 1;
    const Index im = i == 0 ? n - 1 : i - 1;
    double transport = 0.0;
    switch (p.advection) {
      case Advection::Burgers:
        transport = 0.5 * (u(ip) * u(ip) - u(im) * u(im)) * inv2dx;
        break;
      case Advection::Frozen:
        transport = p.frozen_field(i) * (u(ip) - u(im)) * inv2dx;
        break;
      case Advection::None:
        break;
    }
    out(i) = -transport + diff * (u(ip) - 2.0 * u(i) + u(im));
  }
}

}  // namespace

std::vector<FieldSnapshot> solve_burgers(const BurgersProblem& p,
                                         const std::function<double(double)>& u0) {
  if (p.n_x < 64) throw Error(ErrorKind::Configuration, "n_x must be >= 64");
  if (!(p.nu > 0.0)) throw Error(ErrorKind::Configuration, "nu must be > 0");
  if (!(p.cfl > 0.0) || p.cfl > 0.5) throw Error(ErrorKind::Configuration, "cfl must be in (0, 0.5]");
  if (!(p.x_domain.hi > p.x_domain.lo)) throw Error(ErrorKind::Configuration, "degenerate x domain");
  if (p.advection == Advection::Frozen && p.frozen_field.size() != p.n_x)
    throw Error(ErrorKind::Configuration, "frozen field length must equal n_x");
  std::vector<double> times = p.times;
  std::sort(times.begin(), times.end());
  if (!times.empty() && times.front() < 0.0)
    throw Error(ErrorKind::Configuration, "snapshot times must be >= 0");

  const double dx = p.x_domain.length() / static_cast<double>(p.n_x);
  FieldSnapshot state;
  state.grid = periodic_grid(p.n_x, p.x_domain);
  state.u.resize(p.n_x);
  for (Index i = 0; i < p.n_x; ++i) state.u(i) = u0(state.grid(i));
  const double initial_max = state.u.cwiseAbs().maxCoeff();
  const double frozen_max =
      p.advection == Advection::Frozen ? p.frozen_field.cwiseAbs().maxCoeff() : 0.0;

  std::vector<FieldSnapshot> out;
  out.reserve(times.size());
  Vector k1(p.n_x), k2(p.n_x), stage(p.n_x);
  double t = 0.0;
  for (double target : times) {
    while (t < target) {
      double speed = 0.0;
      if (p.advection == Advection::Burgers) speed = state.u.cwiseAbs().maxCoeff();
      if (p.advection == Advection::Frozen) speed = frozen_max;
      double dt = dx * dx / (2.0 * p.nu);
      if (speed > 0.0) dt = std::min(dt, dx / speed);
      dt *= p.cfl;
      if (t + dt >= target) dt = target - t;
      rhs(p, dx, state.u, k1);
      stage = state.u + dt * k1;
      rhs(p, dx, stage, k2);
      state.u += 0.5 * dt * (k1 + k2);
      t = t + dt >= target ? target : t + dt;
      const double m = state.u.cwiseAbs().maxCoeff();
      if (!std::isfinite(m) || (initial_max > 0.0 && m > 10.0 * initial_max)) {
        std::ostringstream msg;
        msg << "solution blew up at t=" << t << " (max|u|=" << m << "); reduce cfl below " << p.cfl;
        throw Error(ErrorKind::Instability, msg.str());
      }
    }
    state.t = target;
    out.push_back(state);
  }
  return out;
}

double relative_l2_error(const FieldSnapshot& a, const FieldSnapshot& b) {
  if (a.grid.size() != b.grid.size() || a.u.size() != a.grid.size() || b.u.size() != b.grid.size())
    throw Error(ErrorKind::GridMismatch, "snapshots are on different grids");
  if (a.grid.size() > 0 && (a.grid - b.grid).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorKind::GridMismatch, "snapshots are on different grids");
  const double denom = b.u.norm();
  if (denom == 0.0) throw Error(ErrorKind::DegenerateInput, "reference field is identically zero");
  return (a.u - b.u).norm() / denom;
}

double grid_mean(const FieldSnapshot& s) { return s.u.mean(); }

double grid_energy(const FieldSnapshot& s) {
  return s.u.squaredNorm() / static_cast<double>(s.u.size());
}

}  // namespace pf
