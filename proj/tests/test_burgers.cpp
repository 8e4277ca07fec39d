#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pf/burgers.hpp"

#include <cmath>

using namespace pf;

namespace {

double sin2pi(double x) { return std::sin(2.0 * kPi * x); }

// Max difference between a coarse snapshot and a finer one restricted to
// the coarse nodes (fine grid has `ratio` times more points).
double restricted_max_diff(const FieldSnapshot& coarse, const FieldSnapshot& fine, Index ratio) {
  double m = 0.0;
  for (Index i = 0; i < coarse.u.size(); ++i)
    m = std::max(m, std::abs(coarse.u(i) - fine.u(ratio * i)));
  return m;
}

double restricted_l2_diff(const FieldSnapshot& coarse, const FieldSnapshot& fine, Index ratio) {
  double s = 0.0;
  for (Index i = 0; i < coarse.u.size(); ++i) s += std::pow(coarse.u(i) - fine.u(ratio * i), 2);
  return std::sqrt(s / static_cast<double>(coarse.u.size()));
}

}  // namespace

TEST_CASE("diffusion-only mode matches heat-equation decay") {
  BurgersProblem p;
  p.n_x = 512;
  p.advection = Advection::None;
  p.times = {0.25, 0.5, 1.0};
  const auto snaps = solve_burgers(p, sin2pi);
  REQUIRE(snaps.size() == 3);
  for (const auto& s : snaps) {
    const double decay = std::exp(-p.nu * 4.0 * kPi * kPi * s.t);
    double err = 0.0;
    for (Index i = 0; i < s.u.size(); ++i) err = std::max(err, std::abs(s.u(i) - decay * sin2pi(s.grid(i))));
    INFO("t=" << s.t);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("Burgers: mean is conserved and energy decays") {
  BurgersProblem p;
  p.n_x = 256;
  p.times = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const auto snaps = solve_burgers(p, [](double x) { return 0.3 + sin2pi(x); });
  const double m0 = grid_mean(snaps.front());
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    CHECK(std::abs(grid_mean(snaps[k]) - m0) < 1e-12);
    CHECK(grid_energy(snaps[k]) <= grid_energy(snaps[k - 1]));
  }
}

TEST_CASE("Burgers: 1024 and 2048 grids agree at t = 0.5") {
  BurgersProblem p;
  p.times = {0.5};
  p.n_x = 1024;
  const auto coarse = solve_burgers(p, sin2pi);
  p.n_x = 2048;
  const auto fine = solve_burgers(p, sin2pi);
  CHECK(restricted_max_diff(coarse[0], fine[0], 2) < 1e-3);
}

TEST_CASE("Burgers: second-order self-convergence before the shock steepens") {
  BurgersProblem p;
  p.times = {0.1, 0.2};
  p.n_x = 256;
  const auto a = solve_burgers(p, sin2pi);
  p.n_x = 512;
  const auto b = solve_burgers(p, sin2pi);
  p.n_x = 1024;
  const auto c = solve_burgers(p, sin2pi);
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    const double e1 = restricted_l2_diff(a[k], b[k], 2);
    const double e2 = restricted_l2_diff(b[k], c[k], 2);
    INFO("t=" << p.times[k] << " e1=" << e1 << " e2=" << e2);
    CHECK(std::log2(e1 / e2) >= 1.9);
  }
}

TEST_CASE("solve_burgers: snapshot times are hit exactly and sorted") {
  BurgersProblem p;
  p.n_x = 64;
  p.times = {0.3, 0.0, 0.1};
  const auto s = solve_burgers(p, sin2pi);
  REQUIRE(s.size() == 3);
  CHECK(s[0].t == 0.0);
  CHECK(s[1].t == 0.1);
  CHECK(s[2].t == 0.3);
  CHECK(s[0].u(16) == doctest::Approx(1.0));
}

TEST_CASE("solve_burgers: argument checks and blow-up guard") {
  BurgersProblem p;
  p.n_x = 32;
  CHECK_THROWS_AS(solve_burgers(p, sin2pi), Error);
  p.n_x = 64;
  p.cfl = 0.6;
  CHECK_THROWS_AS(solve_burgers(p, sin2pi), Error);
  p.cfl = 0.4;
  p.times = {0.01};
  try {
    solve_burgers(p, [](double x) { return x < 0.5 ? 1.0 : std::nan(""); });
    FAIL("expected instability");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Instability);
    CHECK(std::string(e.what()).find("cfl") != std::string::npos);
  }
}

TEST_CASE("relative_l2_error") {
  FieldSnapshot b;
  b.grid = periodic_grid(8);
  b.u = b.grid.array().sin();
  b.u(0) = 1.0;
  FieldSnapshot two = b;
  two.u *= 2.0;
  CHECK(relative_l2_error(b, b) == 0.0);
  CHECK(relative_l2_error(b, two) == doctest::Approx(0.5));

  FieldSnapshot zero = b;
  zero.u.setZero();
  CHECK_THROWS_AS(relative_l2_error(b, zero), Error);

  FieldSnapshot other = b;
  other.grid = periodic_grid(8, {0.0, 2.0});
  try {
    relative_l2_error(b, other);
    FAIL("expected grid mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
}
