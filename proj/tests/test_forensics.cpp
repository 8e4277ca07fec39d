#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pf/forensics.hpp"
#include "samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pf;
using namespace pf::testing;

TEST_CASE("kde_fit: standard normal density at the origin") {
  const Kde kde = kde_fit(normal_samples(10000, 1));
  CHECK(std::abs(kde.density(0.0) - 1.0 / std::sqrt(2.0 * kPi)) < 0.02);
  CHECK(kde.theta > 0.0);
}

TEST_CASE("kde_fit: density integrates to one and is non-negative") {
  const Kde kde = kde_fit(laplace_samples(2000, 2));
  const Vector x = Vector::LinSpaced(20001, -30.0, 30.0);
  const Vector y = kde.density(x);
  CHECK(y.minCoeff() >= 0.0);
  const double dx = x(1) - x(0);
  const double integral = dx * (y.sum() - 0.5 * (y(0) + y(y.size() - 1)));
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("kde: two point masses stay bimodal below the grid's upper bandwidth") {
  Vector s(10000);
  for (Index i = 0; i < s.size(); ++i) s(i) = (i % 2 == 0) ? -1.0 : 1.0;
  CHECK(count_modes(kde_fit(s)) >= 2);
  const double var = 1.0;
  for (int c = 0; c < 24; ++c) {
    const double theta = var * std::pow(10.0, -4.0 + 4.0 * c / 24.0);
    INFO("theta=" << theta);
    CHECK(count_modes(make_kde(s, theta)) >= 2);
  }
  CHECK(count_modes(make_kde(s, 4.0)) == 1);
}

TEST_CASE("kde_fit: degenerate samples") {
  CHECK_THROWS_AS(kde_fit(Vector::Constant(50, 0.3)), Error);
  CHECK_THROWS_AS(kde_fit(Vector::LinSpaced(5, 0.0, 1.0)), Error);
}

TEST_CASE("kde_fit is reproducible for a fixed seed") {
  const Vector s = normal_samples(3000, 5);
  CHECK(kde_fit(s, 9).theta == kde_fit(s, 9).theta);
}

TEST_CASE("gen_gaussian_fit: normal, Laplace, uniform") {
  CHECK(std::abs(gen_gaussian_fit(normal_samples(100000, 3)).beta - 2.0) < 0.15);
  CHECK(std::abs(gen_gaussian_fit(laplace_samples(100000, 4)).beta - 1.0) < 0.1);
  const GenGaussianFit u = gen_gaussian_fit(uniform_samples(100000, 5));
  CHECK(u.beta > 4.0);
}

TEST_CASE("gen_gaussian_fit recovers its own shape parameter") {
  for (double beta : {1.0, 2.0, 4.0}) {
    const GenGaussianFit f = gen_gaussian_fit(gen_gaussian_samples(100000, 0.7, beta, 11));
    INFO("beta=" << beta);
    CHECK(std::abs(f.beta - beta) < 0.15);
    CHECK(f.alpha == doctest::Approx(0.7).epsilon(0.03));
    CHECK(f.ok);
  }
}

TEST_CASE("gen_gaussian_fit: moment ratio at known shapes") {
  CHECK(gen_gaussian_moment_ratio(2.0) == doctest::Approx(kPi / 2.0));
  CHECK(gen_gaussian_moment_ratio(1.0) == doctest::Approx(2.0));
  Vector two_point(200);
  for (Index i = 0; i < 200; ++i) two_point(i) = (i % 2) ? 1.0 : -1.0;
  const GenGaussianFit f = gen_gaussian_fit(two_point);  // ratio 1, below any shape
  CHECK_FALSE(f.ok);
  CHECK_THROWS_AS(gen_gaussian_fit(normal_samples(50, 1)), Error);
}

TEST_CASE("kurtosis: analytic values") {
  CHECK(std::abs(kurtosis(normal_samples(100000, 6)) - 3.0) < 0.1);
  CHECK(std::abs(kurtosis(uniform_samples(100000, 7)) - 1.8) < 0.05);
  CHECK(std::abs(kurtosis(laplace_samples(100000, 8)) - 6.0) < 0.3);
  CHECK_THROWS_AS(kurtosis(Vector::Constant(10, 2.0)), Error);
}

TEST_CASE("kurtosis is translation and scale invariant") {
  const Vector x = laplace_samples(5000, 9);
  const double k = kurtosis(x);
  for (double a : {0.01, 3.0, -7.5}) {
    for (double b : {-2.0, 0.0, 40.0}) {
      const Vector y = (a * x.array() + b).matrix();
      CHECK(std::abs(kurtosis(y) - k) < 1e-10 * k);
    }
  }
}

TEST_CASE("eigenspectrum: simple matrices") {
  const ComplexVector id = eigenspectrum(Matrix::Identity(5, 5));
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(id(i) - 1.0) < 1e-14);
  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  ComplexVector r = eigenspectrum(rot);
  std::sort(r.data(), r.data() + 2, [](auto a, auto b) { return a.imag() < b.imag(); });
  CHECK(std::abs(r(0) - std::complex<double>(0, -1)) < 1e-14);
  CHECK(std::abs(r(1) - std::complex<double>(0, 1)) < 1e-14);
  CHECK_THROWS_AS(eigenspectrum(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("eigenspectrum: trace, determinant and conjugate pairs") {
  const Matrix m = Matrix::Identity(40, 40) + normal_matrix(40, 40, 0.1 / std::sqrt(40.0), 12);
  const ComplexVector ev = eigenspectrum(m);
  REQUIRE(ev.size() == 40);
  std::complex<double> sum = 0, prod = 1;
  for (Index i = 0; i < ev.size(); ++i) {
    sum += ev(i);
    prod *= ev(i);
  }
  CHECK(std::abs(sum.real() - m.trace()) < 1e-8 * std::abs(m.trace()));
  CHECK(std::abs(prod.real() - m.determinant()) < 1e-8 * std::abs(m.determinant()));
  CHECK(std::abs(sum.imag()) < 1e-10);
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i).imag() == 0.0) continue;
    const auto* match = std::find_if(ev.data(), ev.data() + ev.size(),
                                     [&](auto z) { return std::abs(z - std::conj(ev(i))) < 1e-12; });
    CHECK(match != ev.data() + ev.size());
  }
}

TEST_CASE("eigenspectrum: circular-law radius of a scaled Gaussian matrix") {
  double mean_radius = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ComplexVector ev = eigenspectrum(normal_matrix(200, 200, 1.0 / std::sqrt(200.0), 100 + seed));
    mean_radius += ev.cwiseAbs().maxCoeff() / 10.0;
  }
  CHECK(std::abs(mean_radius - 1.0) < 0.1);
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({0.0, 10.0}, 0.99) == doctest::Approx(9.9));
  CHECK(quantile({4.0}, 0.3) == 4.0);
}

TEST_CASE("circular_law_stats") {
  const Matrix w = normal_matrix(100, 100, 0.1, 21);
  const std::vector<Matrix> same{w, w, w};
  const CircularLawStats s = circular_law_stats(same);
  CHECK(s.radius_rel_spread == 0.0);

  std::vector<Matrix> six;
  for (int i = 0; i < 6; ++i) six.push_back(normal_matrix(100, 100, 0.05 + 0.02 * i, 30 + i));
  const CircularLawStats g = circular_law_stats(six);
  CHECK(g.radius_rel_spread < 0.05);
  CHECK(std::abs(g.mean_radius - 1.0) < 0.1);
  for (double f : g.inside_fraction) CHECK(f >= 0.95);
  for (Index o : g.outliers) CHECK(o <= 1);

  const std::vector<Matrix> mixed{w, normal_matrix(50, 50, 0.1, 2)};
  CHECK_THROWS_AS(circular_law_stats(mixed), Error);
  CHECK_THROWS_AS(circular_law_stats(std::vector<Matrix>{w}), Error);
}

TEST_CASE("singular_values: examples and invariants") {
  CHECK(singular_values(Matrix::Identity(6, 6)).isApprox(Vector::Ones(6)));
  const Vector d = singular_values(Vector(Eigen::Vector3d(1, 3, 2)).asDiagonal().toDenseMatrix());
  CHECK(d.isApprox(Vector(Eigen::Vector3d(3, 2, 1))));

  const Matrix g = normal_matrix(100, 100, 0.1, 41);
  const Vector s = singular_values(g);
  CHECK(std::abs(s(0) - 2.0) < 0.15);
  for (Index i = 1; i < s.size(); ++i) CHECK(s(i) <= s(i - 1));
  CHECK(s.minCoeff() >= 0.0);
  CHECK(std::abs(s.squaredNorm() - g.squaredNorm()) < 1e-10 * g.squaredNorm());

  Eigen::PermutationMatrix<Eigen::Dynamic> pr(100), pc(100);
  pr.setIdentity();
  pc.setIdentity();
  std::mt19937_64 rng(3);
  std::shuffle(pr.indices().data(), pr.indices().data() + 100, rng);
  std::shuffle(pc.indices().data(), pc.indices().data() + 100, rng);
  const Matrix permuted = pr * g * pc;
  CHECK((singular_values(permuted) - s).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gaussian_baseline") {
  CHECK_THROWS_AS(gaussian_baseline(3, 3, 0.0, 0.0, 1), Error);
  CHECK(gaussian_baseline(20, 20, 0.0, 1.0, 5) == gaussian_baseline(20, 20, 0.0, 1.0, 5));
  CHECK(gaussian_baseline(20, 20, 0.0, 1.0, 5) != gaussian_baseline(20, 20, 0.0, 1.0, 6));
  const Matrix b = gaussian_baseline(100, 100, 0.0, 0.1, 7);
  const double sd = std::sqrt((b.array() - b.mean()).square().mean());
  CHECK(sd >= 0.095);
  CHECK(sd <= 0.105);
  const Matrix shifted = gaussian_baseline(100, 100, 2.0, 0.1, 7);
  CHECK(std::abs(shifted.mean() - 2.0) < 0.01);
}

TEST_CASE("band_energy: examples") {
  CHECK(band_energy(Matrix::Identity(7, 7), 0) == 1.0);
  CHECK(band_energy(Matrix::Ones(4, 4), 0) == 0.25);
  CHECK(band_energy(Matrix::Ones(4, 4), 1) == doctest::Approx(10.0 / 16.0));
  CHECK(band_energy(Matrix::Ones(4, 4), 1, true) == 0.75);
  CHECK(band_energy(Matrix::Ones(4, 4), 2, true) == 1.0);
  CHECK_THROWS_AS(band_energy(Matrix::Ones(4, 4), 4), Error);
  CHECK_THROWS_AS(band_energy(Matrix::Zero(4, 4), 1), Error);
}

TEST_CASE("band_energy: full width is exactly one and the curve is monotone") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix m = normal_matrix(37, 37, 1.0, 50 + seed);
    for (bool periodic : {false, true}) {
      CHECK(band_energy(m, 36, periodic) == 1.0);
      double prev = 0.0;
      for (Index k = 0; k < 37; ++k) {
        const double e = band_energy(m, k, periodic);
        CHECK(e >= prev);
        prev = e;
      }
    }
    for (Index k = 0; k < 37; ++k) CHECK(band_energy(m, k, true) >= band_energy(m, k, false));
  }
}

TEST_CASE("detect_drop: fires on a spiked matrix only") {
  const Matrix g = normal_matrix(100, 100, 0.1, 61);
  std::vector<Vector> base;
  for (int b = 0; b < 16; ++b) base.push_back(singular_values(gaussian_baseline(100, 100, g.mean(), 0.1, 200 + b)));
  const DropReport plain = detect_drop(singular_values(g), base);
  CHECK_FALSE(plain.fires);
  CHECK(plain.z.size() == 3);

  const Vector u = Vector::LinSpaced(100, -1.0, 1.0).normalized();
  const Matrix spiked = g + 4.0 * u * u.transpose();
  const DropReport spike = detect_drop(singular_values(spiked), base);
  CHECK(spike.fires);
  CHECK(spike.margin > 0.5);
}

namespace {

NetworkParams layered(const std::vector<Matrix>& hidden, std::uint64_t seed) {
  NetworkParams p;
  const Index n = hidden.front().rows();
  p.layers.push_back({normal_matrix(n, 2, 1.0, seed), Vector::Zero(n)});
  for (std::size_t i = 0; i < hidden.size(); ++i)
    p.layers.push_back({hidden[i], normal_matrix(n, 1, 0.1, seed + 1 + i)});
  p.layers.push_back({normal_matrix(1, n, 0.1, seed + 99), Vector::Zero(1)});
  return p;
}

}  // namespace

TEST_CASE("analyze_network: Gaussian layers look like the random baseline") {
  std::vector<Matrix> hidden;
  for (int i = 0; i < 3; ++i) hidden.push_back(normal_matrix(100, 100, 0.1, 70 + i));
  const NetworkReport r = analyze_network(layered(hidden, 1), 5);
  REQUIRE(r.layers.size() == 3);
  CHECK(r.radius_rel_spread < 0.05);
  for (const LayerReport& l : r.layers) {
    CHECK(std::abs(l.weights.kurtosis - 3.0) < 0.2);
    CHECK(std::abs(l.weights.beta - 2.0) < 0.2);
    CHECK_FALSE(l.structured);
    CHECK_FALSE(l.drop.fires);
    CHECK(l.bias.low_confidence);
    CHECK_FALSE(l.weights.low_confidence);
    CHECK(l.eigenvalues.size() == 100);
    CHECK(l.band_energy(99) == 1.0);
    CHECK(std::abs(l.band_energy(10) - l.baseline_band_energy) < 0.1);
  }
}

TEST_CASE("analyze_network: a tridiagonal layer is flagged structured") {
  Matrix tri = Matrix::Zero(50, 50);
  for (Index i = 0; i < 50; ++i) {
    tri(i, i) = -2.0;
    if (i > 0) tri(i, i - 1) = 1.0;
    if (i + 1 < 50) tri(i, i + 1) = 1.0;
  }
  const NetworkReport r = analyze_network(layered({tri, normal_matrix(50, 50, 0.1, 3)}, 2));
  REQUIRE(r.layers.size() == 2);
  CHECK(r.layers[0].band_energy(1) > 0.99);
  CHECK(r.layers[0].structured);
  CHECK_FALSE(r.layers[1].structured);
}

TEST_CASE("analyze_network is deterministic") {
  const NetworkParams p = layered({normal_matrix(30, 30, 0.2, 1), normal_matrix(30, 30, 0.2, 2)}, 3);
  const NetworkReport a = analyze_network(p, 4), b = analyze_network(p, 4);
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(a.layers[i].weights.theta == b.layers[i].weights.theta);
    CHECK(a.layers[i].drop.z == b.layers[i].drop.z);
    CHECK(a.layers[i].radius == b.layers[i].radius);
  }
}

TEST_CASE("square_hidden_layers skips the input and output maps") {
  NetworkParams p;
  p.layers.push_back({Matrix::Zero(4, 4), Vector::Zero(4)});
  p.layers.push_back({Matrix::Zero(4, 4), Vector::Zero(4)});
  p.layers.push_back({Matrix::Zero(4, 4), Vector::Zero(4)});
  CHECK(square_hidden_layers(p) == std::vector<Index>{1});
}
