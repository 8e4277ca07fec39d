#include "pf/forensics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace pf {
namespace {

constexpr int kFolds = 5;
constexpr int kBandwidthCandidates = 25;
// Kernel terms below exp(-40) of the nearest one are dropped from the
// leave-out likelihood; they cannot move a double.
constexpr double kWindowExponent = 40.0;

double population_variance(const Vector& x, double mean) {
  return (x.array() - mean).square().mean();
}

void require_samples(const Vector& samples, Index minimum, const char* what) {
  if (samples.size() < minimum) {
    std::ostringstream msg;
    msg << what << " needs at least " << minimum << " samples, got " << samples.size();
    throw Error(ErrorKind::DegenerateInput, msg.str());
  }
  if (!samples.allFinite()) throw Error(ErrorKind::DegenerateInput, std::string(what) + ": non-finite sample");
}

Vector sorted_copy(const Vector& v) {
  Vector s = v;
  std::sort(s.data(), s.data() + s.size());
  return s;
}

// log of the mean kernel value at x over `train` (sorted).
double log_density(const Vector& train, double x, double theta) {
  const double* begin = train.data();
  const double* end = begin + train.size();
  const double* it = std::lower_bound(begin, end, x);
  double dmin = std::numeric_limits<double>::infinity();
  if (it != end) dmin = *it - x;
  if (it != begin) dmin = std::min(dmin, x - *(it - 1));
  const double reach = std::sqrt(dmin * dmin + 2.0 * theta * kWindowExponent);
  const double* lo = std::lower_bound(begin, end, x - reach);
  const double* hi = std::upper_bound(begin, end, x + reach);
  const double m = -dmin * dmin / (2.0 * theta);
  const Eigen::Map<const Eigen::ArrayXd> window(lo, hi - lo);
  const double sum = ((-(window - x).square() / (2.0 * theta)) - m).exp().sum();
  return m + std::log(sum) - std::log(static_cast<double>(train.size()) * std::sqrt(2.0 * kPi * theta));
}

struct Circle {
  double radius;
  Index outliers;
  double inside_fraction;
};

Circle circle_of(const ComplexVector& ev) {
  std::vector<double> mod(static_cast<std::size_t>(ev.size()));
  for (Index i = 0; i < ev.size(); ++i) mod[static_cast<std::size_t>(i)] = std::abs(ev(i));
  Circle c{};
  c.radius = quantile(mod, 0.99);
  c.outliers = std::count_if(mod.begin(), mod.end(), [&](double a) { return a > 1.05 * c.radius; });
  c.inside_fraction =
      static_cast<double>(std::count_if(mod.begin(), mod.end(), [&](double a) { return a <= 1.1 * c.radius; })) /
      static_cast<double>(mod.size());
  return c;
}

}  // namespace

double Kde::density(double x) const {
  if (samples.size() == 0) return 0.0;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * std::sqrt(2.0 * kPi * theta));
  return norm * (-(samples.array() - x).square() / (2.0 * theta)).exp().sum();
}

Vector Kde::density(const Vector& xs) const {
  Vector out(xs.size());
  for (Index i = 0; i < xs.size(); ++i) out(i) = density(xs(i));
  return out;
}

Kde make_kde(const Vector& samples, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorKind::DegenerateInput, "kde bandwidth must be positive");
  return Kde{theta, sorted_copy(samples)};
}

Kde kde_fit(const Vector& samples, std::uint64_t seed) {
  require_samples(samples, 8, "kde_fit");
  const double var = population_variance(samples, samples.mean());
  if (!(var > 0.0)) throw Error(ErrorKind::DegenerateInput, "kde_fit: all samples identical");

  const Index n = samples.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  std::vector<Vector> train(kFolds), test(kFolds);
  for (int f = 0; f < kFolds; ++f) {
    std::vector<double> tr, te;
    for (std::size_t i = 0; i < order.size(); ++i)
      (static_cast<int>(i % kFolds) == f ? te : tr).push_back(samples(order[i]));
    std::sort(tr.begin(), tr.end());
    train[f] = Eigen::Map<Vector>(tr.data(), static_cast<Index>(tr.size()));
    test[f] = Eigen::Map<Vector>(te.data(), static_cast<Index>(te.size()));
  }

  double best_theta = var;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < kBandwidthCandidates; ++c) {
    const double theta = var * std::pow(10.0, -4.0 + 4.0 * c / (kBandwidthCandidates - 1));
    double score = 0.0;
    for (int f = 0; f < kFolds; ++f)
      for (Index i = 0; i < test[f].size(); ++i) score += log_density(train[f], test[f](i), theta);
    if (score > best_score) {
      best_score = score;
      best_theta = theta;
    }
  }
  return make_kde(samples, best_theta);
}

int count_modes(const Kde& kde, Index points, double prominence) {
  const Vector& s = kde.samples;
  const double pad = 3.0 * std::sqrt(kde.theta);
  const Vector grid = Vector::LinSpaced(points, s.minCoeff() - pad, s.maxCoeff() + pad);
  const Vector y = kde.density(grid);
  const double floor = prominence * y.maxCoeff();
  int modes = 0;
  for (Index i = 1; i + 1 < points; ++i) {
    if (!(y(i) > y(i - 1) && y(i) >= y(i + 1))) continue;
    double left = y(i), right = y(i);
    for (Index j = i - 1; j >= 0 && y(j) <= y(i); --j) left = std::min(left, y(j));
    for (Index j = i + 1; j < points && y(j) <= y(i); ++j) right = std::min(right, y(j));
    if (y(i) - std::max(left, right) >= floor) ++modes;
  }
  return std::max(modes, 1);
}

double gen_gaussian_moment_ratio(double beta) {
  return std::exp(std::lgamma(1.0 / beta) + std::lgamma(3.0 / beta) - 2.0 * std::lgamma(2.0 / beta));
}

GenGaussianFit gen_gaussian_fit(const Vector& samples) {
  require_samples(samples, 100, "gen_gaussian_fit");
  GenGaussianFit fit;
  fit.mu = samples.mean();
  const Eigen::ArrayXd d = (samples.array() - fit.mu).abs();
  const double m1 = d.mean();
  const double m2 = d.square().mean();
  if (!(m1 > 0.0)) throw Error(ErrorKind::DegenerateInput, "gen_gaussian_fit: zero spread");
  const double ratio = m2 / (m1 * m1);

  double lo = 0.2, hi = 20.0;  // ratio decreases in beta
  fit.ok = ratio <= gen_gaussian_moment_ratio(lo) && ratio >= gen_gaussian_moment_ratio(hi);
  if (ratio > gen_gaussian_moment_ratio(lo)) {
    fit.beta = lo;
  } else if (ratio < gen_gaussian_moment_ratio(hi)) {
    fit.beta = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gen_gaussian_moment_ratio(mid) > ratio ? lo : hi) = mid;
    }
    fit.beta = 0.5 * (lo + hi);
  }
  fit.alpha = std::sqrt(m2) * std::exp(0.5 * (std::lgamma(1.0 / fit.beta) - std::lgamma(3.0 / fit.beta)));
  return fit;
}

double kurtosis(const Vector& samples) {
  require_samples(samples, 4, "kurtosis");
  const Eigen::ArrayXd d = samples.array() - samples.mean();
  const double m2 = d.square().mean();
  if (!(m2 > 0.0)) throw Error(ErrorKind::DegenerateInput, "kurtosis: zero variance");
  return d.square().square().mean() / (m2 * m2);
}

DistributionFit fit_distribution(const Vector& samples, std::uint64_t seed) {
  DistributionFit f;
  f.n = samples.size();
  f.mu = samples.mean();
  f.sigma = std::sqrt(population_variance(samples, f.mu));
  f.kurtosis = kurtosis(samples);
  const Kde kde = kde_fit(samples, seed);
  f.theta = kde.theta;
  f.n_modes = count_modes(kde);
  if (samples.size() >= 100) {
    const GenGaussianFit gg = gen_gaussian_fit(samples);
    f.alpha = gg.alpha;
    f.beta = gg.beta;
    f.gg_ok = gg.ok;
  }
  f.low_confidence = samples.size() < 1000;
  return f;
}

ComplexVector eigenspectrum(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "eigenspectrum needs a square matrix");
  if (!m.allFinite()) throw Error(ErrorKind::DegenerateInput, "eigenspectrum: non-finite entry");
  Eigen::EigenSolver<Matrix> solver(m, false);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigenvalue iteration did not converge for " << m.rows() << "x" << m.cols()
        << " matrix, fingerprint " << std::hex
        << fnv1a(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    throw Error(ErrorKind::NumericalFailure, msg.str());
  }
  return solver.eigenvalues();
}

Matrix normalize_entries(const Matrix& w) {
  const double mean = w.mean();
  const double std = std::sqrt((w.array() - mean).square().mean());
  if (!(std > 0.0)) throw Error(ErrorKind::DegenerateInput, "normalize_entries: constant matrix");
  return (w.array() - mean) / (std * std::sqrt(static_cast<double>(w.rows())));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::DegenerateInput, "quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= values.size()) return values.back();
  return values[i] + (pos - static_cast<double>(i)) * (values[i + 1] - values[i]);
}

CircularLawStats circular_law_stats(std::span<const Matrix> layers) {
  if (layers.size() < 2) throw Error(ErrorKind::DegenerateInput, "circular_law_stats needs at least two layers");
  CircularLawStats s;
  for (const Matrix& w : layers) {
    if (w.rows() != w.cols() || w.rows() != layers.front().rows())
      throw Error(ErrorKind::ShapeMismatch, "circular_law_stats: layers must be square and of equal size");
    const ComplexVector ev = eigenspectrum(normalize_entries(w));
    const Circle c = circle_of(ev);
    s.radius.push_back(c.radius);
    s.outliers.push_back(c.outliers);
    s.inside_fraction.push_back(c.inside_fraction);
    s.eigenvalues.push_back(ev);
  }
  s.mean_radius = std::accumulate(s.radius.begin(), s.radius.end(), 0.0) / static_cast<double>(s.radius.size());
  for (double r : s.radius) s.radius_rel_spread = std::max(s.radius_rel_spread, std::abs(r - s.mean_radius));
  s.radius_rel_spread /= s.mean_radius;
  return s;
}

Vector singular_values(const Matrix& m) {
  if (!m.allFinite()) throw Error(ErrorKind::DegenerateInput, "singular_values: non-finite entry");
  Eigen::BDCSVD<Matrix> svd(m);
  if (svd.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "SVD did not converge");
  return svd.singularValues();  // already descending
}

Matrix gaussian_baseline(Index rows, Index cols, double mean, double std, std::uint64_t seed) {
  if (!(std > 0.0)) throw Error(ErrorKind::DegenerateInput, "gaussian_baseline: std must be positive");
  std::mt19937_64 rng(seed);
  NormalSampler<std::mt19937_64> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = mean + std * normal(rng);
  return m;
}

double band_energy(const Matrix& m, Index k, bool periodic) {
  const Index n = m.rows();
  if (n != m.cols()) throw Error(ErrorKind::ShapeMismatch, "band_energy needs a square matrix");
  if (k < 0 || k >= n) throw Error(ErrorKind::DegenerateInput, "band_energy halfwidth out of range");
  double band = 0.0, total = 0.0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double e = m(i, j) * m(i, j);
      Index d = std::abs(i - j);
      if (periodic) d = std::min(d, n - d);
      total += e;
      if (d <= k) band += e;
    }
  }
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateInput, "band_energy of a zero matrix");
  return band / total;
}

DropReport detect_drop(const Vector& subject_sv, std::span<const Vector> baseline_sv) {
  if (baseline_sv.size() < 2) throw Error(ErrorKind::DegenerateInput, "detect_drop needs at least two baselines");
  const Index top = std::min<Index>(DropReport::kTop, subject_sv.size());
  DropReport r;
  r.top = subject_sv.head(top);
  r.baseline_mean = Vector::Zero(top);
  r.baseline_std = Vector::Zero(top);
  for (const Vector& b : baseline_sv) r.baseline_mean += b.head(top);
  r.baseline_mean /= static_cast<double>(baseline_sv.size());
  for (const Vector& b : baseline_sv) r.baseline_std += (b.head(top) - r.baseline_mean).cwiseAbs2();
  r.baseline_std = (r.baseline_std / static_cast<double>(baseline_sv.size() - 1)).cwiseSqrt();
  r.z = (r.top - r.baseline_mean).cwiseQuotient(r.baseline_std);
  r.margin = (r.top.cwiseQuotient(r.baseline_mean).array() - 1.0).maxCoeff();
  r.fires = (r.z.array() > kDropThreshold).any();
  return r;
}

std::vector<Index> square_hidden_layers(const NetworkParams& params) {
  std::vector<Index> out;
  const auto count = static_cast<Index>(params.layers.size());
  for (Index l = 1; l + 1 < count; ++l) {
    const Matrix& w = params.layers[static_cast<std::size_t>(l)].weights;
    if (w.rows() == w.cols()) out.push_back(l);
  }
  return out;
}

NetworkReport analyze_network(const NetworkParams& params, std::uint64_t seed) {
  validate(params);
  const std::vector<Index> hidden = square_hidden_layers(params);
  if (hidden.empty()) throw Error(ErrorKind::DegenerateInput, "network has no square hidden layer");

  NetworkReport report;
  std::vector<Matrix> square;
  for (Index l : hidden) {
    const Layer& layer = params.layers[static_cast<std::size_t>(l)];
    const Matrix& w = layer.weights;
    const Index n = w.rows();
    const std::uint64_t layer_seed = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(l + 1));
    LayerReport r;
    r.layer = l;
    r.rows = n;
    r.cols = w.cols();

    const Vector flat = Eigen::Map<const Vector>(w.data(), w.size());
    r.weights = fit_distribution(flat, layer_seed);
    r.weight_kde = make_kde(flat, r.weights.theta);
    r.bias = fit_distribution(layer.bias, layer_seed + 1);
    r.bias_kde = make_kde(layer.bias, r.bias.theta);

    r.singular_values = singular_values(w);
    r.sigma_max = r.singular_values(0);
    r.band_energy.resize(n);
    r.band_energy_periodic.resize(n);
    for (Index k = 0; k < n; ++k) {
      r.band_energy(k) = band_energy(w, k, false);
      r.band_energy_periodic(k) = band_energy(w, k, true);
    }

    const Index k = std::min(kStructureHalfwidth, n - 1);
    std::vector<Vector> baseline_sv;
    for (int b = 0; b < kBaselineCount; ++b) {
      const Matrix g = gaussian_baseline(n, n, r.weights.mu, r.weights.sigma, layer_seed + 2 + static_cast<std::uint64_t>(b));
      baseline_sv.push_back(singular_values(g));
      r.baseline_band_energy += band_energy(g, k, false) / kBaselineCount;
      r.baseline_band_energy_periodic += band_energy(g, k, true) / kBaselineCount;
    }
    r.drop = detect_drop(r.singular_values, baseline_sv);
    r.structured = std::abs(r.band_energy(k) - r.baseline_band_energy) >= kStructureGap ||
                   std::abs(r.band_energy_periodic(k) - r.baseline_band_energy_periodic) >= kStructureGap;
    report.layers.push_back(std::move(r));
    square.push_back(w);
  }

  // Spectra are compared across layers of one size; a network with a single
  // square layer still gets its own radius.
  const Index n0 = square.front().rows();
  const bool uniform = std::all_of(square.begin(), square.end(), [&](const Matrix& m) { return m.rows() == n0; });
  if (uniform && square.size() >= 2) {
    const CircularLawStats c = circular_law_stats(square);
    for (std::size_t i = 0; i < square.size(); ++i) {
      report.layers[i].eigenvalues = c.eigenvalues[i];
      report.layers[i].radius = c.radius[i];
      report.layers[i].outliers = c.outliers[i];
      report.layers[i].inside_fraction = c.inside_fraction[i];
    }
    report.mean_radius = c.mean_radius;
    report.radius_rel_spread = c.radius_rel_spread;
  } else {
    for (std::size_t i = 0; i < square.size(); ++i) {
      LayerReport& r = report.layers[i];
      r.eigenvalues = eigenspectrum(normalize_entries(square[i]));
      const Circle c = circle_of(r.eigenvalues);
      r.radius = c.radius;
      r.outliers = c.outliers;
      r.inside_fraction = c.inside_fraction;
    }
    report.mean_radius = report.layers.front().radius;
    report.radius_rel_spread = 0.0;
  }
  report.all_sigma_below_one = std::all_of(report.layers.begin(), report.layers.end(),
                                           [](const LayerReport& r) { return r.sigma_max < 1.0; });
  return report;
}

}  // namespace pf
