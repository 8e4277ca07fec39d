#pragma once

#include "pf/core.hpp"
#include "pf/nnet.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace pf {

using ComplexVector = VectorX<std::complex<double>>;

// ---------------------------------------------------------------------------
// Entry distributions

/// Gaussian kernel density estimate; theta is the kernel variance.
struct Kde {
  double theta = 0;
  Vector samples;  // sorted ascending

  double density(double x) const;
  Vector density(const Vector& xs) const;
};

/// Builds the estimate at a fixed bandwidth.
Kde make_kde(const Vector& samples, double theta);

/// Bandwidth chosen by 5-fold cross-validated log-likelihood over 25
/// log-spaced candidates in [1e-4, 1] * var(samples). The fold split uses a
/// seeded shuffle, so the choice is reproducible.
Kde kde_fit(const Vector& samples, std::uint64_t seed = 0);

/// Local maxima of the density on a 512-point grid over the sample range
/// (padded by three kernel widths) whose prominence is at least
/// `prominence` times the highest value.
int count_modes(const Kde& kde, Index points = 512, double prominence = 0.05);

struct GenGaussianFit {
  double mu = 0;
  double alpha = 0;
  double beta = 0;
  bool ok = false;  // false when the moment ratio falls outside the invertible range
};

/// Moment matching of p(x) ~ exp(-|(x - mu)/alpha|^beta).
GenGaussianFit gen_gaussian_fit(const Vector& samples);

/// E|x|^2 / (E|x|)^2 of the generalized Gaussian with shape beta.
double gen_gaussian_moment_ratio(double beta);

/// Non-excess kurtosis E[(x - mu)^4] / sigma^4.
double kurtosis(const Vector& samples);

struct DistributionFit {
  Index n = 0;
  double mu = 0;
  double sigma = 0;
  double theta = 0;
  double alpha = 0;
  double beta = 0;
  double kurtosis = 0;
  int n_modes = 0;
  bool gg_ok = false;
  bool low_confidence = false;  // fewer than 1000 samples
};

DistributionFit fit_distribution(const Vector& samples, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Spectra

/// All eigenvalues of a real square matrix.
ComplexVector eigenspectrum(const Matrix& m);

/// (W - mean) / (std * sqrt(N)) with population std over all entries.
Matrix normalize_entries(const Matrix& w);

/// Linear-interpolated quantile (q in [0,1]) of the values.
double quantile(std::vector<double> values, double q);

struct CircularLawStats {
  std::vector<double> radius;           // 0.99-quantile of |lambda| per layer
  std::vector<Index> outliers;          // |lambda| > 1.05 radius
  std::vector<double> inside_fraction;  // share with |lambda| <= 1.1 radius
  std::vector<ComplexVector> eigenvalues;
  double mean_radius = 0;
  double radius_rel_spread = 0;
};

/// Layers are entry-normalized before their spectra are taken.
CircularLawStats circular_law_stats(std::span<const Matrix> layers);

/// Descending singular values.
Vector singular_values(const Matrix& m);

/// i.i.d. normal entries, filled row by row from a seeded stream.
Matrix gaussian_baseline(Index rows, Index cols, double mean, double std, std::uint64_t seed);

/// Share of the squared Frobenius norm with |i - j| <= k. With `periodic`
/// the distance wraps around, min(|i - j|, n - |i - j|).
double band_energy(const Matrix& m, Index k, bool periodic = false);

/// Compares the top singular values of a matrix to those of moment-matched
/// Gaussian matrices.
struct DropReport {
  static constexpr Index kTop = 3;
  Vector top;            // subject's leading singular values
  Vector baseline_mean;  // baseline mean of each leading value
  Vector baseline_std;
  Vector z;              // (top - mean) / std
  double margin = 0;     // largest relative excess top/mean - 1
  bool fires = false;    // some z exceeds the threshold
};

inline constexpr double kDropThreshold = 5.0;

/// Baseline statistics are passed in so one set of baselines can serve
/// several tests.
DropReport detect_drop(const Vector& subject_sv, std::span<const Vector> baseline_sv);

// ---------------------------------------------------------------------------
// Whole-network battery

struct LayerReport {
  Index layer = 0;  // position in NetworkParams::layers
  Index rows = 0;
  Index cols = 0;
  DistributionFit weights;
  DistributionFit bias;
  Kde weight_kde;
  Kde bias_kde;
  ComplexVector eigenvalues;  // of the normalized matrix
  double radius = 0;
  Index outliers = 0;
  double inside_fraction = 0;
  Vector singular_values;
  double sigma_max = 0;
  Vector band_energy;           // indexed by halfwidth 0..n-1
  Vector band_energy_periodic;
  double baseline_band_energy = 0;  // at kStructureHalfwidth, mean over baselines
  double baseline_band_energy_periodic = 0;
  DropReport drop;
  bool structured = false;
};

inline constexpr Index kStructureHalfwidth = 10;
inline constexpr double kStructureGap = 0.1;
inline constexpr int kBaselineCount = 16;

struct NetworkReport {
  std::vector<LayerReport> layers;
  double mean_radius = 0;
  double radius_rel_spread = 0;
  bool all_sigma_below_one = false;
};

/// Runs every statistic on the square hidden layers (all layers except the
/// first and last whose weight matrix is square).
NetworkReport analyze_network(const NetworkParams& params, std::uint64_t seed = 0);

std::vector<Index> square_hidden_layers(const NetworkParams& params);

}  // namespace pf
