#pragma once

// Exponential correlation in D-space, deformed covariance matrices, sample
// dispersions and the exponential variogram (fit and inverse).

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sdm/deformation.hpp"
#include "sdm/types.hpp"

namespace sdm {

/// Covariance parameters: partial sill sigma2, range phi (D-space units)
/// and the nugget (measurement-error variance, diagonal only).
struct CovParams {
  double sigma2 = 1.0;
  double phi = 1.0;
  double nugget = 0.0;

  /// Throws ArgumentError unless sigma2 > 0, phi > 0, nugget >= 0.
  void validate() const;
  double total_variance() const { return sigma2 + nugget; }
};

/// rho(h) = exp(-h / phi).
double correlation(double h, const CovParams& params);

/// C_ij = sigma2 rho(|y_i - y_j|) + nugget 1{i = j} for D-space coordinates.
Eigen::MatrixXd covariance_from_coords(const Coords& deformed, const CovParams& params);

/// Cross covariances sigma2 rho(|a_i - b_j|) (no nugget).
Eigen::MatrixXd cross_covariance(const Coords& a, const Coords& b, const CovParams& params);

/// Deformed covariance of geographic `sites` under `map`. Throws
/// NumericalError if the matrix fails Cholesky factorization.
Eigen::MatrixXd covariance_matrix(const Coords& sites, const DeformationMap& map, const CovParams& params);

/// Upper-triangle (i < j) pairwise Euclidean distances in row-major order.
std::vector<double> pairwise_distances(const Coords& y);
Eigen::MatrixXd distance_matrix(const Coords& y);

enum class VariogramFamily { Exponential };

/// g(h) = nugget + sill (1 - exp(-h / range)).
struct VariogramModel {
  double nugget = 0.0;
  double sill = 1.0;
  double range = 1.0;
  VariogramFamily family = VariogramFamily::Exponential;

  double operator()(double h) const;
  /// Distance beyond which the inverse is clamped.
  double max_distance() const { return 3.0 * range; }
};

/// Variogram of differences implied by covariance parameters:
/// Var(Z_i - Z_j) = 2 nugget + 2 sigma2 (1 - rho(h)).
VariogramModel variogram_from_cov(const CovParams& params);
CovParams cov_from_variogram(const VariogramModel& g);

/// Symmetric matrix of sample dispersions d2_ij = s_ii + s_jj - 2 s_ij.
class DispersionMatrix {
 public:
  explicit DispersionMatrix(Eigen::MatrixXd d2);

  const Eigen::MatrixXd& values() const { return d2_; }
  Eigen::Index size() const { return d2_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return d2_(i, j); }
  /// Upper-triangle (i < j) entries, same ordering as pairwise_distances.
  std::vector<double> upper() const;

 private:
  Eigen::MatrixXd d2_;
};

/// Sample covariance across the T columns (per-row means removed, divisor T-1).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& replicates);

/// Throws ArgumentError when T < 2.
DispersionMatrix sample_dispersions(const Eigen::MatrixXd& replicates);

struct VariogramFit {
  VariogramModel model;
  double residual = 0.0;  // weighted residual sum of squares over bins
  int bins = 0;           // non-empty bins used
};

/// Weighted least squares fit of the exponential variogram to (h, d2) pairs
/// grouped into 15 equal-width distance bins. Bin weights are N_j / g_j^2,
/// iterated to a fixed point; each bin is compared against the mean of the
/// model over its own pairs, so noiseless data is recovered exactly.
/// Throws FitError when all h coincide or there is no spatial structure.
VariogramFit fit_variogram(std::span<const double> h, std::span<const double> d2);

/// h with g(h) = d2; 0 at or below the nugget, clamped at max_distance().
double variogram_inverse(const VariogramModel& g, double d2);

}  // namespace sdm
