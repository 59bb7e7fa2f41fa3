#pragma once

// Alternating estimator of a deformation model: profile Gaussian likelihood
// for the covariance parameters at fixed coefficients, then a constrained
// coordinate refit against classical-scaling targets at fixed covariance
// parameters, with Procrustes gauge fixing after each refit. The refit is
// taken as a damped move that never lowers the likelihood.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdm/covariance.hpp"
#include "sdm/deformation.hpp"
#include "sdm/errors.hpp"
#include "sdm/scaling.hpp"
#include "sdm/smoothers.hpp"
#include "sdm/types.hpp"

namespace sdm {

/// n geographic sites with T complete temporal replicates each.
struct Dataset {
  Coords sites;
  Eigen::MatrixXd replicates;       // n x T
  std::vector<std::string> ids;     // station labels, size n
  std::vector<std::string> times;   // period labels, size T

  Eigen::Index n() const { return sites.rows(); }
  Eigen::Index t() const { return replicates.cols(); }

  /// Throws DataError unless n >= 4, T >= 2, shapes agree, values finite.
  void validate() const;
  Eigen::VectorXd site_means() const;
  /// Replicates with per-site means removed.
  Eigen::MatrixXd centered() const;
};

/// Smallest box containing the sites, widened by `padding` times its size.
KnotGrid bounding_grid(const Coords& sites, int k1, int k2, double padding = 0.0);

struct FitConfig {
  int k1 = 8;
  int k2 = 8;
  std::optional<double> epsilon;  // default_margin(grid) when unset
  double tol = 1e-6;              // relative log-likelihood change
  int max_outer = 20;
  std::optional<double> ridge;
  std::uint64_t seed = 0;
  int sg_max_iter = 50;
  double sg_tol = 1e-6;
  double padding = 0.0;
};

struct FitDiagnostics {
  std::vector<double> loglik;   // after initialization, then per outer iteration
  std::vector<double> stress;   // initialization loop stress trace
  std::vector<double> margin;   // min corner functional per iterate
  std::vector<double> step;     // accepted fraction of the refit move (0 at the start)
  std::string start;            // "sg" or "affine"
  std::vector<double> start_loglik;  // SG start, affine start
  int iterations = 0;
  int selected = 0;             // index into loglik of the returned model
  bool converged = false;
  bool cov_warning = false;     // some step_cov call kept its start point
};

struct DeformModel {
  KnotGrid grid;
  CoefPair coef;
  CovParams cov;
  double epsilon = 0.0;
  double mean = 0.0;            // global mean of the per-site means
  Coords sites;                 // fitting sites, needed for Kriging
  FitDiagnostics diagnostics;

  DeformationMap map() const { return DeformationMap(grid, coef); }
};

/// A fit step failed; carries the outer iteration and the best model so far.
class EstimationError : public FitError {
 public:
  EstimationError(const std::string& what, int iteration, std::optional<DeformModel> best)
      : FitError(what), iteration_(iteration), best_(std::move(best)) {}
  int iteration() const { return iteration_; }
  const std::optional<DeformModel>& best() const { return best_; }

 private:
  int iteration_;
  std::optional<DeformModel> best_;
};

/// Gaussian log-likelihood of the centred replicate columns as i.i.d.
/// N(0, C) draws, C the deformed covariance at the D-space coordinates.
double loglik_coords(const Eigen::MatrixXd& centered, const Coords& deformed, const CovParams& cov);
double loglik(const Dataset& data, const DeformationMap& map, const CovParams& cov);

struct CovStep {
  CovParams cov;
  double loglik = 0.0;
  bool warning = false;  // optimizer did not improve; start returned
};

/// Maximizes the likelihood over (sigma2, phi, nugget) at fixed coordinates;
/// phi is kept within [1e-4, 10] times the D-space diameter.
CovStep step_cov_coords(const Eigen::MatrixXd& centered, const Coords& deformed, const CovParams& init);
CovStep step_cov(const Dataset& data, const DeformationMap& map, const CovParams& init);

struct CoordsStepOptions {
  std::optional<double> epsilon;
  std::optional<double> ridge;
};

/// Classical-scaling targets from the inverted variogram of the current
/// covariance parameters, Procrustes-aligned to the previous fitted
/// coordinates, then refit under the non-folding constraints.
BsplineFit step_coords(const Dataset& data, const CovParams& cov, const KnotGrid& grid, const CoefPair& previous,
                       const CoordsStepOptions& options = {});

struct GaugeResult {
  CoefPair coef;
  Similarity transform;  // applied to the fitted coordinates
};

/// Proper rotation + uniform scale + shift so the fitted coordinates share
/// the centroid and RMS spread of the sites. Throws GaugeError if the
/// fitted coordinates all coincide.
GaugeResult normalize_gauge(const KnotGrid& grid, const CoefPair& coef, const Coords& sites);

/// Starts from the better (by likelihood) of the SG-initialized map and the
/// affine map, then alternates until the relative log-likelihood change is
/// below tol, no damped step improves, or max_outer is reached.
DeformModel fit(const Dataset& data, const FitConfig& config);

}  // namespace sdm
