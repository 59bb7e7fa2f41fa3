#pragma once

// Closed-form reference deformations, Gaussian random field simulation
// under a deformed covariance, and simple Kriging on a fitted model.

#include <cstdint>
#include <variant>

#include <Eigen/Dense>

#include "sdm/covariance.hpp"
#include "sdm/deformation.hpp"
#include "sdm/estimation.hpp"
#include "sdm/types.hpp"

namespace sdm {

struct IdentityMap {};

/// Rotation about `center` by strength * exp(-|x - c|^2 / (2 radius^2)).
struct SwirlMap {
  Point center{0.5, 0.5};
  double strength = 1.5;
  double radius = 0.35;
};

/// Swirl evaluated at one point. Throws ArgumentError for radius <= 0.
Point swirl(const SwirlMap& s, const Point& x);

class AnalyticMap {
 public:
  AnalyticMap() = default;
  AnalyticMap(SwirlMap s);

  static AnalyticMap identity() { return AnalyticMap(); }

  Point operator()(const Point& x) const;
  Coords apply(const Coords& x) const;
  Eigen::Matrix2d jacobian(const Point& x) const;
  double jacobian_det(const Point& x) const { return jacobian(x).determinant(); }

 private:
  std::variant<IdentityMap, SwirlMap> map_;
};

/// n x T matrix of i.i.d. N(0, C) columns, C built on the D-space
/// coordinates. Deterministic in `seed`.
Eigen::MatrixXd simulate_grf(const Coords& deformed, const CovParams& cov, int replicates, std::uint64_t seed);
Eigen::MatrixXd simulate_grf(const Coords& sites, const AnalyticMap& truth, const CovParams& cov, int replicates,
                             std::uint64_t seed);
Eigen::MatrixXd simulate_grf(const Coords& sites, const DeformationMap& truth, const CovParams& cov,
                             int replicates, std::uint64_t seed);

struct KrigingResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Simple Kriging of one period's observations `z` (at model.sites) onto
/// `pred_sites`, with the nugget kept out of the cross covariances.
KrigingResult krige(const DeformModel& model, const Eigen::VectorXd& z, const Coords& pred_sites);

/// m x n_draws matrix of draws from the conditional Gaussian at pred_sites.
Eigen::MatrixXd conditional_simulate(const DeformModel& model, const Eigen::VectorXd& z, const Coords& pred_sites,
                                     int n_draws, std::uint64_t seed);

}  // namespace sdm
