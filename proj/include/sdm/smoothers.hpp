#pragma once

// Coordinate smoothers mapping geographic sites to D-space targets:
// the thin-plate spline baseline and the non-folding constrained
// tensor-product B-spline least-squares fit.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sdm/deformation.hpp"
#include "sdm/types.hpp"

namespace sdm {

/// Thin-plate spline f_j(x) = alpha_0 + alpha_1 x1 + alpha_2 x2 +
/// sum_i theta_i phi(|x - c_i|), phi(r) = r^2 log r, one column per output.
struct TpsModel {
  Eigen::Matrix<double, 3, 2> alpha;
  Eigen::Matrix<double, Eigen::Dynamic, 2> theta;
  Coords centers;
  double lambda = 0.0;

  Point operator()(const Point& x) const;
  Coords apply(const Coords& x) const;
  /// Central-difference Jacobian determinant with step h.
  double numeric_jacobian_det(const Point& x, double h = 1e-6) const;
};

double tps_kernel(double r);

/// Solves [K + n lambda I, P; P', 0] [theta; alpha] = [targets; 0].
/// Throws NumericalError for collinear sites; ArgumentError for lambda < 0.
TpsModel fit_tps(const Coords& sites, const Coords& targets, double lambda);

/// n x n hat matrix mapping targets to fitted values at the sites.
Eigen::MatrixXd tps_hat_matrix(const Coords& sites, double lambda);

/// trace of the hat matrix: n at lambda = 0, tends to 3 as lambda grows.
double tps_effective_dof(const Coords& sites, double lambda);

/// lambda with tps_effective_dof(sites, lambda) = dof (3 < dof < n), by
/// bisection in log lambda.
double tps_lambda_for_dof(const Coords& sites, double dof);

/// Fraction of sign changes of the numeric Jacobian determinant over a
/// g x g grid on the box: true when both signs occur.
bool tps_folds(const TpsModel& model, double x1_min, double x1_max, double x2_min, double x2_max,
               int g = 100);

struct BsplineFitOptions {
  /// Constraint margin; unset means default_margin(grid).
  std::optional<double> epsilon;
  /// Ridge weight; unset means 1e-8 n when K1 K2 > n, else 0.
  std::optional<double> ridge;
  int max_outer = 100;
  /// Optional feasible starting coefficients (used when feasible and better
  /// than the affine start).
  std::optional<CoefPair> warm_start;
};

struct BsplineFit {
  CoefPair coef;
  double objective = 0.0;        // at the returned coefficients
  double start_objective = 0.0;  // at the feasible start
  double margin = 0.0;           // smallest corner functional
  double epsilon = 0.0;
  double ridge = 0.0;
  std::vector<double> trace;     // objective of accepted iterates
  int iterations = 0;
  bool converged = false;
};

/// |targets - (W vec T1, W vec T2)|_F^2 + ridge (|T1|^2 + |T2|^2).
double bspline_objective(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                         const CoefPair& coef, double ridge);

/// Plain least squares (no folding constraints), minimum-norm when
/// underdetermined.
CoefPair fit_bspline_unconstrained(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                                   double ridge = 0.0);

/// Least squares subject to every corner functional >= epsilon. Iterates
/// remain feasible and the objective never increases across accepted
/// iterates. Throws InfeasibleError when no feasible start exists.
BsplineFit fit_bspline_constrained(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                                   const BsplineFitOptions& options = {});

}  // namespace sdm
