#pragma once

// Multidimensional scaling pieces: classical (Torgerson) scaling, isotonic
// regression by pool-adjacent-violators, Kruskal stress, Procrustes
// alignment, and the alternating smoother/variogram/MDS loop that produces
// an initial D-space configuration from sample dispersions.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sdm/covariance.hpp"
#include "sdm/types.hpp"

namespace sdm {

/// Planar embedding from an n x n distance matrix via the top two
/// eigenpairs of -1/2 J D^2 J. Result is centred. Throws NumericalError if
/// the leading eigenvalue is not positive.
Coords classical_mds(const Eigen::MatrixXd& distances);

/// Least-squares nondecreasing fit of `h` ordered by `d2` (ties in d2 share a
/// fitted value). Returned values are in the input order.
std::vector<double> isotonic_fit(std::span<const double> d2, std::span<const double> h);

/// sqrt(sum (delta - h*)^2 / sum h*^2). Throws ArgumentError if h* is all zero.
double kruskal_stress(std::span<const double> delta, std::span<const double> hstar);

/// x -> scale * R x + shift.
struct Similarity {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  double scale = 1.0;
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();

  Coords apply(const Coords& y) const;
};

/// Least-squares similarity taking `from` onto `to`. With
/// `allow_reflection = false`, R is a proper rotation.
Similarity procrustes(const Coords& from, const Coords& to, bool allow_scale, bool allow_reflection);

/// Root-mean-square point distance between two configurations.
double rms_distance(const Coords& a, const Coords& b);

/// Maps target coordinates at the fixed geographic sites to smoothed values.
using CoordinateSmoother = std::function<Coords(const Coords& targets)>;

struct SgOptions {
  int max_iter = 50;
  double tol = 1e-6;
};

struct SgResult {
  Coords configuration;          // aligned to the sites (full Procrustes)
  std::vector<double> stress;    // stress per configuration, starting at step 1
  VariogramModel variogram;      // last fitted variogram (unset if max_iter = 0)
  int iterations = 0;
  bool converged = false;
};

/// Iterates: smooth the configuration over the sites, fit a variogram on
/// (smoothed distances, d2), rebuild the configuration by classical scaling
/// of the inverted variogram. Stops on relative stress change < tol,
/// max_iter, or two consecutive stress increases (returning the best
/// configuration seen). Requires n >= 4.
SgResult sg_initialize(const DispersionMatrix& dispersions, const Coords& sites,
                       const CoordinateSmoother& smoother, const SgOptions& options = {});

/// Non-metric stress of a configuration against dispersions: distances
/// are compared with their isotonic regression on d2.
double nonmetric_stress(const DispersionMatrix& dispersions, const Coords& y);

}  // namespace sdm
