#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "sdm/basis.hpp"
#include "sdm/deformation.hpp"

namespace sdm::test {

// Identity coefficients plus uniform noise of the given amplitude (in units
// of the knot spacing).
inline CoefPair perturbed_coefs(const KnotGrid& grid, std::mt19937_64& rng, double amplitude) {
  CoefPair c = identity_coefs(grid);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double t1 = grid.spacing(Axis::X1), t2 = grid.spacing(Axis::X2);
  for (Eigen::Index i = 0; i < c.theta1.size(); ++i) {
    c.theta1(i) += amplitude * t1 * u(rng);
    c.theta2(i) += amplitude * t2 * u(rng);
  }
  return c;
}

inline CoefPair random_coefs(const KnotGrid& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  CoefPair c{Eigen::MatrixXd(grid.count(Axis::X1), grid.count(Axis::X2)),
             Eigen::MatrixXd(grid.count(Axis::X1), grid.count(Axis::X2))};
  for (Eigen::Index i = 0; i < c.theta1.size(); ++i) {
    c.theta1(i) = n(rng);
    c.theta2(i) = n(rng);
  }
  return c;
}

inline Point random_point(const KnotGrid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {grid.lower(Axis::X1) + u(rng) * (grid.upper(Axis::X1) - grid.lower(Axis::X1)),
          grid.lower(Axis::X2) + u(rng) * (grid.upper(Axis::X2) - grid.lower(Axis::X2))};
}

inline Coords random_coords(int n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Coords x(n, 2);
  for (int i = 0; i < n; ++i) x.row(i) << u(rng), u(rng);
  return x;
}

// Central finite-difference Jacobian determinant of a point map.
template <class Map>
double fd_jacobian_det(const Map& f, const Point& x, double h = 1e-6) {
  Eigen::Matrix2d j;
  for (int a = 0; a < 2; ++a) {
    Point e = Point::Zero();
    e[a] = h;
    j.col(a) = (f(x + e) - f(x - e)) / (2.0 * h);
  }
  return j.determinant();
}

}  // namespace sdm::test
