#pragma once

// Tensor-product degree-1 B-spline deformation f = (f1, f2) of the plane,
// its Jacobian determinant as a skew bilinear form in the coefficients, and
// the per-cell corner functionals that certify |J| > 0.

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sdm/basis.hpp"
#include "sdm/types.hpp"

namespace sdm {

/// Coefficient matrices Theta_1, Theta_2, each K1 x K2; entry (k1, k2) is
/// the D-space control point of basis B_k1(x1) B_k2(x2).
struct CoefPair {
  Eigen::MatrixXd theta1;
  Eigen::MatrixXd theta2;

  /// Control point (theta1(k1,k2), theta2(k1,k2)).
  Point control(int k1, int k2) const { return {theta1(k1, k2), theta2(k1, k2)}; }

  bool matches(const KnotGrid& grid) const {
    return theta1.rows() == grid.count(Axis::X1) && theta1.cols() == grid.count(Axis::X2) &&
           theta2.rows() == theta1.rows() && theta2.cols() == theta1.cols();
  }
};

/// Control points at the knots themselves: f(x) = x.
CoefPair identity_coefs(const KnotGrid& grid);

/// Coefficients reproducing the affine map x -> M x + b exactly.
CoefPair affine_coefs(const KnotGrid& grid, const Eigen::Matrix2d& m, const Eigen::Vector2d& b);

/// Applies y -> scale * R y + shift to every control point, hence to f.
CoefPair transform_coefs(const CoefPair& coef, const Eigen::Matrix2d& rotation, double scale,
                         const Eigen::Vector2d& shift);

/// Stacks (vec(Theta_1); vec(Theta_2)) into a 2 K1 K2 vector, and back.
Eigen::VectorXd pack(const CoefPair& coef);
CoefPair unpack(const KnotGrid& grid, const Eigen::VectorXd& x);

class DeformationMap {
 public:
  DeformationMap(KnotGrid grid, CoefPair coef);

  const KnotGrid& grid() const { return grid_; }
  const CoefPair& coef() const { return coef_; }

  /// f(x) = (b1' Theta_1 b2, b1' Theta_2 b2).
  Point operator()(const Point& x) const;
  Coords apply(const Coords& sites) const;

  /// dfl/dxm as a 2x2 matrix, one-sided at knots per the basis convention.
  Eigen::Matrix2d jacobian(const Point& x) const;
  double jacobian_det(const Point& x) const;

 private:
  KnotGrid grid_;
  CoefPair coef_;
};

/// The six distinct entries (a..f) of the 4x4 skew block of A for local cell
/// coordinates (u, v) in [0,1]^2, in the basis order
/// (k1,k2), (k1+1,k2), (k1,k2+1), (k1+1,k2+1).
std::array<double, 6> skew_block_entries(double u, double v, double tau1, double tau2);
Eigen::Matrix4d skew_block(double u, double v, double tau1, double tau2);

/// Sparse skew-symmetric (K1K2 x K1K2) A(x) with |J|(x) = vec(T1)' A vec(T2).
Eigen::SparseMatrix<double> assemble_A(const KnotGrid& grid, const Point& x);

/// |J| at one corner of one knot cell, as a bilinear functional of the
/// coefficients: value = t1_loc' block t2_loc over the four cell bases.
struct CornerConstraint {
  int cell1 = 0;
  int cell2 = 0;
  int corner = 0;  // 0:(lo,lo) 1:(hi,lo) 2:(lo,hi) 3:(hi,hi)
  std::array<int, 4> basis{};  // flat vec(Theta) indices
  Eigen::Matrix4d block;

  double operator()(const CoefPair& coef) const;
  double operator()(const Eigen::VectorXd& packed) const;
  /// Gradient w.r.t. the packed vector, written into `grad` (size 2 K1 K2).
  void gradient(const Eigen::VectorXd& packed, Eigen::Ref<Eigen::VectorXd> grad) const;
};

/// All 4 (K1-1)(K2-1) corner functionals, cells in row-major order
/// (x1 cell outer, x2 cell inner), corners innermost.
std::vector<CornerConstraint> corner_constraints(const KnotGrid& grid);

/// Exact min of |J| over the domain (|J| is affine within each cell).
double min_jacobian(const DeformationMap& map);
double min_jacobian(const KnotGrid& grid, const CoefPair& coef);

/// Default constraint margin: 1e-3 times the median corner value of the
/// identity map on `grid` (which is 1 for every grid).
double default_margin(const KnotGrid& grid);

}  // namespace sdm
