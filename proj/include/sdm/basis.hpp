#pragma once

// Degree-1 B-spline bases on equally spaced knots and their tensor products.
//
// Each axis [lo, hi] carries K hat functions centred on the knots
// lo + m * tau, m = 0..K-1, with tau = (hi - lo) / (K - 1).  Cells are the
// half-open intervals [m tau, (m+1) tau) except the last, which is closed.
// Derivatives are right-hand at interior knots and left-hand at the upper
// boundary, which is the same as "the derivative inside the owning cell".

#include <array>
#include <span>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sdm/types.hpp"

namespace sdm {

enum class Axis { X1 = 0, X2 = 1 };

class KnotGrid {
 public:
  KnotGrid(double x1_min, double x1_max, double x2_min, double x2_max, int k1, int k2);

  /// Square grid with k knots per axis on [0,1]^2.
  static KnotGrid unit_square(int k) { return KnotGrid(0.0, 1.0, 0.0, 1.0, k, k); }

  int count(Axis a) const { return k_[idx(a)]; }
  int cells(Axis a) const { return k_[idx(a)] - 1; }
  double lower(Axis a) const { return lo_[idx(a)]; }
  double upper(Axis a) const { return hi_[idx(a)]; }
  double spacing(Axis a) const { return tau_[idx(a)]; }
  double knot(Axis a, int m) const { return lo_[idx(a)] + m * tau_[idx(a)]; }

  /// Number of tensor-product basis functions, K1 * K2.
  int basis_size() const { return k_[0] * k_[1]; }
  /// Column of basis (k1, k2) in vec(Theta) ordering (column-major).
  int flat_index(int k1, int k2) const { return k1 + k_[0] * k2; }

  bool contains(const Point& x) const;
  bool contains(Axis a, double x) const;

  /// Cell index of x on the axis; throws DomainError outside [lower, upper].
  int cell_of(Axis a, double x) const;

  /// Length of the bounding-box diagonal.
  double diameter() const;

  bool operator==(const KnotGrid&) const = default;

 private:
  static constexpr int idx(Axis a) { return static_cast<int>(a); }

  std::array<double, 2> lo_{}, hi_{}, tau_{};
  std::array<int, 2> k_{};
};

/// The two (possibly) nonzero basis values on an axis: bases `first` and
/// `first + 1`, where `first` is the owning cell.
struct LocalBasis {
  int first = 0;
  double lower = 0.0;  // B_first(x)
  double upper = 0.0;  // B_{first+1}(x)
  double d_lower = 0.0;
  double d_upper = 0.0;
  double u = 0.0;      // local coordinate (x - knot(first)) / tau in [0,1]
};

LocalBasis local_basis(const KnotGrid& grid, Axis axis, double x);

/// All K basis values B_1(x)..B_K(x).
Eigen::VectorXd eval_basis(const KnotGrid& grid, Axis axis, double x);

/// All K derivative values, one-sided per the cell convention.
Eigen::VectorXd eval_basis_deriv(const KnotGrid& grid, Axis axis, double x);

/// Sparse n x (K1 K2) matrix whose row i is b2(x_i2) (kron) b1(x_i1).
Eigen::SparseMatrix<double> design_matrix(const KnotGrid& grid, const Coords& sites);

}  // namespace sdm
