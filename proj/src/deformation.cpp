#include "sdm/deformation.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "sdm/errors.hpp"

namespace sdm {

CoefPair identity_coefs(const KnotGrid& grid) {
  return affine_coefs(grid, Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
}

CoefPair affine_coefs(const KnotGrid& grid, const Eigen::Matrix2d& m, const Eigen::Vector2d& b) {
  const int k1 = grid.count(Axis::X1);
  const int k2 = grid.count(Axis::X2);
  CoefPair c{Eigen::MatrixXd(k1, k2), Eigen::MatrixXd(k1, k2)};
  for (int j = 0; j < k2; ++j) {
    for (int i = 0; i < k1; ++i) {
      const Eigen::Vector2d y = m * Eigen::Vector2d(grid.knot(Axis::X1, i), grid.knot(Axis::X2, j)) + b;
      c.theta1(i, j) = y.x();
      c.theta2(i, j) = y.y();
    }
  }
  return c;
}

CoefPair transform_coefs(const CoefPair& coef, const Eigen::Matrix2d& rotation, double scale,
                         const Eigen::Vector2d& shift) {
  CoefPair out = coef;
  for (Eigen::Index j = 0; j < coef.theta1.cols(); ++j) {
    for (Eigen::Index i = 0; i < coef.theta1.rows(); ++i) {
      const Eigen::Vector2d y = scale * (rotation * Eigen::Vector2d(coef.theta1(i, j), coef.theta2(i, j))) + shift;
      out.theta1(i, j) = y.x();
      out.theta2(i, j) = y.y();
    }
  }
  return out;
}

Eigen::VectorXd pack(const CoefPair& coef) {
  const Eigen::Index n = coef.theta1.size();
  Eigen::VectorXd x(2 * n);
  x.head(n) = coef.theta1.reshaped();
  x.tail(n) = coef.theta2.reshaped();
  return x;
}

CoefPair unpack(const KnotGrid& grid, const Eigen::VectorXd& x) {
  const int k1 = grid.count(Axis::X1);
  const int k2 = grid.count(Axis::X2);
  const int n = k1 * k2;
  if (x.size() != 2 * n) {
    throw ArgumentError("unpack: vector length does not match the knot grid");
  }
  return {x.head(n).reshaped(k1, k2), x.tail(n).reshaped(k1, k2)};
}

DeformationMap::DeformationMap(KnotGrid grid, CoefPair coef) : grid_(std::move(grid)), coef_(std::move(coef)) {
  if (!coef_.matches(grid_)) {
    throw ArgumentError("DeformationMap: coefficient dimensions do not match the knot grid");
  }
}

Point DeformationMap::operator()(const Point& x) const {
  const LocalBasis b1 = local_basis(grid_, Axis::X1, x.x());
  const LocalBasis b2 = local_basis(grid_, Axis::X2, x.y());
  const double w1[2] = {b1.lower, b1.upper};
  const double w2[2] = {b2.lower, b2.upper};
  Point y = Point::Zero();
  for (int q = 0; q < 2; ++q) {
    for (int p = 0; p < 2; ++p) {
      const double w = w1[p] * w2[q];
      y += w * coef_.control(b1.first + p, b2.first + q);
    }
  }
  return y;
}

Coords DeformationMap::apply(const Coords& sites) const {
  Coords out(sites.rows(), 2);
  for (Eigen::Index i = 0; i < sites.rows(); ++i) {
    out.row(i) = (*this)(sites.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::Matrix2d DeformationMap::jacobian(const Point& x) const {
  const LocalBasis b1 = local_basis(grid_, Axis::X1, x.x());
  const LocalBasis b2 = local_basis(grid_, Axis::X2, x.y());
  const double w1[2] = {b1.lower, b1.upper};
  const double w2[2] = {b2.lower, b2.upper};
  const double d1[2] = {b1.d_lower, b1.d_upper};
  const double d2[2] = {b2.d_lower, b2.d_upper};
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  for (int q = 0; q < 2; ++q) {
    for (int p = 0; p < 2; ++p) {
      const Point c = coef_.control(b1.first + p, b2.first + q);
      j.col(0) += d1[p] * w2[q] * c;
      j.col(1) += w1[p] * d2[q] * c;
    }
  }
  return j;
}

double DeformationMap::jacobian_det(const Point& x) const { return jacobian(x).determinant(); }

std::array<double, 6> skew_block_entries(double u, double v, double tau1, double tau2) {
  const double s = 1.0 / (tau1 * tau2);
  return {s * (1.0 - v), -s * (1.0 - u), s * (v - u), s * (1.0 - u - v), s * u, -s * v};
}

Eigen::Matrix4d skew_block(double u, double v, double tau1, double tau2) {
  const auto [a, b, c, d, e, f] = skew_block_entries(u, v, tau1, tau2);
  Eigen::Matrix4d m;
  m << 0, a, b, c,
      -a, 0, d, e,
      -b, -d, 0, f,
      -c, -e, -f, 0;
  return m;
}

namespace {

std::array<int, 4> cell_bases(const KnotGrid& grid, int c1, int c2) {
  return {grid.flat_index(c1, c2), grid.flat_index(c1 + 1, c2), grid.flat_index(c1, c2 + 1),
          grid.flat_index(c1 + 1, c2 + 1)};
}

}  // namespace

Eigen::SparseMatrix<double> assemble_A(const KnotGrid& grid, const Point& x) {
  const LocalBasis b1 = local_basis(grid, Axis::X1, x.x());
  const LocalBasis b2 = local_basis(grid, Axis::X2, x.y());
  const Eigen::Matrix4d block =
      skew_block(b1.u, b2.u, grid.spacing(Axis::X1), grid.spacing(Axis::X2));
  const auto idx = cell_bases(grid, b1.first, b2.first);
  std::vector<Eigen::Triplet<double>> entries;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (r != c) entries.emplace_back(idx[r], idx[c], block(r, c));
    }
  }
  Eigen::SparseMatrix<double> a(grid.basis_size(), grid.basis_size());
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

double CornerConstraint::operator()(const CoefPair& coef) const {
  Eigen::Vector4d t1, t2;
  for (int a = 0; a < 4; ++a) {
    t1[a] = coef.theta1.reshaped()[basis[a]];
    t2[a] = coef.theta2.reshaped()[basis[a]];
  }
  return t1.dot(block * t2);
}

double CornerConstraint::operator()(const Eigen::VectorXd& packed) const {
  const Eigen::Index n = packed.size() / 2;
  Eigen::Vector4d t1, t2;
  for (int a = 0; a < 4; ++a) {
    t1[a] = packed[basis[a]];
    t2[a] = packed[n + basis[a]];
  }
  return t1.dot(block * t2);
}

void CornerConstraint::gradient(const Eigen::VectorXd& packed, Eigen::Ref<Eigen::VectorXd> grad) const {
  const Eigen::Index n = packed.size() / 2;
  Eigen::Vector4d t1, t2;
  for (int a = 0; a < 4; ++a) {
    t1[a] = packed[basis[a]];
    t2[a] = packed[n + basis[a]];
  }
  const Eigen::Vector4d g1 = block * t2;
  const Eigen::Vector4d g2 = block.transpose() * t1;
  grad.setZero();
  for (int a = 0; a < 4; ++a) {
    grad[basis[a]] = g1[a];
    grad[n + basis[a]] = g2[a];
  }
}

std::vector<CornerConstraint> corner_constraints(const KnotGrid& grid) {
  static constexpr double kU[4] = {0.0, 1.0, 0.0, 1.0};
  static constexpr double kV[4] = {0.0, 0.0, 1.0, 1.0};
  const double tau1 = grid.spacing(Axis::X1);
  const double tau2 = grid.spacing(Axis::X2);
  std::vector<CornerConstraint> out;
  out.reserve(4 * grid.cells(Axis::X1) * grid.cells(Axis::X2));
  for (int i = 0; i < grid.cells(Axis::X1); ++i) {
    for (int j = 0; j < grid.cells(Axis::X2); ++j) {
      for (int k = 0; k < 4; ++k) {
        CornerConstraint c;
        c.cell1 = i;
        c.cell2 = j;
        c.corner = k;
        c.basis = cell_bases(grid, i, j);
        c.block = skew_block(kU[k], kV[k], tau1, tau2);
        out.push_back(c);
      }
    }
  }
  return out;
}

double min_jacobian(const KnotGrid& grid, const CoefPair& coef) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : corner_constraints(grid)) m = std::min(m, c(coef));
  return m;
}

double min_jacobian(const DeformationMap& map) { return min_jacobian(map.grid(), map.coef()); }

double default_margin(const KnotGrid& grid) {
  const CoefPair id = identity_coefs(grid);
  std::vector<double> values;
  for (const auto& c : corner_constraints(grid)) values.push_back(c(id));
  std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
  return 1e-3 * values[values.size() / 2];
}

}  // namespace sdm
