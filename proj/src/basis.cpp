#include "sdm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "sdm/errors.hpp"

namespace sdm {

namespace {

const char* axis_name(Axis a) { return a == Axis::X1 ? "x1" : "x2"; }

// Rounding slack when deciding domain membership.
double slack(double lo, double hi) { return 1e-12 * std::max(1.0, hi - lo); }

}  // namespace

KnotGrid::KnotGrid(double x1_min, double x1_max, double x2_min, double x2_max, int k1, int k2)
    : lo_{x1_min, x2_min}, hi_{x1_max, x2_max}, k_{k1, k2} {
  if (k1 < 2 || k2 < 2) {
    throw ArgumentError("KnotGrid: basis counts must be >= 2 per axis");
  }
  if (!(x1_min < x1_max) || !(x2_min < x2_max)) {
    throw ArgumentError("KnotGrid: domain bounds must be strictly ordered per axis");
  }
  for (int a = 0; a < 2; ++a) {
    tau_[a] = (hi_[a] - lo_[a]) / (k_[a] - 1);
  }
}

bool KnotGrid::contains(Axis a, double x) const {
  const double s = slack(lower(a), upper(a));
  return x >= lower(a) - s && x <= upper(a) + s;
}

bool KnotGrid::contains(const Point& x) const {
  return contains(Axis::X1, x.x()) && contains(Axis::X2, x.y());
}

int KnotGrid::cell_of(Axis a, double x) const {
  if (!contains(a, x)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "coordinate " << axis_name(a) << " = " << x << " outside domain [" << lower(a) << ", "
        << upper(a) << "]";
    throw DomainError(msg.str());
  }
  const int last = cells(a) - 1;
  const int c = static_cast<int>(std::floor((x - lower(a)) / spacing(a)));
  return std::clamp(c, 0, last);
}

double KnotGrid::diameter() const { return std::hypot(hi_[0] - lo_[0], hi_[1] - lo_[1]); }

LocalBasis local_basis(const KnotGrid& grid, Axis axis, double x) {
  LocalBasis lb;
  lb.first = grid.cell_of(axis, x);
  const double tau = grid.spacing(axis);
  lb.u = std::clamp((x - grid.knot(axis, lb.first)) / tau, 0.0, 1.0);
  lb.lower = 1.0 - lb.u;
  lb.upper = lb.u;
  lb.d_lower = -1.0 / tau;
  lb.d_upper = 1.0 / tau;
  return lb;
}

Eigen::VectorXd eval_basis(const KnotGrid& grid, Axis axis, double x) {
  const LocalBasis lb = local_basis(grid, axis, x);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(grid.count(axis));
  b[lb.first] = lb.lower;
  b[lb.first + 1] = lb.upper;
  return b;
}

Eigen::VectorXd eval_basis_deriv(const KnotGrid& grid, Axis axis, double x) {
  const LocalBasis lb = local_basis(grid, axis, x);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(grid.count(axis));
  d[lb.first] = lb.d_lower;
  d[lb.first + 1] = lb.d_upper;
  return d;
}

Eigen::SparseMatrix<double> design_matrix(const KnotGrid& grid, const Coords& sites) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(4 * sites.rows());
  for (Eigen::Index i = 0; i < sites.rows(); ++i) {
    LocalBasis b1, b2;
    try {
      b1 = local_basis(grid, Axis::X1, sites(i, 0));
      b2 = local_basis(grid, Axis::X2, sites(i, 1));
    } catch (const DomainError& e) {
      throw DomainError("site " + std::to_string(i) + ": " + e.what());
    }
    const double v1[2] = {b1.lower, b1.upper};
    const double v2[2] = {b2.lower, b2.upper};
    for (int q = 0; q < 2; ++q) {
      for (int p = 0; p < 2; ++p) {
        const double w = v1[p] * v2[q];
        if (w != 0.0) {
          entries.emplace_back(static_cast<int>(i), grid.flat_index(b1.first + p, b2.first + q), w);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> w(sites.rows(), grid.basis_size());
  w.setFromTriplets(entries.begin(), entries.end());
  return w;
}

}  // namespace sdm
