#include "sdm/smoothers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>

#include "sdm/errors.hpp"

namespace sdm {

// ---------------------------------------------------------------------------
// Thin-plate splines

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

namespace {

Eigen::MatrixXd kernel_matrix(const Coords& a, const Coords& b) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) k(i, j) = tps_kernel((a.row(i) - b.row(j)).norm());
  }
  return k;
}

Eigen::MatrixXd affine_design(const Coords& x) {
  Eigen::MatrixXd p(x.rows(), 3);
  p.col(0).setOnes();
  p.rightCols(2) = x;
  return p;
}

// LU of the bordered TPS system after checking the affine block has rank 3.
Eigen::PartialPivLU<Eigen::MatrixXd> tps_system(const Coords& sites, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("fit_tps: lambda must be >= 0");
  const Eigen::Index n = sites.rows();
  if (n < 3) throw NumericalError("fit_tps: need at least 3 sites");
  const Eigen::MatrixXd p = affine_design(sites);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw NumericalError("fit_tps: sites are collinear (singular system)");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 3, n + 3);
  m.topLeftCorner(n, n) = kernel_matrix(sites, sites);
  m.topLeftCorner(n, n).diagonal().array() += static_cast<double>(n) * lambda;
  m.topRightCorner(n, 3) = p;
  m.bottomLeftCorner(3, n) = p.transpose();
  return Eigen::PartialPivLU<Eigen::MatrixXd>(m);
}

}  // namespace

Point TpsModel::operator()(const Point& x) const {
  Point y = alpha.row(0).transpose() + x.x() * alpha.row(1).transpose() + x.y() * alpha.row(2).transpose();
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    y += tps_kernel((x - centers.row(i).transpose()).norm()) * theta.row(i).transpose();
  }
  return y;
}

Coords TpsModel::apply(const Coords& x) const {
  Coords out = kernel_matrix(x, centers) * theta + affine_design(x) * alpha;
  return out;
}

double TpsModel::numeric_jacobian_det(const Point& x, double h) const {
  const Point e1(h, 0.0), e2(0.0, h);
  const Point d1 = ((*this)(x + e1) - (*this)(x - e1)) / (2.0 * h);
  const Point d2 = ((*this)(x + e2) - (*this)(x - e2)) / (2.0 * h);
  return d1.x() * d2.y() - d2.x() * d1.y();
}

TpsModel fit_tps(const Coords& sites, const Coords& targets, double lambda) {
  if (targets.rows() != sites.rows()) throw ArgumentError("fit_tps: targets do not match sites");
  const Eigen::Index n = sites.rows();
  const auto lu = tps_system(sites, lambda);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  rhs.topRows(n) = targets;
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw NumericalError("fit_tps: singular system");
  TpsModel model;
  model.theta = sol.topRows(n);
  model.alpha = sol.bottomRows(3);
  model.centers = sites;
  model.lambda = lambda;
  return model;
}

Eigen::MatrixXd tps_hat_matrix(const Coords& sites, double lambda) {
  const Eigen::Index n = sites.rows();
  const auto lu = tps_system(sites, lambda);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, n);
  rhs.topRows(n).setIdentity();
  const Eigen::MatrixXd sol = lu.solve(rhs);
  return kernel_matrix(sites, sites) * sol.topRows(n) + affine_design(sites) * sol.bottomRows(3);
}

double tps_effective_dof(const Coords& sites, double lambda) { return tps_hat_matrix(sites, lambda).trace(); }

double tps_lambda_for_dof(const Coords& sites, double dof) {
  const double n = static_cast<double>(sites.rows());
  if (!(dof > 3.0) || !(dof < n)) throw ArgumentError("tps_lambda_for_dof: need 3 < dof < n");
  double lo = std::log(1e-12), hi = std::log(1e12);
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tps_effective_dof(sites, std::exp(mid)) > dof) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

bool tps_folds(const TpsModel& model, double x1_min, double x1_max, double x2_min, double x2_max, int g) {
  bool pos = false, neg = false;
  const double h = 1e-6 * std::max(x1_max - x1_min, x2_max - x2_min);
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      const Point x(x1_min + (x1_max - x1_min) * a / (g - 1), x2_min + (x2_max - x2_min) * b / (g - 1));
      const double j = model.numeric_jacobian_det(x, h);
      pos = pos || j > 0.0;
      neg = neg || j < 0.0;
    }
  }
  return pos && neg;
}

// ---------------------------------------------------------------------------
// Constrained tensor-product B-spline fit

double bspline_objective(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                         const CoefPair& coef, double ridge) {
  const Eigen::SparseMatrix<double> w = design_matrix(grid, sites);
  const Eigen::VectorXd r1 = targets.col(0) - w * coef.theta1.reshaped();
  const Eigen::VectorXd r2 = targets.col(1) - w * coef.theta2.reshaped();
  return r1.squaredNorm() + r2.squaredNorm() + ridge * (coef.theta1.squaredNorm() + coef.theta2.squaredNorm());
}

CoefPair fit_bspline_unconstrained(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                                   double ridge) {
  const Eigen::MatrixXd w = Eigen::MatrixXd(design_matrix(grid, sites));
  Eigen::MatrixXd x;
  if (ridge > 0.0) {
    Eigen::MatrixXd g = w.transpose() * w;
    g.diagonal().array() += ridge;
    x = g.ldlt().solve(w.transpose() * targets);
  } else {
    x = w.completeOrthogonalDecomposition().solve(Eigen::MatrixXd(targets));
  }
  const int k1 = grid.count(Axis::X1), k2 = grid.count(Axis::X2);
  return {x.col(0).reshaped(k1, k2), x.col(1).reshaped(k1, k2)};
}

namespace {

class ConstrainedLeastSquares {
 public:
  ConstrainedLeastSquares(const KnotGrid& grid, const Coords& sites, const Coords& targets, double ridge,
                          double epsilon)
      : w_(design_matrix(grid, sites)), targets_(targets), ridge_(ridge), epsilon_(epsilon),
        constraints_(corner_constraints(grid)), n_(grid.basis_size()) {
    gram_ = Eigen::MatrixXd(w_.transpose() * w_);
    gram_.diagonal().array() += ridge;
    wty_ = w_.transpose() * targets;
  }

  int dim() const { return 2 * n_; }
  std::size_t constraint_count() const { return constraints_.size(); }

  double objective(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd r1 = targets_.col(0) - w_ * x.head(n_);
    const Eigen::VectorXd r2 = targets_.col(1) - w_ * x.tail(n_);
    return r1.squaredNorm() + r2.squaredNorm() + ridge_ * x.squaredNorm();
  }

  double min_constraint(const Eigen::VectorXd& x) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : constraints_) m = std::min(m, c(x));
    return m;
  }

  // f(x) - mu * sum log(c_m(x) - epsilon); +inf outside the strict interior.
  double barrier(const Eigen::VectorXd& x, double mu, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    double value = objective(x);
    if (grad) {
      grad->resize(2 * n_);
      grad->head(n_) = 2.0 * (gram_ * x.head(n_) - wty_.col(0));
      grad->tail(n_) = 2.0 * (gram_ * x.tail(n_) - wty_.col(1));
    }
    if (hess) {
      hess->setZero(2 * n_, 2 * n_);
      hess->topLeftCorner(n_, n_) = 2.0 * gram_;
      hess->bottomRightCorner(n_, n_) = 2.0 * gram_;
    }
    for (const CornerConstraint& c : constraints_) {
      std::array<int, 8> idx{};
      Eigen::Vector4d t1, t2;
      for (int a = 0; a < 4; ++a) {
        idx[a] = c.basis[a];
        idx[4 + a] = n_ + c.basis[a];
        t1[a] = x[idx[a]];
        t2[a] = x[idx[4 + a]];
      }
      const double slack = t1.dot(c.block * t2) - epsilon_;
      if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
      value -= mu * std::log(slack);
      if (!grad && !hess) continue;
      Eigen::Matrix<double, 8, 1> gc;
      gc.head<4>() = c.block * t2;
      gc.tail<4>() = c.block.transpose() * t1;
      const double w = mu / slack;
      if (grad) {
        for (int a = 0; a < 8; ++a) (*grad)[idx[a]] -= w * gc[a];
      }
      if (hess) {
        const double w2 = w / slack;
        for (int a = 0; a < 8; ++a) {
          for (int b = 0; b < 8; ++b) (*hess)(idx[a], idx[b]) += w2 * gc[a] * gc[b];
        }
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            (*hess)(idx[a], idx[4 + b]) -= w * c.block(a, b);
            (*hess)(idx[4 + b], idx[a]) -= w * c.block(a, b);
          }
        }
      }
    }
    return value;
  }

  // Damped Newton on the barrier from a strictly feasible x; returns true on
  // a small Newton decrement or when no representable descent remains. A diagonal shift handles indefinite Hessians and
  // seeds the next step.
  bool minimize_barrier(Eigen::VectorXd& x, double mu) const {
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    double value = barrier(x, mu, &g, &h);
    double shift = 0.0;
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd step;
      const double hscale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      shift = shift < 1e-10 * hscale ? 0.0 : 0.1 * shift;
      for (int attempt = 0; attempt < 30; ++attempt) {
        Eigen::MatrixXd hs = h;
        if (shift > 0.0) hs.diagonal().array() += shift;
        Eigen::LLT<Eigen::MatrixXd> llt(hs);
        if (llt.info() == Eigen::Success) {
          step = llt.solve(-g);
          if (step.allFinite() && step.dot(g) < 0.0) break;
        }
        step.resize(0);
        shift = shift == 0.0 ? 1e-8 * hscale : shift * 10.0;
      }
      if (step.size() == 0) step = -g / hscale;
      const double slope = step.dot(g);
      if (-slope <= 1e-10 * mu + 1e-14 * (1.0 + std::abs(value))) return true;
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Eigen::VectorXd trial = x + t * step;
        const double v = barrier(trial, mu, nullptr, nullptr);
        if (v <= value + 1e-4 * t * slope) {
          moved = v < value;
          x = trial;
          break;
        }
      }
      if (!moved) return true;
      value = barrier(x, mu, &g, &h);
    }
    return false;
  }

 private:
  Eigen::SparseMatrix<double> w_;
  Coords targets_;
  double ridge_;
  double epsilon_;
  std::vector<CornerConstraint> constraints_;
  int n_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd wty_;
};

// Affine least-squares fit of the targets lifted to coefficients, with the
// linear part scaled up if its determinant is below the margin.
CoefPair affine_start(const KnotGrid& grid, const Coords& sites, const Coords& targets, double epsilon) {
  const Eigen::Index n = sites.rows();
  Eigen::MatrixXd p(n, 3);
  p.col(0).setOnes();
  p.rightCols(2) = sites;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw InfeasibleError("fit_bspline_constrained: sites are collinear, no affine start");
  const Eigen::Matrix<double, 3, 2> beta = qr.solve(Eigen::MatrixXd(targets));
  Eigen::Matrix2d m = beta.bottomRows(2).transpose();
  Eigen::Vector2d b = beta.row(0).transpose();
  const double det = m.determinant();
  if (!(det > 0.0)) {
    throw InfeasibleError("fit_bspline_constrained: affine part of the targets is orientation-reversing or degenerate");
  }
  const double wanted = 1.01 * epsilon;
  if (det < wanted) {
    const Eigen::Vector2d centroid = sites.colwise().mean().transpose();
    const Eigen::Vector2d image = m * centroid + b;
    m *= std::sqrt(wanted / det);
    b = image - m * centroid;
  }
  return affine_coefs(grid, m, b);
}

}  // namespace

BsplineFit fit_bspline_constrained(const KnotGrid& grid, const Coords& sites, const Coords& targets,
                                   const BsplineFitOptions& options) {
  if (targets.rows() != sites.rows()) throw ArgumentError("fit_bspline_constrained: targets do not match sites");
  BsplineFit out;
  out.epsilon = options.epsilon.value_or(default_margin(grid));
  out.ridge = options.ridge.value_or(grid.basis_size() > sites.rows() ? 1e-8 * static_cast<double>(sites.rows())
                                                                       : 0.0);
  const double eps = out.epsilon;
  const ConstrainedLeastSquares problem(grid, sites, targets, out.ridge, eps);

  Eigen::VectorXd x = pack(affine_start(grid, sites, targets, eps));
  double fx = problem.objective(x);
  if (options.warm_start && options.warm_start->matches(grid)) {
    const Eigen::VectorXd w = pack(*options.warm_start);
    const double fw = problem.objective(w);
    if (problem.min_constraint(w) > eps && fw < fx) {
      x = w;
      fx = fw;
    }
  }
  out.start_objective = fx;
  out.trace.push_back(fx);

  // Barrier path: mu shrinks tenfold per outer step until the duality-gap
  // bound mu * (number of constraints) is negligible against the objective.
  const double m = static_cast<double>(problem.constraint_count());
  double mu = std::max(1e-2 * fx, 1e-12) / m;
  Eigen::VectorXd z = x;
  for (int outer = 0; outer < options.max_outer; ++outer) {
    out.iterations = outer + 1;
    const bool settled = problem.minimize_barrier(z, mu);
    const double fz = problem.objective(z);
    if (fz < fx && problem.min_constraint(z) >= eps) {
      x = z;
      fx = fz;
      out.trace.push_back(fx);
    }
    if (settled && mu * m <= 1e-9 * (1.0 + fx)) {
      out.converged = true;
      break;
    }
    mu *= 0.1;
  }

  out.coef = unpack(grid, x);
  out.objective = fx;
  out.margin = problem.min_constraint(x);
  return out;
}

}  // namespace sdm
