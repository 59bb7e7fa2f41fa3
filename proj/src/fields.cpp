#include "sdm/fields.hpp"

#include <cmath>
#include <random>

#include "sdm/errors.hpp"

namespace sdm {

namespace {

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

Eigen::MatrixXd standard_normals(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) z(r, c) = normal(rng);
  }
  return z;
}

}  // namespace

Point swirl(const SwirlMap& s, const Point& x) {
  if (!(s.radius > 0.0)) throw ArgumentError("swirl: radius must be positive");
  const Eigen::Vector2d d = x - s.center;
  const double angle = s.strength * std::exp(-d.squaredNorm() / (2.0 * s.radius * s.radius));
  return s.center + rotation(angle) * d;
}

AnalyticMap::AnalyticMap(SwirlMap s) : map_(s) {
  if (!(s.radius > 0.0)) throw ArgumentError("swirl: radius must be positive");
}

Point AnalyticMap::operator()(const Point& x) const {
  if (const auto* s = std::get_if<SwirlMap>(&map_)) return swirl(*s, x);
  return x;
}

Coords AnalyticMap::apply(const Coords& x) const {
  Coords out(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = (*this)(x.row(i).transpose()).transpose();
  return out;
}

Eigen::Matrix2d AnalyticMap::jacobian(const Point& x) const {
  const auto* s = std::get_if<SwirlMap>(&map_);
  if (!s) return Eigen::Matrix2d::Identity();
  // y = c + R(a(x)) d, dy/dx = R(a) + R(a) J d grad(a)', J the quarter turn.
  const Eigen::Vector2d d = x - s->center;
  const double a = s->strength * std::exp(-d.squaredNorm() / (2.0 * s->radius * s->radius));
  const Eigen::Vector2d grad = -a * d / (s->radius * s->radius);
  Eigen::Matrix2d quarter;
  quarter << 0.0, -1.0, 1.0, 0.0;
  const Eigen::Matrix2d r = rotation(a);
  return r + r * quarter * d * grad.transpose();
}

Eigen::MatrixXd simulate_grf(const Coords& deformed, const CovParams& cov, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw ArgumentError("simulate_grf: need at least one replicate");
  const Eigen::MatrixXd c = covariance_from_coords(deformed, cov);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("simulate_grf: covariance is not positive definite");
  return llt.matrixL() * standard_normals(deformed.rows(), replicates, seed);
}

Eigen::MatrixXd simulate_grf(const Coords& sites, const AnalyticMap& truth, const CovParams& cov, int replicates,
                             std::uint64_t seed) {
  return simulate_grf(truth.apply(sites), cov, replicates, seed);
}

Eigen::MatrixXd simulate_grf(const Coords& sites, const DeformationMap& truth, const CovParams& cov,
                             int replicates, std::uint64_t seed) {
  return simulate_grf(truth.apply(sites), cov, replicates, seed);
}

namespace {

struct KrigingSystem {
  Eigen::MatrixXd cross;     // n x m, C^{-1} applied later
  Eigen::MatrixXd weights;   // n x m, C^{-1} c*
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Coords pred_deformed;
};

KrigingSystem kriging_system(const DeformModel& model, const Eigen::VectorXd& z, const Coords& pred_sites) {
  if (z.size() != model.sites.rows()) throw ArgumentError("krige: observation count does not match model sites");
  const DeformationMap map = model.map();
  KrigingSystem ks;
  try {
    ks.pred_deformed = map.apply(pred_sites);
  } catch (const DomainError& e) {
    throw DomainError(std::string("krige: prediction site outside the model domain: ") + e.what());
  }
  const Coords data_deformed = map.apply(model.sites);
  const Eigen::MatrixXd c = covariance_from_coords(data_deformed, model.cov);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("krige: data covariance is singular");
  ks.cross = cross_covariance(data_deformed, ks.pred_deformed, model.cov);
  ks.weights = llt.solve(ks.cross);
  const Eigen::VectorXd resid = z.array() - model.mean;
  ks.mean = (ks.weights.transpose() * resid).array() + model.mean;
  const double total = model.cov.total_variance();
  ks.variance = Eigen::VectorXd(pred_sites.rows());
  for (Eigen::Index k = 0; k < pred_sites.rows(); ++k) {
    double v = total - ks.cross.col(k).dot(ks.weights.col(k));
    if (v < 0.0) {
      if (v < -1e-10 * std::max(1.0, total)) throw NumericalError("krige: negative Kriging variance");
      v = 0.0;
    }
    ks.variance[k] = v;
  }
  return ks;
}

}  // namespace

KrigingResult krige(const DeformModel& model, const Eigen::VectorXd& z, const Coords& pred_sites) {
  KrigingSystem ks = kriging_system(model, z, pred_sites);
  return {std::move(ks.mean), std::move(ks.variance)};
}

Eigen::MatrixXd conditional_simulate(const DeformModel& model, const Eigen::VectorXd& z, const Coords& pred_sites,
                                     int n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw ArgumentError("conditional_simulate: need at least one draw");
  const KrigingSystem ks = kriging_system(model, z, pred_sites);
  Eigen::MatrixXd cond = covariance_from_coords(ks.pred_deformed, model.cov);
  cond -= ks.cross.transpose() * ks.weights;
  cond = 0.5 * (cond + cond.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cond);
  if (eig.info() != Eigen::Success) throw NumericalError("conditional_simulate: eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();
  Eigen::MatrixXd draws = factor * standard_normals(pred_sites.rows(), n_draws, seed);
  draws.colwise() += ks.mean;
  return draws;
}

}  // namespace sdm
