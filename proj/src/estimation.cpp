#include "sdm/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace sdm {

void Dataset::validate() const {
  if (sites.rows() < 4) throw DataError("dataset: need at least 4 sites");
  if (replicates.rows() != sites.rows()) throw DataError("dataset: replicate rows do not match sites");
  if (replicates.cols() < 2) throw DataError("dataset: need at least 2 replicates");
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != sites.rows()) {
    throw DataError("dataset: id count does not match sites");
  }
  if (!times.empty() && static_cast<Eigen::Index>(times.size()) != replicates.cols()) {
    throw DataError("dataset: time label count does not match replicates");
  }
  if (!sites.allFinite() || !replicates.allFinite()) throw DataError("dataset: non-finite values");
}

Eigen::VectorXd Dataset::site_means() const { return replicates.rowwise().mean(); }

Eigen::MatrixXd Dataset::centered() const { return replicates.colwise() - site_means(); }

KnotGrid bounding_grid(const Coords& sites, int k1, int k2, double padding) {
  const Eigen::RowVector2d lo = sites.colwise().minCoeff();
  const Eigen::RowVector2d hi = sites.colwise().maxCoeff();
  const Eigen::RowVector2d pad = padding * (hi - lo);
  return KnotGrid(lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1], k1, k2);
}

double loglik_coords(const Eigen::MatrixXd& centered, const Coords& deformed, const CovParams& cov) {
  const Eigen::MatrixXd c = covariance_from_coords(deformed, cov);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("loglik: covariance matrix is not positive definite");
  const double n = static_cast<double>(centered.rows());
  const double t = static_cast<double>(centered.cols());
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = llt.matrixL().solve(centered).squaredNorm();
  return -0.5 * (t * logdet + quad + n * t * std::log(2.0 * std::numbers::pi));
}

double loglik(const Dataset& data, const DeformationMap& map, const CovParams& cov) {
  return loglik_coords(data.centered(), map.apply(data.sites), cov);
}

namespace {

// Nelder-Mead on a 2-vector.
std::array<double, 2> nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                                  std::array<double, 2> start, double step, int max_evals) {
  using P = std::array<double, 2>;
  std::array<P, 3> s{start, start, start};
  s[1][0] += step;
  s[2][1] += step;
  std::array<double, 3> v{f(s[0]), f(s[1]), f(s[2])};
  int evals = 3;
  auto comb = [](const P& a, const P& b, double t) { return P{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])}; };
  while (evals < max_evals) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return v[a] < v[b]; });
    const int best = o[0], mid = o[1], worst = o[2];
    const double spread = std::abs(v[worst] - v[best]);
    const double size = std::max({std::abs(s[worst][0] - s[best][0]), std::abs(s[worst][1] - s[best][1]),
                                  std::abs(s[mid][0] - s[best][0]), std::abs(s[mid][1] - s[best][1])});
    if (spread <= 1e-12 * (1.0 + std::abs(v[best])) && size < 1e-8) break;
    const P centroid{0.5 * (s[best][0] + s[mid][0]), 0.5 * (s[best][1] + s[mid][1])};
    const P refl = comb(centroid, s[worst], -1.0);
    const double fr = f(refl);
    ++evals;
    if (fr < v[best]) {
      const P exp = comb(centroid, s[worst], -2.0);
      const double fe = f(exp);
      ++evals;
      if (fe < fr) {
        s[worst] = exp;
        v[worst] = fe;
      } else {
        s[worst] = refl;
        v[worst] = fr;
      }
    } else if (fr < v[mid]) {
      s[worst] = refl;
      v[worst] = fr;
    } else {
      const bool outside = fr < v[worst];
      const P con = comb(centroid, outside ? refl : s[worst], 0.5);
      const double fc = f(con);
      ++evals;
      if (fc < std::min(fr, v[worst])) {
        s[worst] = con;
        v[worst] = fc;
      } else {
        for (int k : {mid, worst}) {
          s[k] = comb(s[best], s[k], 0.5);
          v[k] = f(s[k]);
          ++evals;
        }
      }
    }
  }
  int arg = 0;
  for (int k = 1; k < 3; ++k) {
    if (v[k] < v[arg]) arg = k;
  }
  return s[arg];
}

double max_pairwise(const Coords& y) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < y.rows(); ++j) m = std::max(m, (y.row(i) - y.row(j)).norm());
  }
  return m;
}

}  // namespace

CovStep step_cov_coords(const Eigen::MatrixXd& centered, const Coords& deformed, const CovParams& init) {
  init.validate();
  const double diameter = std::max(max_pairwise(deformed), 1e-12);
  const double phi_lo = 1e-4 * diameter, phi_hi = 10.0 * diameter;
  const double kappa_lo = 1e-10, kappa_hi = 1e6;
  const double n = static_cast<double>(centered.rows());
  const double t = static_cast<double>(centered.cols());
  const Eigen::MatrixXd dist = distance_matrix(deformed);

  struct Profile {
    double value;
    double sigma2;
  };
  // Likelihood maximized over sigma2 in closed form at (phi, kappa = nugget / sigma2).
  auto profile = [&](double phi, double kappa) -> Profile {
    Eigen::MatrixXd m = (-dist / phi).array().exp().matrix();
    m.diagonal().array() += kappa;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return {-std::numeric_limits<double>::infinity(), 0.0};
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = llt.matrixL().solve(centered).squaredNorm();
    const double sigma2 = quad / (n * t);
    if (!(sigma2 > 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0};
    const double value = -0.5 * (n * t * std::log(sigma2) + t * logdet + n * t + n * t * std::log(2.0 * std::numbers::pi));
    return {value, sigma2};
  };
  auto clamp_phi = [&](double lp) { return std::clamp(std::exp(lp), phi_lo, phi_hi); };
  auto clamp_kappa = [&](double lk) { return std::clamp(std::exp(lk), kappa_lo, kappa_hi); };
  auto objective = [&](const std::array<double, 2>& p) {
    const Profile pr = profile(clamp_phi(p[0]), clamp_kappa(p[1]));
    return std::isfinite(pr.value) ? -pr.value : std::numeric_limits<double>::max();
  };

  const double start_ll = loglik_coords(centered, deformed, init);
  std::array<double, 2> x{std::log(std::clamp(init.phi, phi_lo, phi_hi)),
                          std::log(std::clamp(init.nugget / init.sigma2, kappa_lo, kappa_hi))};
  for (int restart = 0; restart < 3; ++restart) {
    x = nelder_mead(objective, x, restart == 0 ? 0.5 : 0.1, 400);
  }
  const double phi = clamp_phi(x[0]);
  const double kappa = clamp_kappa(x[1]);
  const Profile best = profile(phi, kappa);

  CovStep out;
  if (std::isfinite(best.value) && best.value >= start_ll) {
    out.cov = CovParams{best.sigma2, phi, kappa * best.sigma2};
    out.loglik = loglik_coords(centered, deformed, out.cov);
    if (out.loglik >= start_ll) return out;
  }
  out.cov = init;
  out.loglik = start_ll;
  out.warning = true;
  return out;
}

CovStep step_cov(const Dataset& data, const DeformationMap& map, const CovParams& init) {
  return step_cov_coords(data.centered(), map.apply(data.sites), init);
}

namespace {

Coords fitted_coords(const KnotGrid& grid, const CoefPair& coef, const Coords& sites) {
  return DeformationMap(grid, coef).apply(sites);
}

Coords mds_targets(const DispersionMatrix& disp, const CovParams& cov) {
  const VariogramModel g = variogram_from_cov(cov);
  const Eigen::Index n = disp.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) h(i, j) = h(j, i) = variogram_inverse(g, disp(i, j));
  }
  return classical_mds(h);
}

BsplineFit coords_step(const DispersionMatrix& disp, const Coords& sites, const CovParams& cov,
                       const KnotGrid& grid, const CoefPair& previous, const CoordsStepOptions& options) {
  const Coords prev = fitted_coords(grid, previous, sites);
  Coords y = mds_targets(disp, cov);
  y = procrustes(y, prev, false, true).apply(y);
  BsplineFitOptions fo;
  fo.epsilon = options.epsilon;
  fo.ridge = options.ridge;
  fo.warm_start = previous;
  return fit_bspline_constrained(grid, sites, y, fo);
}

}  // namespace

BsplineFit step_coords(const Dataset& data, const CovParams& cov, const KnotGrid& grid, const CoefPair& previous,
                       const CoordsStepOptions& options) {
  return coords_step(sample_dispersions(data.replicates), data.sites, cov, grid, previous, options);
}

GaugeResult normalize_gauge(const KnotGrid& grid, const CoefPair& coef, const Coords& sites) {
  const Coords fitted = fitted_coords(grid, coef, sites);
  const Eigen::RowVector2d mf = fitted.colwise().mean();
  const Eigen::RowVector2d ms = sites.colwise().mean();
  const double spread_f = (fitted.rowwise() - mf).squaredNorm();
  const double spread_s = (sites.rowwise() - ms).squaredNorm();
  if (!(spread_f > 1e-300)) throw GaugeError("normalize_gauge: fitted coordinates coincide");
  Similarity sim = procrustes(fitted, sites, false, false);
  sim.scale = std::sqrt(spread_s / spread_f);
  sim.shift = ms.transpose() - sim.scale * sim.rotation * mf.transpose();
  return {transform_coefs(coef, sim.rotation, sim.scale, sim.shift), sim};
}

namespace {

struct Candidate {
  CoefPair coef;
  CovParams cov;
  double loglik = -std::numeric_limits<double>::infinity();
  bool warning = false;
};

CovParams variogram_start(const Eigen::MatrixXd& centered, const Coords& y, const DispersionMatrix& disp,
                          const KnotGrid& grid) {
  try {
    CovParams cov = cov_from_variogram(fit_variogram(pairwise_distances(y), disp.upper()).model);
    cov.nugget = std::max(cov.nugget, 1e-6 * cov.sigma2);
    return cov;
  } catch (const FitError&) {
    const double var = centered.rowwise().squaredNorm().mean() / static_cast<double>(centered.cols() - 1);
    return CovParams{0.5 * var, grid.diameter() / 3.0, 0.5 * var};
  }
}

Candidate start_candidate(const KnotGrid& grid, const CoefPair& coef, const Coords& sites,
                          const Eigen::MatrixXd& centered, const DispersionMatrix& disp) {
  Candidate c;
  c.coef = normalize_gauge(grid, coef, sites).coef;
  const Coords y = fitted_coords(grid, c.coef, sites);
  const CovStep cs = step_cov_coords(centered, y, variogram_start(centered, y, disp, grid));
  c.cov = cs.cov;
  c.loglik = cs.loglik;
  c.warning = cs.warning;
  return c;
}

}  // namespace

DeformModel fit(const Dataset& data, const FitConfig& config) {
  data.validate();
  const KnotGrid grid = bounding_grid(data.sites, config.k1, config.k2, config.padding);
  const double eps = config.epsilon.value_or(default_margin(grid));
  const double valid = eps - 1e-9;
  const Eigen::MatrixXd centered = data.centered();
  const DispersionMatrix disp = sample_dispersions(data.replicates);

  BsplineFitOptions fo;
  fo.epsilon = eps;
  fo.ridge = config.ridge;

  DeformModel model{grid, CoefPair{}, CovParams{}, eps, data.site_means().mean(), data.sites, FitDiagnostics{}};
  FitDiagnostics& diag = model.diagnostics;

  // Initialization: smoother/variogram/MDS loop with the constrained B-spline
  // smoother, competing with the affine start on the profile likelihood.
  const CoordinateSmoother smoother = [&](const Coords& targets) {
    return fitted_coords(grid, fit_bspline_constrained(grid, data.sites, targets, fo).coef, data.sites);
  };
  Candidate current;
  try {
    const SgResult sg = sg_initialize(disp, data.sites, smoother, {config.sg_max_iter, config.sg_tol});
    diag.stress = sg.stress;
    const BsplineFit f0 = fit_bspline_constrained(grid, data.sites, sg.configuration, fo);
    Candidate from_sg = start_candidate(grid, f0.coef, data.sites, centered, disp);
    Candidate affine = start_candidate(grid, identity_coefs(grid), data.sites, centered, disp);
    diag.start_loglik = {from_sg.loglik, affine.loglik};
    if (min_jacobian(grid, from_sg.coef) >= valid && from_sg.loglik >= affine.loglik) {
      current = from_sg;
      diag.start = "sg";
    } else {
      current = affine;
      diag.start = "affine";
    }
  } catch (const Error& e) {
    throw EstimationError(std::string("fit initialization: ") + e.what(), 0, std::nullopt);
  }
  diag.cov_warning = current.warning;
  diag.loglik.push_back(current.loglik);
  diag.margin.push_back(min_jacobian(grid, current.coef));
  diag.step.push_back(0.0);
  model.coef = current.coef;
  model.cov = current.cov;

  // Each outer iteration moves from the current map toward the refit map by
  // the largest-likelihood step among halvings that keeps the constraints.
  for (int k = 1; k <= config.max_outer; ++k) {
    Candidate best = current;
    double best_step = 0.0;
    try {
      const BsplineFit refit = coords_step(disp, data.sites, current.cov, grid, current.coef, {eps, config.ridge});
      const CoefPair target = normalize_gauge(grid, refit.coef, data.sites).coef;
      const Eigen::VectorXd from = pack(current.coef);
      const Eigen::VectorXd dir = pack(target) - from;
      for (double t = 1.0; t >= 1.0 / 16.0; t *= 0.5) {
        const CoefPair blended = unpack(grid, from + t * dir);
        if (min_jacobian(grid, blended) < valid) continue;
        const GaugeResult gauge = normalize_gauge(grid, blended, data.sites);
        if (min_jacobian(grid, gauge.coef) < valid) continue;
        CovParams init = current.cov;
        init.phi *= gauge.transform.scale;
        const CovStep cs = step_cov_coords(centered, fitted_coords(grid, gauge.coef, data.sites), init);
        diag.cov_warning = diag.cov_warning || cs.warning;
        if (cs.loglik > best.loglik) {
          best = Candidate{gauge.coef, cs.cov, cs.loglik, cs.warning};
          best_step = t;
        }
      }
    } catch (const Error& e) {
      throw EstimationError("fit iteration " + std::to_string(k) + ": " + e.what(), k, model);
    }
    const double prev = current.loglik;
    current = best;
    diag.loglik.push_back(current.loglik);
    diag.margin.push_back(min_jacobian(grid, current.coef));
    diag.step.push_back(best_step);
    diag.iterations = k;
    diag.selected = k;
    model.coef = current.coef;
    model.cov = current.cov;
    if (best_step == 0.0 || std::abs(current.loglik - prev) / std::max(std::abs(prev), 1e-300) < config.tol) {
      diag.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace sdm
