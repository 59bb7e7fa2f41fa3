#include "sdm/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sdm/errors.hpp"

namespace sdm {

void CovParams::validate() const {
  if (!(sigma2 > 0.0) || !(phi > 0.0) || !(nugget >= 0.0) || !std::isfinite(sigma2) ||
      !std::isfinite(phi) || !std::isfinite(nugget)) {
    throw ArgumentError("CovParams: require sigma2 > 0, phi > 0, nugget >= 0");
  }
}

double correlation(double h, const CovParams& params) {
  if (h < 0.0) throw ArgumentError("correlation: negative distance");
  return std::exp(-h / params.phi);
}

Eigen::MatrixXd cross_covariance(const Coords& a, const Coords& b, const CovParams& params) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      c(i, j) = params.sigma2 * std::exp(-(a.row(i) - b.row(j)).norm() / params.phi);
    }
  }
  return c;
}

Eigen::MatrixXd covariance_from_coords(const Coords& deformed, const CovParams& params) {
  params.validate();
  const Eigen::Index n = deformed.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = params.sigma2 + params.nugget;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = params.sigma2 * std::exp(-(deformed.row(i) - deformed.row(j)).norm() / params.phi);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::MatrixXd covariance_matrix(const Coords& sites, const DeformationMap& map, const CovParams& params) {
  Eigen::MatrixXd c = covariance_from_coords(map.apply(sites), params);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance_matrix: matrix is not positive definite");
  }
  return c;
}

std::vector<double> pairwise_distances(const Coords& y) {
  std::vector<double> out;
  const Eigen::Index n = y.rows();
  out.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back((y.row(i) - y.row(j)).norm());
  }
  return out;
}

Eigen::MatrixXd distance_matrix(const Coords& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (y.row(i) - y.row(j)).norm();
    }
  }
  return d;
}

double VariogramModel::operator()(double h) const { return nugget + sill * (1.0 - std::exp(-h / range)); }

VariogramModel variogram_from_cov(const CovParams& params) {
  return {2.0 * params.nugget, 2.0 * params.sigma2, params.phi, VariogramFamily::Exponential};
}

CovParams cov_from_variogram(const VariogramModel& g) { return {0.5 * g.sill, g.range, 0.5 * g.nugget}; }

DispersionMatrix::DispersionMatrix(Eigen::MatrixXd d2) : d2_(std::move(d2)) {
  if (d2_.rows() != d2_.cols()) throw ArgumentError("DispersionMatrix: matrix must be square");
  d2_ = 0.5 * (d2_ + d2_.transpose()).eval();
  d2_ = d2_.cwiseMax(0.0);
  d2_.diagonal().setZero();
}

std::vector<double> DispersionMatrix::upper() const {
  std::vector<double> out;
  const Eigen::Index n = d2_.rows();
  out.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(d2_(i, j));
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& replicates) {
  const Eigen::Index t = replicates.cols();
  if (t < 2) throw ArgumentError("sample_covariance: need at least 2 replicates");
  const Eigen::MatrixXd centered = replicates.colwise() - replicates.rowwise().mean();
  return centered * centered.transpose() / static_cast<double>(t - 1);
}

DispersionMatrix sample_dispersions(const Eigen::MatrixXd& replicates) {
  const Eigen::MatrixXd s = sample_covariance(replicates);
  const Eigen::VectorXd diag = s.diagonal();
  Eigen::MatrixXd d2 = (-2.0 * s).colwise() + diag;
  d2.rowwise() += diag.transpose();
  return DispersionMatrix(std::move(d2));
}

namespace {

constexpr int kBins = 15;

struct Bin {
  std::vector<double> h;
  double mean_d2 = 0.0;
};

// Mean of (1 - exp(-h/r)) over the pairs of a bin.
double bin_shape(const Bin& bin, double r) {
  double s = 0.0;
  for (double h : bin.h) s += 1.0 - std::exp(-h / r);
  return s / static_cast<double>(bin.h.size());
}

struct Linear {
  double a = 0.0, b = 0.0, sse = 0.0;
};

// Weighted LS for (a, b) at fixed shape values m_j, with a >= 0, b >= 0.
Linear solve_linear(const std::vector<Bin>& bins, const std::vector<double>& m, const std::vector<double>& w) {
  double sw = 0, sm = 0, sd = 0, smm = 0, smd = 0;
  for (std::size_t j = 0; j < bins.size(); ++j) {
    sw += w[j];
    sm += w[j] * m[j];
    sd += w[j] * bins[j].mean_d2;
    smm += w[j] * m[j] * m[j];
    smd += w[j] * m[j] * bins[j].mean_d2;
  }
  Linear out;
  const double det = sw * smm - sm * sm;
  if (det > 1e-300 * std::max(1.0, sw * smm)) {
    out.a = (smm * sd - sm * smd) / det;
    out.b = (sw * smd - sm * sd) / det;
  }
  if (!(det > 1e-300 * std::max(1.0, sw * smm)) || out.a < 0.0) {
    out.a = 0.0;
    out.b = smm > 0.0 ? smd / smm : 0.0;
  }
  if (out.b < 0.0) {
    out.b = 0.0;
    out.a = std::max(0.0, sd / sw);
  }
  for (std::size_t j = 0; j < bins.size(); ++j) {
    const double r = bins[j].mean_d2 - out.a - out.b * m[j];
    out.sse += w[j] * r * r;
  }
  return out;
}

}  // namespace

VariogramFit fit_variogram(std::span<const double> h, std::span<const double> d2) {
  if (h.size() != d2.size()) throw ArgumentError("fit_variogram: h and d2 differ in length");
  if (h.size() < 3) throw FitError("fit_variogram: need at least 3 pairs");
  const auto [hmin_it, hmax_it] = std::minmax_element(h.begin(), h.end());
  const double hmin = *hmin_it;
  const double hmax = *hmax_it;
  if (!(hmax > hmin) || !(hmax > 0.0)) throw FitError("fit_variogram: all distances are equal");

  std::vector<Bin> raw(kBins);
  std::vector<int> count(kBins, 0);
  for (std::size_t p = 0; p < h.size(); ++p) {
    const int j = std::min(kBins - 1, static_cast<int>(h[p] / hmax * kBins));
    raw[j].h.push_back(h[p]);
    raw[j].mean_d2 += d2[p];
  }
  std::vector<Bin> bins;
  for (auto& b : raw) {
    if (b.h.empty()) continue;
    b.mean_d2 /= static_cast<double>(b.h.size());
    bins.push_back(std::move(b));
  }
  if (bins.size() < 2) throw FitError("fit_variogram: fewer than 2 non-empty distance bins");

  std::vector<double> w(bins.size());
  for (std::size_t j = 0; j < bins.size(); ++j) w[j] = static_cast<double>(bins[j].h.size());

  const double log_lo = std::log(1e-3 * hmax);
  const double log_hi = std::log(1e2 * hmax);
  std::vector<double> m(bins.size());
  auto profile = [&](double log_r) {
    const double r = std::exp(log_r);
    for (std::size_t j = 0; j < bins.size(); ++j) m[j] = bin_shape(bins[j], r);
    return solve_linear(bins, m, w);
  };

  VariogramModel model;
  double sse = 0.0;
  for (int sweep = 0; sweep < 6; ++sweep) {
    // Coarse scan in log r, then golden-section refinement.
    constexpr int kGrid = 40;
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int g = 0; g <= kGrid; ++g) {
      const double s = profile(log_lo + (log_hi - log_lo) * g / kGrid).sse;
      if (s < best_sse) {
        best_sse = s;
        best = g;
      }
    }
    const double step = (log_hi - log_lo) / kGrid;
    double lo = log_lo + step * std::max(0, best - 1);
    double hi = log_lo + step * std::min(kGrid, best + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = profile(x1).sse, f2 = profile(x2).sse;
    while (hi - lo > 1e-12) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = profile(x1).sse;
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = profile(x2).sse;
      }
    }
    const double log_r = 0.5 * (lo + hi);
    const Linear lin = profile(log_r);
    const VariogramModel next{lin.a, lin.b, std::exp(log_r), VariogramFamily::Exponential};
    const bool stable = sweep > 0 && std::abs(next.range - model.range) <= 1e-10 * model.range &&
                        std::abs(next.sill - model.sill) <= 1e-10 * std::max(1.0, model.sill) &&
                        std::abs(next.nugget - model.nugget) <= 1e-10 * std::max(1.0, model.nugget);
    model = next;
    sse = lin.sse;
    if (stable) break;
    // Cressie weights N_j / g_j^2 at the current fit.
    for (std::size_t j = 0; j < bins.size(); ++j) {
      const double g = model.nugget + model.sill * bin_shape(bins[j], model.range);
      w[j] = g > 0.0 ? static_cast<double>(bins[j].h.size()) / (g * g) : static_cast<double>(bins[j].h.size());
    }
  }

  // The fitted rise across the observed distances must be visible; a sill
  // reached before the first bin is indistinguishable from a nugget.
  double scale = 0.0;
  for (const auto& b : bins) scale = std::max(scale, std::abs(b.mean_d2));
  const double rise =
      model.sill * (bin_shape(bins.back(), model.range) - bin_shape(bins.front(), model.range));
  if (!(rise > 1e-8 * std::max(scale, 1e-300))) {
    throw FitError("fit_variogram: no spatial structure (partial sill collapsed to 0)");
  }
  return {model, sse, static_cast<int>(bins.size())};
}

double variogram_inverse(const VariogramModel& g, double d2) {
  const double hmax = g.max_distance();
  if (d2 <= g.nugget) return 0.0;
  if (d2 >= g(hmax)) return hmax;
  return -g.range * std::log1p(-(d2 - g.nugget) / g.sill);
}

}  // namespace sdm
