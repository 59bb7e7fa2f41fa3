#include "sdm/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sdm/errors.hpp"

namespace sdm {

Coords classical_mds(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (n != distances.cols() || n < 2) throw ArgumentError("classical_mds: need a square matrix, n >= 2");
  const Eigen::MatrixXd d2 = distances.array().square();
  const Eigen::VectorXd row_mean = d2.rowwise().mean();
  const double grand = row_mean.mean();
  Eigen::MatrixXd b = d2;
  b.colwise() -= row_mean;
  b.rowwise() -= row_mean.transpose();
  b.array() += grand;
  b *= -0.5;
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) throw NumericalError("classical_mds: eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  const double l1 = values[n - 1];
  const double l2 = values[n - 2];
  if (!(l1 > 1e-12 * scale) || !(l1 > 0.0)) {
    throw NumericalError("classical_mds: degenerate configuration (no positive eigenvalue)");
  }
  Coords y(n, 2);
  const double lam[2] = {l1, std::max(l2, 0.0)};
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    y.col(k) = std::sqrt(lam[k]) * v;
  }
  y.rowwise() -= y.colwise().mean();
  return y;
}

std::vector<double> isotonic_fit(std::span<const double> d2, std::span<const double> h) {
  if (d2.size() != h.size()) throw ArgumentError("isotonic_fit: length mismatch");
  const std::size_t n = h.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d2[a] < d2[b]; });

  // Blocks start as tie groups in d2, then pool adjacent violators.
  struct Block {
    double sum;
    double weight;
    std::size_t begin, end;  // range in `order`
  };
  std::vector<Block> blocks;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    double s = 0.0;
    while (e < n && d2[order[e]] == d2[order[k]]) s += h[order[e++]];
    Block blk{s, static_cast<double>(e - k), k, e};
    while (!blocks.empty() && blocks.back().sum / blocks.back().weight >= blk.sum / blk.weight) {
      const Block& prev = blocks.back();
      blk = Block{prev.sum + blk.sum, prev.weight + blk.weight, prev.begin, blk.end};
      blocks.pop_back();
    }
    blocks.push_back(blk);
    k = e;
  }
  std::vector<double> out(n);
  for (const auto& blk : blocks) {
    const double v = blk.sum / blk.weight;
    for (std::size_t k = blk.begin; k < blk.end; ++k) out[order[k]] = v;
  }
  return out;
}

double kruskal_stress(std::span<const double> delta, std::span<const double> hstar) {
  if (delta.size() != hstar.size()) throw ArgumentError("kruskal_stress: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    num += (delta[k] - hstar[k]) * (delta[k] - hstar[k]);
    den += hstar[k] * hstar[k];
  }
  if (!(den > 0.0)) throw ArgumentError("kruskal_stress: all configuration distances are zero");
  return std::sqrt(num / den);
}

Coords Similarity::apply(const Coords& y) const {
  Coords out = (scale * (y * rotation.transpose())).eval();
  out.rowwise() += shift.transpose();
  return out;
}

Similarity procrustes(const Coords& from, const Coords& to, bool allow_scale, bool allow_reflection) {
  if (from.rows() != to.rows() || from.rows() < 1) throw ArgumentError("procrustes: size mismatch");
  const Eigen::RowVector2d mf = from.colwise().mean();
  const Eigen::RowVector2d mt = to.colwise().mean();
  const Coords a = from.rowwise() - mf;
  const Coords b = to.rowwise() - mt;
  const Eigen::Matrix2d cross = b.transpose() * a;  // sum b_i a_i'
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if (!allow_reflection && (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(1, 1) = -1.0;
  Similarity s;
  s.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  const double var_a = a.squaredNorm();
  if (allow_scale) {
    if (!(var_a > 0.0)) throw NumericalError("procrustes: source configuration is degenerate");
    s.scale = (svd.singularValues().asDiagonal() * d).trace() / var_a;
  }
  s.shift = mt.transpose() - s.scale * s.rotation * mf.transpose();
  return s;
}

double rms_distance(const Coords& a, const Coords& b) {
  return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

double nonmetric_stress(const DispersionMatrix& dispersions, const Coords& y) {
  const std::vector<double> d2 = dispersions.upper();
  const std::vector<double> h = pairwise_distances(y);
  return kruskal_stress(isotonic_fit(d2, h), h);
}

namespace {

Eigen::MatrixXd to_matrix(std::span<const double> upper, Eigen::Index n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j, ++k) m(i, j) = m(j, i) = upper[k];
  }
  return m;
}

Coords align_to_sites(const Coords& y, const Coords& sites) {
  return procrustes(y, sites, true, true).apply(y);
}

}  // namespace

SgResult sg_initialize(const DispersionMatrix& dispersions, const Coords& sites,
                       const CoordinateSmoother& smoother, const SgOptions& options) {
  const Eigen::Index n = sites.rows();
  if (n < 4) throw ArgumentError("sg_initialize: need at least 4 sites");
  if (dispersions.size() != n) throw ArgumentError("sg_initialize: dispersion matrix does not match sites");
  const std::vector<double> d2 = dispersions.upper();

  // Step 1: classical scaling of sqrt(d2), then again on the isotonic
  // regression of the resulting distances on d2.
  SgResult result;
  Coords y;
  try {
    const Coords y0 = classical_mds(dispersions.values().cwiseSqrt());
    const std::vector<double> delta = isotonic_fit(d2, pairwise_distances(y0));
    y = align_to_sites(classical_mds(to_matrix(delta, n)), sites);
  } catch (const Error& e) {
    throw FitError(std::string("sg_initialize step 1: ") + e.what());
  }
  double stress = nonmetric_stress(dispersions, y);
  result.stress.push_back(stress);
  Coords best = y;
  double best_stress = stress;
  int increases = 0;

  for (int k = 1; k <= options.max_iter; ++k) {
    try {
      const Coords smoothed = smoother(y);
      const VariogramFit fit = fit_variogram(pairwise_distances(smoothed), d2);
      result.variogram = fit.model;
      std::vector<double> target(d2.size());
      for (std::size_t p = 0; p < d2.size(); ++p) target[p] = variogram_inverse(fit.model, d2[p]);
      y = align_to_sites(classical_mds(to_matrix(target, n)), sites);
    } catch (const Error& e) {
      throw FitError("sg_initialize iteration " + std::to_string(k) + ": " + e.what());
    }
    result.iterations = k;
    const double next = nonmetric_stress(dispersions, y);
    result.stress.push_back(next);
    if (next < best_stress) {
      best_stress = next;
      best = y;
    }
    if (next > stress) {
      if (++increases >= 2) break;
    } else {
      increases = 0;
    }
    const double change = std::abs(next - stress) / std::max(stress, 1e-300);
    stress = next;
    if (change < options.tol || stress < 1e-12) {
      result.converged = true;
      break;
    }
  }
  result.configuration = best;
  return result;
}

}  // namespace sdm
