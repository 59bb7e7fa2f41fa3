#include <doctest.h>

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "sdm/commands.hpp"
#include "sdm/errors.hpp"
#include "sdm/smoothers.hpp"
#include "support.hpp"

using namespace sdm;

namespace {

Coords affine_targets(const Coords& x) {
  Coords y(x.rows(), 2);
  y.col(0) = 0.5 + 2.0 * x.col(0).array() - x.col(1).array();
  y.col(1) = -1.0 + 0.3 * x.col(0).array() + 1.5 * x.col(1).array();
  return y;
}

Coords wavy_targets(const Coords& x) {
  Coords y = x;
  y.col(0) += 0.1 * (6.0 * x.col(1).array()).sin().matrix();
  y.col(1) += 0.1 * (5.0 * x.col(0).array()).cos().matrix();
  return y;
}

// Ordinary least squares on (1, x1, x2).
Coords affine_ls(const Coords& x, const Coords& y) {
  Eigen::MatrixXd p(x.rows(), 3);
  p.col(0).setOnes();
  p.rightCols(2) = x;
  const Eigen::MatrixXd beta = p.colPivHouseholderQr().solve(Eigen::MatrixXd(y));
  return p * beta;
}

}  // namespace

TEST_CASE("TPS kernel") {
  CHECK(tps_kernel(0.0) == 0.0);
  CHECK(tps_kernel(1.0) == 0.0);
  CHECK(tps_kernel(2.0) == doctest::Approx(4.0 * std::log(2.0)));
}

TEST_CASE("TPS reproduces affine targets for any lambda") {
  std::mt19937_64 rng(1);
  const Coords x = test::random_coords(25, rng);
  const Coords y = affine_targets(x);
  for (double lambda : {0.0, 0.1, 100.0}) {
    const TpsModel m = fit_tps(x, y, lambda);
    CHECK(m.theta.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((m.apply(x) - y).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(m.alpha(1, 0) == doctest::Approx(2.0));
    CHECK(m.alpha(2, 1) == doctest::Approx(1.5));
  }
}

TEST_CASE("TPS interpolates at lambda 0 and tends to affine least squares") {
  std::mt19937_64 rng(2);
  const Coords x = test::random_coords(30, rng);
  const Coords y = wavy_targets(x);
  CHECK((fit_tps(x, y, 0.0).apply(x) - y).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit_tps(x, y, 1e6).apply(x) - affine_ls(x, y)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("TPS argument checks") {
  Coords line(4, 2);
  line << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK_THROWS_AS(fit_tps(line, line, 0.1), NumericalError);
  std::mt19937_64 rng(3);
  const Coords x = test::random_coords(6, rng);
  CHECK_THROWS_AS(fit_tps(x, x, -1.0), ArgumentError);
}

TEST_CASE("TPS effective degrees of freedom") {
  const Coords x = unit_grid_sites(11);
  CHECK(tps_effective_dof(x, 0.0) == doctest::Approx(121.0).epsilon(1e-8));
  CHECK(tps_effective_dof(x, 1e9) == doctest::Approx(3.0).epsilon(1e-4));
  double prev = 200.0;
  for (double lambda : {1e-6, 1e-4, 1e-2, 1.0}) {
    const double d = tps_effective_dof(x, lambda);
    CHECK(d < prev);
    prev = d;
  }
  const double lambda16 = tps_lambda_for_dof(x, 16.0);
  CHECK(tps_effective_dof(x, lambda16) == doctest::Approx(16.0).epsilon(1e-6));
  MESSAGE("lambda for 16 dof on the 11x11 grid: " << lambda16);
  const Eigen::MatrixXd hat = tps_hat_matrix(x, 0.01);
  CHECK(hat.trace() == doctest::Approx(tps_effective_dof(x, 0.01)));
}

TEST_CASE("TPS fold detection") {
  const Coords x = unit_grid_sites(5);
  CHECK_FALSE(tps_folds(fit_tps(x, x, 0.0), 0, 1, 0, 1, 50));
  Coords swapped = x;
  swapped.row(6).swap(swapped.row(8));
  CHECK(tps_folds(fit_tps(x, swapped, 0.0), 0, 1, 0, 1, 50));
}

TEST_CASE("unconstrained B-spline fit") {
  const KnotGrid g = KnotGrid::unit_square(4);
  const Coords x = unit_grid_sites(9);
  const CoefPair c = fit_bspline_unconstrained(g, x, x);
  CHECK(bspline_objective(g, x, x, c, 0.0) < 1e-20);
  CHECK((c.theta1 - identity_coefs(g).theta1).norm() < 1e-10);
}

TEST_CASE("constrained fit on identity targets") {
  const KnotGrid g = KnotGrid::unit_square(5);
  const Coords x = unit_grid_sites(9);
  const BsplineFit f = fit_bspline_constrained(g, x, x, {1e-3, 0.0});
  CHECK(f.objective < 1e-10);
  CHECK(f.margin >= 1e-3);
  CHECK(f.converged);
}

TEST_CASE("constrained fit reproduces a gentle deformation") {
  std::mt19937_64 rng(5);
  const KnotGrid g = KnotGrid::unit_square(5);
  const CoefPair truth = test::perturbed_coefs(g, rng, 0.15);
  REQUIRE(min_jacobian(g, truth) > 0.0);
  const Coords x = test::random_coords(300, rng);
  const Coords y = DeformationMap(g, truth).apply(x);
  const BsplineFit f = fit_bspline_constrained(g, x, y);
  CHECK(rms_distance(DeformationMap(g, f.coef).apply(x), y) < 1e-3);
  CHECK(min_jacobian(g, f.coef) > 0.0);
}

TEST_CASE("constraints stop a fold that least squares would produce") {
  const KnotGrid g = KnotGrid::unit_square(5);
  const Coords x = unit_grid_sites(9);
  Coords y = x;
  // x1 -> x1 + 0.35 sin(2 pi x1) turns back between the outer knots.
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) += 0.35 * std::sin(2.0 * M_PI * x(i, 0));
  const CoefPair free = fit_bspline_unconstrained(g, x, y);
  CHECK(min_jacobian(g, free) < 0.0);
  const BsplineFit f = fit_bspline_constrained(g, x, y, {1e-3, std::nullopt});
  CHECK(min_jacobian(g, f.coef) >= 1e-3 - 1e-9);
  CHECK(f.objective <= f.start_objective);
  for (std::size_t k = 1; k < f.trace.size(); ++k) CHECK(f.trace[k] <= f.trace[k - 1]);
  CHECK(f.objective >= bspline_objective(g, x, y, free, 0.0));
}

namespace {

double cross2(const Point& a, const Point& b, const Point& c) {
  return (b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0];
}

bool segments_cross(const Point& p, const Point& q, const Point& r, const Point& s) {
  return cross2(p, q, r) * cross2(p, q, s) < 0.0 && cross2(r, s, p) * cross2(r, s, q) < 0.0;
}

}  // namespace

TEST_CASE("deformed grid lines of a constrained fit do not cross") {
  const KnotGrid g = KnotGrid::unit_square(5);
  const Coords x = unit_grid_sites(9);
  Coords y = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, 0) += 0.35 * std::sin(2.0 * M_PI * x(i, 0));
  auto count_crossings = [](const DeformationMap& f) {
    const int m = 25;
    std::vector<std::pair<Point, Point>> segs;
    auto at = [&](int a, int b) { return f(Point(a / (m - 1.0), b / (m - 1.0))); };
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b + 1 < m; ++b) {
        segs.emplace_back(at(a, b), at(a, b + 1));
        segs.emplace_back(at(b, a), at(b + 1, a));
      }
    }
    int crossings = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      for (std::size_t j = i + 1; j < segs.size(); ++j) {
        crossings += segments_cross(segs[i].first, segs[i].second, segs[j].first, segs[j].second);
      }
    }
    return crossings;
  };
  CHECK(count_crossings(DeformationMap(g, fit_bspline_unconstrained(g, x, y))) > 0);
  CHECK(count_crossings(DeformationMap(g, fit_bspline_constrained(g, x, y).coef)) == 0);
}

TEST_CASE("constrained fit rejects orientation-reversing targets") {
  const KnotGrid g = KnotGrid::unit_square(4);
  const Coords x = unit_grid_sites(6);
  Coords y = x;
  y.col(0) *= -1.0;
  CHECK_THROWS_AS(fit_bspline_constrained(g, x, y), InfeasibleError);
}

TEST_CASE("constrained fit accepts a better warm start") {
  std::mt19937_64 rng(8);
  const KnotGrid g = KnotGrid::unit_square(4);
  const Coords x = unit_grid_sites(7);
  const Coords y = wavy_targets(x);
  const BsplineFit first = fit_bspline_constrained(g, x, y);
  BsplineFitOptions o;
  o.warm_start = first.coef;
  const BsplineFit second = fit_bspline_constrained(g, x, y, o);
  CHECK(second.start_objective <= first.objective + 1e-12);
  CHECK(second.objective <= first.objective + 1e-12);
}
