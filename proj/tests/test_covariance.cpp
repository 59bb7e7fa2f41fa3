#include <doctest.h>

#include <cmath>
#include <random>

#include "sdm/covariance.hpp"
#include "sdm/errors.hpp"
#include "support.hpp"

using namespace sdm;

TEST_CASE("exponential correlation") {
  const CovParams p{1.0, 0.25, 0.0};
  CHECK(correlation(0.0, p) == 1.0);
  CHECK(correlation(0.25, p) == doctest::Approx(std::exp(-1.0)));
  CHECK(correlation(0.25, p) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK_THROWS_AS(correlation(-1.0, p), ArgumentError);
  CHECK_THROWS_AS((CovParams{0.0, 1.0, 0.0}.validate()), ArgumentError);
  CHECK_THROWS_AS((CovParams{1.0, 1.0, -1.0}.validate()), ArgumentError);
}

TEST_CASE("covariance matrix by hand") {
  const KnotGrid g = KnotGrid::unit_square(3);
  const DeformationMap id(g, identity_coefs(g));

  Coords same(2, 2);
  same << 0.3, 0.3, 0.3, 0.3;
  const Eigen::MatrixXd c2 = covariance_from_coords(same, {2.0, 0.5, 0.0});
  CHECK((c2.array() == 2.0).all());

  Coords line(3, 2);
  line << 0.0, 0.5, 0.25, 0.5, 0.5, 0.5;
  const Eigen::MatrixXd c = covariance_matrix(line, id, {1.0, 0.25, 0.0});
  CHECK(c(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(c(1, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(c(0, 2) == doctest::Approx(std::exp(-2.0)));
  CHECK((c - c.transpose()).norm() == 0.0);

  const Eigen::MatrixXd cn = covariance_matrix(line, id, {1.5, 0.25, 0.7});
  for (int i = 0; i < 3; ++i) CHECK(cn(i, i) == doctest::Approx(2.2));
  CHECK(cn(0, 1) == doctest::Approx(1.5 * std::exp(-1.0)));
}

TEST_CASE("covariance matrix is invariant to shifts and rotations of the deformed space") {
  std::mt19937_64 rng(3);
  const Coords y = test::random_coords(10, rng);
  Eigen::Matrix2d r;
  r << std::cos(1.0), -std::sin(1.0), std::sin(1.0), std::cos(1.0);
  const Coords moved = ((y * r.transpose()).rowwise() + Eigen::RowVector2d(3.0, -2.0));
  const CovParams p{1.0, 0.3, 0.1};
  CHECK((covariance_from_coords(y, p) - covariance_from_coords(moved, p)).cwiseAbs().maxCoeff() < 1e-12);
  const Coords scaled = 2.0 * y;
  CHECK((covariance_from_coords(y, p) - covariance_from_coords(scaled, {1.0, 0.6, 0.1})).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sample dispersions") {
  Eigen::MatrixXd z(3, 5);
  z << 1, 2, 3, 4, 5,   //
      1, 2, 3, 4, 5,    //
      -1, -2, -3, -4, -5;
  z.row(2) = -z.row(0);
  // Standardise row 0 to unit sample variance; row 2 = -row 0.
  Eigen::RowVectorXd r = z.row(0).array() - z.row(0).mean();
  r /= std::sqrt(r.squaredNorm() / 4.0);
  z.row(0) = r;
  z.row(1) = r;
  z.row(2) = -r;
  const DispersionMatrix d = sample_dispersions(z);
  CHECK(d(0, 1) == doctest::Approx(0.0));
  CHECK(d(0, 2) == doctest::Approx(4.0));
  CHECK(d(1, 1) == 0.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Eigen::MatrixXd w(4, 9);
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = n(rng);
  const DispersionMatrix dw = sample_dispersions(w);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const Eigen::RowVectorXd diff = w.row(i) - w.row(j);
      const double var = (diff.array() - diff.mean()).square().sum() / 8.0;
      CHECK(dw(i, j) == doctest::Approx(var).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(sample_dispersions(Eigen::MatrixXd::Ones(3, 1)), ArgumentError);
}

TEST_CASE("pairwise distance ordering") {
  Coords y(3, 2);
  y << 0, 0, 3, 4, 0, 1;
  const std::vector<double> h = pairwise_distances(y);
  REQUIRE(h.size() == 3u);
  CHECK(h[0] == doctest::Approx(5.0));
  CHECK(h[1] == doctest::Approx(1.0));
  CHECK(h[2] == doctest::Approx(std::sqrt(18.0)));
}

TEST_CASE("variogram fit recovers noiseless parameters") {
  std::mt19937_64 rng(12);
  const Coords y = test::random_coords(40, rng);
  const std::vector<double> h = pairwise_distances(y);
  for (double a : {1.0, 0.0}) {
    const VariogramModel truth{a, 1.0, 0.25};
    std::vector<double> d2;
    for (double hh : h) d2.push_back(truth(hh));
    const VariogramFit f = fit_variogram(h, d2);
    CHECK(f.model.nugget == doctest::Approx(a).epsilon(1e-4).scale(1.0));
    CHECK(f.model.sill == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(f.model.range == doctest::Approx(0.25).epsilon(1e-4));
  }
}

TEST_CASE("variogram fit failures") {
  std::vector<double> h{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> flat(5, 2.0);
  CHECK_THROWS_AS(fit_variogram(h, flat), FitError);
  std::vector<double> same_h(5, 0.3);
  CHECK_THROWS_AS(fit_variogram(same_h, h), FitError);
  CHECK_THROWS_AS(fit_variogram(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 2}), FitError);
}

TEST_CASE("variogram and covariance parameter maps") {
  const CovParams p{1.5, 0.3, 0.2};
  const VariogramModel g = variogram_from_cov(p);
  CHECK(g.nugget == doctest::Approx(0.4));
  CHECK(g.sill == doctest::Approx(3.0));
  CHECK(g.range == doctest::Approx(0.3));
  const CovParams back = cov_from_variogram(g);
  CHECK(back.sigma2 == doctest::Approx(1.5));
  CHECK(back.nugget == doctest::Approx(0.2));
  // 2 gamma(h) = Var(Z1 - Z2) = 2 (sigma2 + nugget) - 2 sigma2 rho(h) off the diagonal.
  CHECK(g(0.45) == doctest::Approx(2 * (1.5 + 0.2) - 2 * 1.5 * std::exp(-1.5)));
}

TEST_CASE("variogram inverse") {
  const VariogramModel g{0.0, 1.0, 0.25};
  CHECK(variogram_inverse(g, 1.0 - std::exp(-1.0)) == doctest::Approx(0.25));
  CHECK(variogram_inverse({0.5, 1.0, 0.25}, 0.5) == 0.0);
  CHECK(variogram_inverse({0.5, 1.0, 0.25}, 0.2) == 0.0);
  CHECK(variogram_inverse(g, 1.5) == doctest::Approx(0.75));
  CHECK(g.max_distance() == doctest::Approx(0.75));
  for (double h : {0.01, 0.1, 0.3, 0.6, 0.74}) CHECK(variogram_inverse(g, g(h)) == doctest::Approx(h).epsilon(1e-10));
}
