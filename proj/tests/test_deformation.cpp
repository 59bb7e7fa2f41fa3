#include <doctest.h>

#include <random>

#include "sdm/deformation.hpp"
#include "sdm/errors.hpp"
#include "support.hpp"

using namespace sdm;

TEST_CASE("identity coefficients give the identity map") {
  std::mt19937_64 rng(1);
  const KnotGrid g(-1.0, 3.0, 2.0, 5.0, 6, 4);
  const DeformationMap f(g, identity_coefs(g));
  for (int k = 0; k < 100; ++k) {
    const Point x = test::random_point(g, rng);
    CHECK((f(x) - x).norm() < 1e-12);
    CHECK(f.jacobian_det(x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("zero coefficients, scaling and axis swap") {
  std::mt19937_64 rng(2);
  const KnotGrid g = KnotGrid::unit_square(5);
  const CoefPair id = identity_coefs(g);
  const CoefPair zero{Eigen::MatrixXd::Zero(5, 5), Eigen::MatrixXd::Zero(5, 5)};
  const CoefPair c = test::random_coefs(g, rng);
  const CoefPair scaled{2.5 * c.theta1, 2.5 * c.theta2};
  const CoefPair swapped{id.theta2, id.theta1};
  for (int k = 0; k < 20; ++k) {
    const Point x = test::random_point(g, rng);
    CHECK(DeformationMap(g, zero)(x).norm() == 0.0);
    CHECK((DeformationMap(g, scaled)(x) - 2.5 * DeformationMap(g, c)(x)).norm() < 1e-12);
    CHECK(DeformationMap(g, swapped).jacobian_det(x) == doctest::Approx(-1.0));
  }
}

TEST_CASE("mismatched coefficients are rejected") {
  const KnotGrid g = KnotGrid::unit_square(4);
  CHECK_THROWS_AS(DeformationMap(g, identity_coefs(KnotGrid::unit_square(5))), ArgumentError);
  CHECK_THROWS_AS(DeformationMap(g, identity_coefs(g))(Point(2.0, 0.5)), DomainError);
}

TEST_CASE("bilinear determinant agrees with finite differences") {
  std::mt19937_64 rng(11);
  for (int k = 4; k <= 8; ++k) {
    const KnotGrid g(0.0, 2.0, -1.0, 1.0, k, k + 1);
    for (int rep = 0; rep < 20; ++rep) {
      const DeformationMap f(g, test::random_coefs(g, rng));
      const Point x = test::random_point(g, rng);
      const double fd = test::fd_jacobian_det(f, x);
      CHECK(f.jacobian_det(x) == doctest::Approx(fd).epsilon(1e-6));
      const Eigen::VectorXd t1 = f.coef().theta1.reshaped(), t2 = f.coef().theta2.reshaped();
      const double bilinear = t1.dot(assemble_A(g, x) * t2);
      CHECK(bilinear == doctest::Approx(f.jacobian_det(x)).epsilon(1e-10));
    }
  }
}

TEST_CASE("A(x) is skew-symmetric") {
  std::mt19937_64 rng(5);
  const KnotGrid g = KnotGrid::unit_square(6);
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd a(assemble_A(g, test::random_point(g, rng)));
    CHECK((a + a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("block entries match the closed-form corner expressions") {
  // Knots at 0, tau, 2 tau, ...; cell (c1, c2) spans [c1 tau, (c1+1) tau] x
  // [c2 tau, (c2+1) tau]. With i = c1 + 2 and j = c2 + 2 the entries are
  // a = -tau (x2 - (j-1) tau), b = tau (x1 - (i-1) tau),
  // c = tau (x2 - x1 - tau (j-i)), d = -tau (x1 + x2 - tau (i+j-3)),
  // e = tau (x1 - (i-2) tau), f = -tau (x2 - (j-2) tau), all over tau^4.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double tau : {1.0, 0.25}) {
    for (int c1 = 0; c1 < 3; ++c1) {
      for (int c2 = 0; c2 < 3; ++c2) {
        const double u = c1 == 1 ? 0.5 : unif(rng), v = c2 == 1 ? 0.5 : unif(rng);
        const double x1 = (c1 + u) * tau, x2 = (c2 + v) * tau;
        const int i = c1 + 2, j = c2 + 2;
        const double t4 = std::pow(tau, 4);
        const std::array<double, 6> expect{-tau * (x2 - (j - 1) * tau) / t4,
                                           tau * (x1 - (i - 1) * tau) / t4,
                                           tau * (x2 - x1 - tau * (j - i)) / t4,
                                           -tau * (x1 + x2 - tau * (i + j - 3)) / t4,
                                           tau * (x1 - (i - 2) * tau) / t4,
                                           -tau * (x2 - (j - 2) * tau) / t4};
        const std::array<double, 6> got = skew_block_entries(u, v, tau, tau);
        for (int m = 0; m < 6; ++m) CHECK(got[m] == doctest::Approx(expect[m]).epsilon(1e-12));

        const Eigen::Matrix4d blk = skew_block(u, v, tau, tau);
        CHECK(blk(0, 1) == doctest::Approx(expect[0]));
        CHECK(blk(2, 3) == doctest::Approx(expect[5]));
        CHECK((blk + blk.transpose()).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("unit-spacing cell centre entries by hand") {
  // Cell (0, 0), x = (0.5, 0.5), tau = 1, i = j = 2:
  // a = -(0.5 - 1) = 0.5, b = 0.5 - 1 = -0.5, c = 0, d = -(1 - 1) = 0,
  // e = 0.5, f = -0.5.
  const std::array<double, 6> got = skew_block_entries(0.5, 0.5, 1.0, 1.0);
  const std::array<double, 6> hand{0.5, -0.5, 0.0, 0.0, 0.5, -0.5};
  for (int m = 0; m < 6; ++m) CHECK(got[m] == doctest::Approx(hand[m]));
}

TEST_CASE("corner functionals") {
  const KnotGrid g = KnotGrid::unit_square(5);
  const auto cons = corner_constraints(g);
  CHECK(cons.size() == 4u * 4u * 4u);
  const CoefPair id = identity_coefs(g);
  const CoefPair swapped{id.theta2, id.theta1};
  for (const auto& c : cons) {
    CHECK(c(id) == doctest::Approx(1.0));
    CHECK(c(swapped) == doctest::Approx(-1.0));
  }
  CHECK(cons[0].cell1 == 0);
  CHECK(cons[0].cell2 == 0);
  CHECK(cons[4].cell2 == 1);
  CHECK(cons[4 * 4].cell1 == 1);
  CHECK(default_margin(g) == doctest::Approx(1e-3));
}

TEST_CASE("identity corner values do not depend on the knot spacing") {
  const KnotGrid g(0.0, 4.0, 0.0, 4.0, 5, 5);
  for (const auto& c : corner_constraints(g)) CHECK(c(identity_coefs(g)) == doctest::Approx(1.0));
}

TEST_CASE("corner gradient matches finite differences") {
  std::mt19937_64 rng(4);
  const KnotGrid g = KnotGrid::unit_square(4);
  const Eigen::VectorXd x = pack(test::random_coefs(g, rng));
  Eigen::VectorXd grad(x.size());
  for (const auto& c : corner_constraints(g)) {
    c.gradient(x, grad);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += 1e-6;
      xm[k] -= 1e-6;
      CHECK(grad[k] == doctest::Approx((c(xp) - c(xm)) / 2e-6).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("cell minimum of the determinant is attained at a corner") {
  std::mt19937_64 rng(21);
  const KnotGrid g = KnotGrid::unit_square(5);
  for (int rep = 0; rep < 5; ++rep) {
    const CoefPair c = test::random_coefs(g, rng);
    const DeformationMap f(g, c);
    double dense = std::numeric_limits<double>::infinity();
    for (int c1 = 0; c1 < 4; ++c1) {
      for (int c2 = 0; c2 < 4; ++c2) {
        for (int a = 0; a < 30; ++a) {
          for (int b = 0; b < 30; ++b) {
            const Point x(g.knot(Axis::X1, c1) + (a / 29.0) * g.spacing(Axis::X1) * (1 - 1e-12),
                          g.knot(Axis::X2, c2) + (b / 29.0) * g.spacing(Axis::X2) * (1 - 1e-12));
            dense = std::min(dense, f.jacobian_det(x));
          }
        }
      }
    }
    CHECK(min_jacobian(f) == doctest::Approx(dense).epsilon(1e-10));
  }
}

TEST_CASE("a displaced coefficient folds the map") {
  const KnotGrid g = KnotGrid::unit_square(5);
  CoefPair c = identity_coefs(g);
  c.theta1(2, 2) = g.knot(Axis::X1, 3) + 0.5 * g.spacing(Axis::X1);
  CHECK(min_jacobian(g, c) < 0.0);
  CHECK(min_jacobian(g, identity_coefs(g)) == doctest::Approx(1.0));
}

TEST_CASE("affine and transformed coefficients") {
  std::mt19937_64 rng(6);
  const KnotGrid g(0.0, 1.0, 0.0, 2.0, 4, 6);
  Eigen::Matrix2d m;
  m << 1.5, 0.3, -0.2, 0.8;
  const Eigen::Vector2d b(0.4, -1.0);
  const DeformationMap f(g, affine_coefs(g, m, b));
  const double th = 0.7;
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const DeformationMap h(g, transform_coefs(f.coef(), r, 2.0, Eigen::Vector2d(1, 2)));
  for (int k = 0; k < 20; ++k) {
    const Point x = test::random_point(g, rng);
    CHECK((f(x) - (m * x + b)).norm() < 1e-12);
    CHECK((h(x) - (2.0 * r * f(x) + Eigen::Vector2d(1, 2))).norm() < 1e-12);
    CHECK(f.jacobian_det(x) == doctest::Approx(m.determinant()));
  }
}

TEST_CASE("pack and unpack round trip") {
  std::mt19937_64 rng(8);
  const KnotGrid g(0, 1, 0, 1, 3, 5);
  const CoefPair c = test::random_coefs(g, rng);
  const CoefPair back = unpack(g, pack(c));
  CHECK(back.theta1 == c.theta1);
  CHECK(back.theta2 == c.theta2);
  CHECK(pack(c)[g.flat_index(2, 1)] == c.theta1(2, 1));
  CHECK(pack(c)[g.basis_size() + g.flat_index(0, 4)] == c.theta2(0, 4));
}
