#include <cmath>
#include <numbers>

#include "doctest.h"
#include "grflow/catalog.hpp"
#include "grflow/geometry.hpp"

using namespace grflow;
using std::numbers::pi;

namespace {

// Ricci of a left-invariant metric on a unimodular group from the
// orthonormal-basis formula Rc(X,X) = -1/2 sum |[X,e_i]|^2 - 1/2 B(X,X)
// + 1/4 sum <[e_i,e_j],X>^2, polarized. Independent of the Koszul code.
Eigen::Matrix3d group_ricci_oracle(const HomogeneousModel& m, const Eigen::Matrix3d& G) {
  Eigen::Matrix3d L = G.llt().matrixL();
  Eigen::Matrix3d A = L.transpose().inverse();  // columns: orthonormal frame
  Eigen::Matrix3d Ainv = A.inverse();
  double c[3][3][3] = {};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int d = 0; d < 3; ++d) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) s += A(i, a) * A(j, b) * m(k, i, j) * Ainv(d, k);
        c[d][a][b] = s;
      }
  auto ad = [&](const Eigen::Vector3d& x) {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (int d = 0; d < 3; ++d)
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a) M(d, b) += x(a) * c[d][a][b];
    return M;
  };
  auto q = [&](const Eigen::Vector3d& x) {
    Eigen::Matrix3d adx = ad(x);
    double r = -0.5 * adx.squaredNorm() - 0.5 * (adx * adx).trace();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double p = 0.0;
        for (int d = 0; d < 3; ++d) p += c[d][i][j] * x(d);
        r += 0.25 * p * p;
      }
    return r;
  };
  Eigen::Matrix3d Rf;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      Eigen::Vector3d ea = Eigen::Vector3d::Unit(a), eb = Eigen::Vector3d::Unit(b);
      Rf(a, b) = 0.5 * (q(ea + eb) - q(ea) - q(eb));
    }
  return Ainv.transpose() * Rf * Ainv;
}

// Sum_i R^i_ijk for a connection on a homogeneous model, from
// R(X_i,X_j)X_k = nabla_i nabla_j X_k - nabla_j nabla_i X_k - nabla_[X_i,X_j] X_k.
Eigen::Matrix3d group_connection_ricci(const HomogeneousModel& m, const Field& gamma) {
  auto G = [&](int p, int i, int j) { return gamma.at(0, p, i, j); };
  Eigen::Matrix3d rc = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        double r = 0.0;
        for (int q = 0; q < 3; ++q) {
          r += G(q, j, k) * G(i, i, q) - G(q, i, k) * G(i, j, q);
          r -= m(q, i, j) * G(i, q, k);
        }
        rc(j, k) += r;
      }
  return rc;
}

double conformal_ricci_error(int N) {
  SpacePtr sp = torus_space(2, N, 2 * pi);
  const double a = 0.3;
  Field g = conformal_metric(*sp, a);
  Field rc = ricci_lc(*sp, g);
  double err = 0.0;
  for (std::size_t q = 0; q < sp->nodes(); ++q) {
    const double x = sp->grid().coords(q)[0];
    const double expect = a * std::cos(x);  // -Delta phi
    err = std::max({err, std::abs(rc.at(q, 0, 0) - expect), std::abs(rc.at(q, 1, 1) - expect),
                    std::abs(rc.at(q, 0, 1))});
  }
  return err;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("h_squared of a constant volume form") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    const double c = 0.7;
    Field H = volume_three_form(*sp, c);
    Field g = identity_metric(*sp);
    Field H2 = h_squared(H, g);
    Field n2 = h_norm_squared(H, g);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(H2.at(5, i, j) == doctest::Approx(i == j ? 2 * c * c : 0.0));
    CHECK(n2.at(3) == doctest::Approx(6 * c * c));
  }

  TEST_CASE("su(2): Ricci, H^2 and Bismut flatness") {
    const double lambda = 1.3;
    GeometrySlice s = su2_slice(lambda, lambda);
    Field rc = ricci_lc(*s.space, s.g);
    Field H2 = h_squared(*s.H0, s.g);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        CHECK(rc.at(0, i, j) == doctest::Approx(i == j ? lambda * lambda / 2 : 0.0));
        CHECK(H2.at(0, i, j) == doctest::Approx(i == j ? 2 * lambda * lambda : 0.0));
      }
    BismutRicci br = bismut_ricci(s);
    CHECK(br.full.max_abs() < 1e-12);
    CHECK(codifferential_H(*s.space, *s.H0, s.g).max_abs() < 1e-14);
    Field gam = bismut_connection(s);
    CHECK(covariant_derivative_metric(*s.space, s.g, gam).max_abs() < 1e-12);
  }

  TEST_CASE("left-invariant Ricci matches the orthonormal-basis oracle") {
    HomogeneousModel m = HomogeneousModel::su2(0.9);
    SpacePtr sp = make_space(m);
    Eigen::Matrix3d G;
    G << 1.4, 0.2, -0.1, 0.2, 0.8, 0.05, -0.1, 0.05, 1.1;
    Field g = constant_tensor(*sp, G, Symmetry::symmetric);
    Field rc = ricci_lc(*sp, g);
    Eigen::Matrix3d oracle = group_ricci_oracle(m, G);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(rc.at(0, i, j) == doctest::Approx(oracle(i, j)).epsilon(1e-10));
  }

  TEST_CASE("Bismut Ricci equals the contracted curvature of the Bismut connection") {
    HomogeneousModel m = HomogeneousModel::su2(1.1);
    SpacePtr sp = make_space(m);
    Eigen::Matrix3d G;
    G << 1.2, 0.1, 0.0, 0.1, 0.9, -0.2, 0.0, -0.2, 1.5;
    Field g = constant_tensor(*sp, G, Symmetry::symmetric);
    Eigen::Matrix3d B;
    B << 0, 0.3, -0.4, -0.3, 0, 0.2, 0.4, -0.2, 0;
    Field b = constant_tensor(*sp, B, Symmetry::antisymmetric);
    GeometrySlice s = make_slice(sp, g, b, cartan_three_form(*sp, 0.6));
    Field H = total_three_form(s);
    Field gam = bismut_connection(*sp, g, H);
    Eigen::Matrix3d rc = group_connection_ricci(m, gam);
    BismutRicci br = bismut_ricci(s);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(br.full.at(0, i, j) == doctest::Approx(rc(i, j)).epsilon(1e-10));
    CHECK(covariant_derivative_metric(*sp, g, gam).max_abs() < 1e-12);
    // Torsion is g^-1 H.
    Field T = torsion(*sp, gam);
    Field ginv = inverse_metric(g);
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double e = 0.0;
          for (int l = 0; l < 3; ++l) e += ginv.at(0, k, l) * H.at(0, l, i, j);
          CHECK(T.at(0, k, i, j) == doctest::Approx(e).epsilon(1e-12));
        }
  }

  TEST_CASE("Bismut Ricci on a grid equals the finite-difference curvature contraction") {
    auto err = [](int N) {
      SpacePtr sp = torus_space(3, N, 2 * pi);
      GeometrySlice s = make_slice(sp, conformal_metric(*sp, 0.2, 1, 1), mode_two_form(*sp, 0.6, 1, 2),
                                   volume_three_form(*sp, 0.5));
      Field gam = bismut_connection(s);
      std::vector<Field> dgam;
      for (int a = 0; a < 3; ++a) dgam.push_back(sp->partial(gam, a));
      BismutRicci br = bismut_ricci(s);
      double e = 0.0;
      for (std::size_t q = 0; q < sp->nodes(); ++q)
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k) {
            double r = 0.0;
            for (int i = 0; i < 3; ++i) {
              r += dgam[i].at(q, i, j, k) - dgam[j].at(q, i, i, k);
              for (int m = 0; m < 3; ++m) r += gam.at(q, i, i, m) * gam.at(q, m, j, k) - gam.at(q, i, j, m) * gam.at(q, m, i, k);
            }
            e = std::max(e, std::abs(r - br.full.at(q, j, k)));
          }
      CHECK(br.antisym.max_abs() > 0.1);
      return e;
    };
    const double e1 = err(16), e2 = err(32);
    CHECK(e2 < 1e-3);
    CHECK(e1 / e2 > 10.0);
  }

  TEST_CASE("Bismut data on the flat torus with constant H") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    const double c = 0.8;
    GeometrySlice s = flat_torus_slice(sp, c);
    Field gam = bismut_connection(s);
    CHECK(gam.at(4, 2, 0, 1) == doctest::Approx(c / 2));
    CHECK(gam.at(4, 2, 1, 0) == doctest::Approx(-c / 2));
    CHECK(gam.at(4, 0, 1, 2) == doctest::Approx(c / 2));
    BismutRicci br = bismut_ricci(s);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(br.full.at(7, i, j) == doctest::Approx(i == j ? -c * c / 2 : 0.0));
  }

  TEST_CASE("conformal Ricci on T^2 converges at fourth order") {
    const double e16 = conformal_ricci_error(16), e32 = conformal_ricci_error(32);
    CHECK(e32 < 1e-3);
    CHECK(e16 / e32 >= 12.0);
    CHECK(e16 / e32 <= 20.0);
  }

  TEST_CASE("codifferential of d(mode) matches the analytic form") {
    auto err = [](int N) {
      SpacePtr sp = torus_space(3, N, 2 * pi);
      const double beta = 0.5;
      Field b = mode_two_form(*sp, beta, 1, 2);
      GeometrySlice s = make_slice(sp, identity_metric(*sp), b, volume_three_form(*sp, 0.0));
      Field H = total_three_form(s);
      Field ds = codifferential_H(*sp, H, s.g);
      BismutRicci br = bismut_ricci(s);
      double e = 0.0, e_anti = 0.0, e_H = 0.0;
      for (std::size_t q = 0; q < sp->nodes(); ++q) {
        const double x = sp->grid().coords(q)[0];
        e = std::max(e, std::abs(ds.at(q, 1, 2) - beta * std::sin(x)));
        e = std::max(e, std::abs(ds.at(q, 2, 1) + beta * std::sin(x)));
        e_H = std::max(e_H, std::abs(H.at(q, 0, 1, 2) - beta * std::cos(x)));
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) e_anti = std::max(e_anti, std::abs(br.antisym.at(q, i, j) + 0.5 * ds.at(q, i, j)));
      }
      CHECK(e_anti <= 1e-14);
      return std::max(e, e_H);
    };
    const double e1 = err(16), e2 = err(32);
    CHECK(e2 < 1e-4);
    CHECK(e1 / e2 >= 12.0);
  }

  TEST_CASE("exterior derivative converges at fourth order") {
    auto err = [](int N) {
      SpacePtr sp = torus_space(3, N, 2 * pi);
      Field b = mode_two_form(*sp, 1.0, 1, 2, 2, 0);
      Field db = exterior_derivative(*sp, b);
      double e = 0.0;
      for (std::size_t q = 0; q < sp->nodes(); ++q) {
        const double x = sp->grid().coords(q)[0];
        e = std::max(e, std::abs(db.at(q, 0, 1, 2) - 2.0 * std::cos(2.0 * x)));
        e = std::max(e, std::abs(db.at(q, 2, 1, 0) + 2.0 * std::cos(2.0 * x)));
      }
      return e;
    };
    const double e16 = err(16), e32 = err(32), e64 = err(64);
    const double order = std::log2(std::sqrt(e16 / e64));
    CHECK(order == doctest::Approx(4.0).epsilon(0.05));
    CHECK(e32 < e16);
  }

  TEST_CASE("function Laplacian of a Fourier mode and independence of H") {
    SpacePtr sp = torus_space(1, 64, 2.0);
    Field g = identity_metric(*sp);
    Field u = sample_scalar(*sp, [](const std::array<double, 3>& x) { return std::cos(pi * x[0]); });
    Field lap = laplacian_fn(*sp, u, g);
    for (std::size_t q = 0; q < sp->nodes(); ++q) CHECK(lap.at(q) == doctest::Approx(-pi * pi * u.at(q)).epsilon(1e-4));

    SpacePtr sp3 = torus_space(3, 8, 2 * pi);
    Field g3 = conformal_metric(*sp3, 0.2);
    Field u3 = sample_scalar(*sp3, [](const std::array<double, 3>& x) { return std::sin(x[0] + 2 * x[1]); });
    Field a = laplacian_fn(*sp3, u3, g3);
    Field gam = bismut_connection(*sp3, g3, volume_three_form(*sp3, 1.5));
    Field h = hessian(*sp3, u3, gam);
    Field ginv = inverse_metric(g3);
    double worst = 0.0;
    for (std::size_t q = 0; q < sp3->nodes(); ++q) {
      double tr = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) tr += ginv.at(q, i, j) * h.at(q, i, j);
      worst = std::max(worst, std::abs(tr - a.at(q)));
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("vector Laplacian of a constant field with constant H") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    const double c = 0.9;
    GeometrySlice s = flat_torus_slice(sp, c);
    Field Y(3, 1, sp->nodes());
    const double y[3] = {0.3, -1.1, 0.7};
    for (std::size_t q = 0; q < sp->nodes(); ++q)
      for (int k = 0; k < 3; ++k) Y.at(q, k) = y[k];
    Field lap = laplacian_vec(s, Y);
    // Brute-force expansion of tr (d + Gamma)^2 with constant coefficients.
    Field gam = bismut_connection(s);
    for (int k = 0; k < 3; ++k) {
      double e = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m)
            e += gam.at(0, k, i, l) * gam.at(0, l, i, m) * y[m] - gam.at(0, l, i, i) * gam.at(0, k, l, m) * y[m];
      CHECK(lap.at(3, k) == doctest::Approx(e).epsilon(1e-12));
      CHECK(lap.at(3, k) == doctest::Approx(-0.5 * c * c * y[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("h_squared is positive semidefinite and slices reject bad input") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    Field b = mode_two_form(*sp, 0.7, 0, 1, 1, 2);
    GeometrySlice s = make_slice(sp, conformal_metric(*sp, 0.3), b, volume_three_form(*sp, 0.4));
    Field H2 = h_squared(total_three_form(s), s.g);
    CHECK(min_eigenvalue(H2) >= -1e-12);
    Field bad = identity_metric(*sp);
    bad.at(0, 0, 0) = -1.0;
    CHECK_THROWS_AS(make_slice(sp, bad, zero_two_form(*sp), volume_three_form(*sp, 0.0)), GeometryError);
    CHECK_THROWS(PeriodicGrid(2, 4, 1.0).validate());
    std::vector<double> c(27, 0.0);
    c[(0 * 3 + 0) * 3 + 1] = 1.0;
    CHECK_THROWS(HomogeneousModel(3, c).validate());
  }

  TEST_CASE("spectral and finite-difference derivatives agree on a smooth mode") {
    auto err = [](int N, DiffMode mode) {
      SpacePtr sp = torus_space(2, N, 2 * pi, mode);
      Field u = sample_scalar(*sp, [](const std::array<double, 3>& x) { return std::sin(x[0]) * std::cos(2 * x[1]); });
      Field d = sp->partial(u, 1);
      Field dd(1, 0, u.nodes());
      sp->deriv().d2(u.component(0), dd.component(0), 1);
      double e = 0.0;
      for (std::size_t q = 0; q < sp->nodes(); ++q) {
        auto x = sp->grid().coords(q);
        e = std::max(e, std::abs(d.at(q) + 2 * std::sin(x[0]) * std::sin(2 * x[1])));
        e = std::max(e, std::abs(dd.at(q) + 4 * std::sin(x[0]) * std::cos(2 * x[1])));
      }
      return e;
    };
    CHECK(err(16, DiffMode::spectral) < 1e-11);
    const double r = err(16, DiffMode::fd4) / err(32, DiffMode::fd4);
    CHECK(r >= 12.0);
    CHECK(r <= 20.0);
  }
}
