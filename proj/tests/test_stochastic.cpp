#include <cmath>
#include <numbers>

#include "doctest.h"
#include "grflow/catalog.hpp"
#include "grflow/stochastic.hpp"

using namespace grflow;
using std::numbers::pi;

namespace {

FlowSolution torus_flow(int N, double T, double dt, int every, double c = 1.0) {
  FlowOptions o;
  o.T = T;
  o.dt = dt;
  o.output_every = every;
  return run_flow(flat_torus_slice(torus_space(3, N, 2 * pi, DiffMode::spectral), c), o);
}

double mode_f(const std::array<double, 3>& x) { return std::cos(x[0] + x[1]) + 0.5 * std::sin(x[2]); }

}  // namespace

TEST_SUITE("stochastic") {
  TEST_CASE("Philox known-answer vectors") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("keyed normals and bridge coupling") {
    std::vector<double> z(100000), z2(100000);
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = keyed_normal(42, i, 3, 7, 1);
      z2[i] = z[i] * z[i];
    }
    Estimate m = mean_stderr(z), v = mean_stderr(z2);
    CHECK(std::abs(m.mean) < 4 * m.stderr_);
    CHECK(std::abs(v.mean - 1.0) < 4 * v.stderr_);
    CHECK(keyed_normal(42, 5, 3, 7, 1) == keyed_normal(42, 5, 3, 7, 1));
    CHECK(keyed_normal(42, 5, 3, 7, 1) != keyed_normal(42, 5, 3, 7, 2));

    Eigen::MatrixXd c = brownian_values(9, 3, 2, 16, 0.8);
    Eigen::MatrixXd f = brownian_values(9, 3, 2, 64, 0.8);
    for (int k = 0; k <= 16; ++k) CHECK((c.row(k) - f.row(4 * k)).norm() == 0.0);
    CHECK(c.row(0).norm() == 0.0);
    CHECK_THROWS_AS(brownian_values(1, 1, 1, 48, 1.0), ConfigError);

    // Increment variance 2 dtau.
    std::vector<double> sq;
    for (std::uint64_t p = 0; p < 4000; ++p) {
      Eigen::MatrixXd w = brownian_values(1, p, 1, 32, 1.0);
      for (int k = 0; k < 32; ++k) sq.push_back((w(k + 1, 0) - w(k, 0)) * (w(k + 1, 0) - w(k, 0)) * 32.0);
    }
    Estimate q = mean_stderr(sq);
    CHECK(std::abs(q.mean - 2.0) < 4 * q.stderr_);
  }

  TEST_CASE("Euclidean Brownian motion and trivial transport") {
    SpacePtr sp = torus_space(2, 8, 2 * pi);
    FlowSolution stat = static_family(flat_torus_slice(sp, 0.0), 1.0, 4);
    PathConfig cfg;
    cfg.x0 = {1.0, 2.0, 0.0};
    cfg.T_prime = 1.0;
    cfg.K = 16;
    cfg.N = 20000;
    cfg.seed = 11;
    GeometrySampler geo = path_sampler(cfg, stat);
    std::vector<double> dx(cfg.N), dy(cfg.N), dx2(cfg.N);
    double worst_S = 0.0;
    for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
      dx[i] = p.x.back()[0] - p.x[0][0];
      dy[i] = p.x.back()[1] - p.x[0][1];
      dx2[i] = dx[i] * dx[i];
      for (const auto& S : p.S) worst_S = std::max(worst_S, (S - SmallMat::Identity(2, 2)).cwiseAbs().maxCoeff());
    });
    Estimate mx = mean_stderr(dx), my = mean_stderr(dy), vx = mean_stderr(dx2);
    CHECK(std::abs(mx.mean) < 3 * mx.stderr_);
    CHECK(std::abs(my.mean) < 3 * my.stderr_);
    CHECK(std::abs(vx.mean - 2.0) < 3 * vx.stderr_);
    CHECK(worst_S == 0.0);
    BrownianPath p = sample_path(cfg, geo, 3);
    CHECK((transport(p, 0) - SmallMat::Identity(2, 2)).norm() == 0.0);
  }

  TEST_CASE("transport is a rotation with torsion") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    FlowSolution stat = static_family(flat_torus_slice(sp, 0.9), 1.0, 4);
    PathConfig cfg;
    cfg.T_prime = 1.0;
    cfg.K = 64;
    cfg.N = 50;
    GeometrySampler geo = path_sampler(cfg, stat);
    const double dtau = 1.0 / 64;
    double rot = 0.0;
    for (std::size_t i = 0; i < cfg.N; ++i) {
      BrownianPath p = sample_path(cfg, geo, i);
      for (std::size_t k = 0; k <= p.steps(); ++k) {
        SmallMat S = p.S[k];
        CHECK((S.transpose() * S - SmallMat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(S.determinant() == doctest::Approx(1.0));
        if (k < p.steps()) CHECK(p.drift[k] <= 5 * dtau);
      }
      rot = std::max(rot, (p.S.back() - SmallMat::Identity(3, 3)).norm());
    }
    CHECK(rot > 0.1);

    FlowSolution tor = torus_flow(8, 0.5, 1e-3, 50);
    PathConfig c2;
    c2.T_prime = 0.5;
    c2.K = 32;
    GeometrySampler g2 = path_sampler(c2, tor);
    BrownianPath p = sample_path(c2, g2, 0);
    for (std::size_t k = 0; k <= p.steps(); ++k) CHECK(transport_defect(p, g2, 0.5, k) < 1e-12);
  }

  TEST_CASE("heat representation on the torus solution") {
    FlowSolution tor = torus_flow(12, 0.4, 1e-3, 25);
    const double Tp = 0.4, s = 0.1;
    Field f0 = sample_scalar(*tor.space(), mode_f);
    Field w = heat_flow(f0, s, Tp, tor);
    const std::size_t node = tor.space()->grid().index(2, 5, 7);
    PathConfig cfg;
    cfg.x0 = tor.space()->grid().coords(node);
    cfg.T_prime = Tp;
    cfg.horizon = Tp - s;
    cfg.K = 32;
    cfg.N = 6000;
    cfg.seed = 5;
    GeometrySampler geo = path_sampler(cfg, tor);
    Estimate e = mean_stderr(terminal_values(mode_f, cfg, geo));
    MESSAGE("MC ", e.mean, " +- ", e.stderr_, " PDE ", w.at(node));
    CHECK(std::abs(e.mean - w.at(node)) < 3 * e.stderr_ + 0.01);
  }

  TEST_CASE("Feynman-Kac transport") {
    FlowSolution tor = torus_flow(12, 0.4, 1e-3, 25);
    const double Tp = 0.4, s = 0.0;
    const std::size_t node = tor.space()->grid().index(3, 1, 4);
    PathConfig cfg;
    cfg.x0 = tor.space()->grid().coords(node);
    cfg.T_prime = Tp;
    cfg.K = 32;
    cfg.N = 4000;
    cfg.seed = 8;
    GeometrySampler geo = path_sampler(cfg, tor);
    VectorFn Z = [](const std::array<double, 3>& x, const PointGeometry& pg) {
      SmallVec du(3);
      du << -std::sin(x[0] + x[1]), -std::sin(x[0] + x[1]), 0.5 * std::cos(x[2]);
      return SmallVec(pg.ginv * du);
    };
    VectorEstimate plain = feynman_kac(Z, nullptr, cfg, geo);
    const double a = 0.7;
    VectorEstimate scaled =
        feynman_kac(Z, [a](const std::array<double, 3>&, const PointGeometry&) { return SmallMat(a * SmallMat::Identity(3, 3)); },
                    cfg, geo);
    CHECK((scaled.mean - std::exp(a * Tp) * plain.mean).cwiseAbs().maxCoeff() < 1e-10);

    VectorEstimate grad = feynman_kac(Z, [](const std::array<double, 3>&, const PointGeometry& pg) { return defect_endomorphism(pg); },
                                      cfg, geo);
    Field u0 = sample_scalar(*tor.space(), mode_f);
    Field uT = heat_flow(u0, s, Tp, tor);
    Field gr = gradient(*tor.space(), uT, tor.node(tor.size() - 1).g);
    for (int c = 0; c < 3; ++c) {
      MESSAGE("component ", c, " MC ", grad.mean[c], " +- ", grad.stderr_[c], " PDE ", gr.at(node, c));
      CHECK(std::abs(grad.mean[c] - gr.at(node, c)) < 3 * grad.stderr_[c] + 0.01);
    }
  }

  TEST_CASE("trigonometric interpolant") {
    SpacePtr sp = torus_space(3, 12, 2 * pi);
    Field f = sample_scalar(*sp, mode_f);
    TrigInterpolant ip(sp->grid(), f);
    CHECK(ip.modes() == 4);
    std::array<double, 3> x{0.3, -1.7, 8.1};
    double v;
    SmallVec g;
    SmallMat h;
    ip.jet(x, v, &g, &h);
    CHECK(v == doctest::Approx(mode_f(x)).epsilon(1e-12));
    CHECK(g[0] == doctest::Approx(-std::sin(x[0] + x[1])).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(0.5 * std::cos(x[2])).epsilon(1e-12));
    CHECK(h(0, 1) == doctest::Approx(-std::cos(x[0] + x[1])).epsilon(1e-12));
    CHECK(h(2, 2) == doctest::Approx(-0.5 * std::sin(x[2])).epsilon(1e-12));
  }

  TEST_CASE("paths are independent of the thread count") {
    SpacePtr sp = torus_space(1, 16, 2 * pi);
    FlowSolution stat = static_family(make_slice(sp, conformal_metric(*sp, 0.3), zero_two_form(*sp), volume_three_form(*sp, 0.0)), 1.0, 8);
    PathConfig cfg;
    cfg.T_prime = 1.0;
    cfg.K = 16;
    cfg.N = 64;
    GeometrySampler geo = path_sampler(cfg, stat);
    auto run = [&](int k) {
      set_threads(k);
      return terminal_values([](const std::array<double, 3>& x) { return x[0]; }, cfg, geo);
    };
    std::vector<double> a = run(1), b = run(3);
    set_threads(1);
    CHECK(a == b);
  }

  TEST_CASE("two-time histogram matches the kernel product") {
    SpacePtr sp = torus_space(1, 64, 2 * pi, DiffMode::spectral);
    FlowSolution stat = static_family(make_slice(sp, conformal_metric(*sp, 0.5), zero_two_form(*sp), volume_three_form(*sp, 0.0)), 1.0, 4);
    PathConfig cfg;
    cfg.x0 = sp->grid().coords(20);
    cfg.T_prime = 1.0;
    cfg.K = 128;
    cfg.N = 30000;
    cfg.seed = 3;
    Chi2Test t = two_time_chi2(stat, cfg, 0.375, 0.75, 8);
    MESSAGE("chi2 ", t.statistic, " dof ", t.dof, " p ", t.p_value);
    CHECK(t.expected_mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.p_value > 0.01);
    CHECK_THROWS_AS(two_time_chi2(stat, cfg, 0.375, 0.75, 7), ConfigError);
    cfg.x0 = {0.05, 0, 0};
    CHECK_THROWS_AS(two_time_chi2(stat, cfg, 0.375, 0.75, 8), ConfigError);
  }

  TEST_CASE("weak error is first order in the step") {
    SpacePtr sp = torus_space(1, 16, 2 * pi, DiffMode::spectral);
    FlowSolution stat = static_family(make_slice(sp, conformal_metric(*sp, 0.8), zero_two_form(*sp), volume_three_form(*sp, 0.0)), 1.0, 4);
    PathConfig cfg;
    cfg.x0 = {0.3, 0, 0};
    cfg.T_prime = 1.0;
    cfg.N = 20000;
    cfg.seed = 4;
    WeakOrder w = weak_order([](const std::array<double, 3>& x) { return std::cos(x[0]); }, cfg, stat, {16, 32, 64});
    MESSAGE("ratio ", w.ratio[0], " order ", w.order, " +- ", w.order_se);
    CHECK(std::abs(w.order - 1.0) < std::max(0.3, 3 * w.order_se));
  }
}
