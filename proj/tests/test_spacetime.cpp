#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "grflow/catalog.hpp"
#include "grflow/spacetime.hpp"

using namespace grflow;
using std::numbers::pi;

namespace {

FlowSolution torus_flow(int N, double T, double dt, int every, double c = 1.0, DiffMode mode = DiffMode::fd4) {
  FlowOptions o;
  o.T = T;
  o.dt = dt;
  o.output_every = every;
  return run_flow(flat_torus_slice(torus_space(3, N, 2 * pi, mode), c), o);
}

// Non-uniform 3D flow: conformal metric, a b-mode and a constant background H.
FlowSolution mode_flow(int N, double T, double dt, int every, DiffMode mode = DiffMode::fd4) {
  SpacePtr sp = torus_space(3, N, 2 * pi, mode);
  GeometrySlice s = make_slice(sp, conformal_metric(*sp, 0.1), mode_two_form(*sp, 0.2, 1, 2),
                               volume_three_form(*sp, 0.5));
  FlowOptions o;
  o.T = T;
  o.dt = dt;
  o.output_every = every;
  return run_flow(s, o);
}

Field smooth_vector(const Space& sp) {
  const auto& grid = sp.grid();
  Field Y(3, 1, sp.nodes());
  for (std::size_t i = 0; i < sp.nodes(); ++i) {
    auto x = grid.coords(i);
    Y.at(i, 0) = std::sin(x[1]) + 0.3;
    Y.at(i, 1) = 0.5 * std::cos(x[2] + x[0]);
    Y.at(i, 2) = std::sin(x[0] + x[2]);
  }
  return Y;
}

double mode_u(const std::array<double, 3>& x) { return std::cos(x[0] + x[1]) + 0.4 * std::sin(x[2]); }

// Conformal metric e^{2 a cos x} delta with H = c dx^dy^dz, analytically.
struct AnalyticConformal {
  double a = 0.1;
  double c = 0.5;

  PointGeometry operator()(const std::array<double, 3>& x, double) const {
    PointGeometry pg;
    pg.dim = 3;
    const double phi = a * std::cos(x[0]);
    const double e2 = std::exp(2 * phi);
    double dphi[3] = {-a * std::sin(x[0]), 0.0, 0.0};
    pg.g = e2 * SmallMat::Identity(3, 3);
    pg.ginv = SmallMat::Identity(3, 3) / e2;
    pg.dg = SmallMat::Zero(3, 3);
    pg.db = SmallMat::Zero(3, 3);
    pg.defect = SmallMat::Zero(3, 3);
    auto eps = [](int i, int j, int k) { return static_cast<double>((i - j) * (j - k) * (k - i)) / 2.0; };
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double v = (k == i ? dphi[j] : 0.0) + (k == j ? dphi[i] : 0.0) - (i == j ? dphi[k] : 0.0);
          v += 0.5 * c * eps(k, i, j) / e2;
          pg.gamma[(k * 3 + i) * 3 + j] = v;
        }
    return pg;
  }
};

Eigen::Vector3d vec_Y(const std::array<double, 3>& x) {
  return {std::sin(x[1]) + 0.3, 0.5 * std::cos(x[2] + x[0]), std::sin(x[0] + x[2])};
}

Eigen::Matrix3d dvec_Y(const std::array<double, 3>& x) {
  // (m, s) = d_s Y^m
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
  d(0, 1) = std::cos(x[1]);
  d(1, 0) = d(1, 2) = -0.5 * std::sin(x[2] + x[0]);
  d(2, 0) = d(2, 2) = std::cos(x[0] + x[2]);
  return d;
}

using FramePoint = std::pair<std::array<double, 3>, SmallMat>;
using FrameFn = std::function<double(const FramePoint&)>;

// Central difference of F along the vector field E_i at p.
double apply_E(const AnalyticConformal& geo, int i, const FrameFn& F, const FramePoint& p, double eps) {
  FrameVectorFields f = frame_vector_fields(p.second, geo(p.first, 0.0));
  FramePoint a = p, b = p;
  for (int s = 0; s < 3; ++s) {
    a.first[s] += eps * f.Ex(s, i);
    b.first[s] -= eps * f.Ex(s, i);
  }
  a.second += eps * f.Ee[i];
  b.second -= eps * f.Ee[i];
  return (F(a) - F(b)) / (2 * eps);
}

SmallMat rotation(double a, double b) {
  Eigen::Matrix3d r = (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(b, Eigen::Vector3d::UnitX()))
                          .toRotationMatrix();
  return r;
}

}  // namespace

TEST_SUITE("spacetime") {
  TEST_CASE("nabla_t on static families and the torus solution") {
    SpacePtr sp = torus_space(3, 8, 2 * pi);
    GeometrySlice s = make_slice(sp, conformal_metric(*sp, 0.2), mode_two_form(*sp, 0.3, 0, 1, 1, 2),
                                 volume_three_form(*sp, 0.4));
    FlowSolution stat = static_family(s, 1.0, 10);
    Field Y0 = smooth_vector(*sp);
    SpacetimeVectorField Y{&stat, 0, {}};
    for (std::size_t m = 0; m < stat.size(); ++m) Y.values.push_back(stat.t(m) * Y0);
    SpacetimeVectorField nY = nabla_t(Y);
    for (const Field& v : nY.values) CHECK(max_diff(v, Y0) < 1e-12);

    FlowSolution tor = torus_flow(8, 0.2, 1e-3, 10);
    SpacetimeVectorField C{&tor, 0, {}};
    Field Yc = smooth_vector(*tor.space());
    for (std::size_t m = 0; m < tor.size(); ++m) C.values.push_back(Yc);
    SpacetimeVectorField nC = nabla_t(C);
    for (std::size_t k = 0; k < nC.size(); ++k) {
      const double f = std::cbrt(1 + 3 * nC.t(k));
      CHECK(max_diff(nC.values[k], (0.5 / (f * f * f)) * Yc) < 1e-10);
    }
  }

  TEST_CASE("metric compatibility at second order in dt") {
    FlowSolution coarse = mode_flow(8, 0.08, 2e-3, 10);
    FlowSolution fine = mode_flow(8, 0.08, 2e-3, 5);
    auto build = [](const FlowSolution& f) {
      SpacetimeVectorField Y{&f, 0, {}};
      Field Y0 = smooth_vector(*f.space());
      for (std::size_t m = 0; m < f.size(); ++m) {
        const double t = f.t(m);
        Field v = Y0;
        for (double& x : v.data()) x *= std::exp(-t) * (1 + x * t);
        Y.values.push_back(v);
      }
      return Y;
    };
    for (TwistSign sign : {TwistSign::plus, TwistSign::minus}) {
      double e1 = compatibility_residual(build(coarse), sign);
      double e2 = compatibility_residual(build(fine), sign);
      CHECK(e1 < 1e-2);
      CHECK(std::log2(e1 / e2) >= 1.9);
    }
  }

  TEST_CASE("commutator formula on grids") {
    SpacePtr flat = torus_space(3, 16, 2 * pi, DiffMode::spectral);
    Field u = sample_scalar(*flat, mode_u);
    GeometrySlice s0 = flat_torus_slice(flat, 0.0);
    CHECK(commutator_residual(u, s0).max_abs() < 1e-12);
    GeometrySlice sc = flat_torus_slice(flat, 0.8);
    Field rc = bismut_ricci(sc).full;
    CHECK(rc.at(5, 0, 0) == doctest::Approx(-0.32));
    CHECK(commutator_residual(u, sc).max_abs() < 1e-10);

    auto res = [](int N) {
      SpacePtr sp = torus_space(3, N, 2 * pi);
      GeometrySlice s = make_slice(sp, conformal_metric(*sp, 0.2), mode_two_form(*sp, 0.3, 1, 2, 1, 0),
                                   volume_three_form(*sp, 0.5));
      return commutator_residual(sample_scalar(*sp, mode_u), s).max_abs();
    };
    double e1 = res(12), e2 = res(24);
    MESSAGE("commutator order ", std::log2(e1 / e2));
    CHECK(e2 < 2e-2);
    CHECK(std::log2(e1 / e2) >= 2.0);
  }

  TEST_CASE("commutator formula on SU(2) from jets") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (auto [lambda, kappa, scale] : {std::tuple{1.0, 1.0, 1.0}, {1.0, 0.3, 1.0}, {2.0, 0.0, 1.7}, {1.5, 2.5, 0.6}}) {
      GeometrySlice s = su2_slice(lambda, kappa, scale);
      for (int rep = 0; rep < 3; ++rep) {
        Eigen::Vector4d q(nd(rng), nd(rng), nd(rng), nd(rng));
        q.normalize();
        Eigen::Vector4d a(nd(rng), nd(rng), nd(rng), nd(rng));
        FunctionJet jet = su2_linear_jet(lambda, q, a);
        CHECK(commutator_residual_jet(s, jet).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }

  TEST_CASE("gradient evolution on the torus solution and the sign switch") {
    auto run = [](int N, int every) {
      FlowSolution f = torus_flow(N, 0.1, 1e-3, every);
      Field u0 = sample_scalar(*f.space(), mode_u);
      return gradient_evolution_residual(u0, f, 0, f.size() - 1);
    };
    GradientEvolution a = run(12, 20), b = run(24, 10);
    MESSAGE("gradient evolution order ", std::log2(a.residual / b.residual));
    CHECK(b.residual < 5e-3 * b.grad_norm);
    CHECK(std::log2(a.residual / b.residual) >= 1.9);

    FlowSolution tor = torus_flow(8, 0.1, 1e-3, 10);
    for (std::size_t m = 0; m < tor.size(); ++m) CHECK(tor.defect(m).max_abs() < 1e-8);

    FlowSolution bf = mode_flow(12, 0.06, 1e-3, 10, DiffMode::spectral);
    Field u0 = sample_scalar(*bf.space(), mode_u);
    GradientEvolution plus = gradient_evolution_residual(u0, bf, 0, bf.size() - 1, TwistSign::plus);
    GradientEvolution minus = gradient_evolution_residual(u0, bf, 0, bf.size() - 1, TwistSign::minus);
    MESSAGE("sign plus ", plus.residual, " minus ", minus.residual);
    CHECK(minus.residual > 20 * plus.residual);

    FlowSolution tor_s = torus_flow(8, 0.1, 1e-3, 10, 1.0, DiffMode::spectral);
    FlowSolution pert = perturb_family(tor_s, 0.1, PerturbMode::conformal_drift);
    Field w0 = sample_scalar(*pert.space(), mode_u);
    GradientEvolution pure = gradient_evolution_residual(w0, pert, 0, 2, TwistSign::plus, true);
    GradientEvolution full = gradient_evolution_residual(w0, pert, 0, 2, TwistSign::plus, false);
    CHECK(pure.per_node[0] >= 0.9 * 0.05 * pure.grad_norm);
    CHECK(full.residual < 0.1 * pure.residual);
  }

  TEST_CASE("frame vector fields") {
    PointGeometry flat;
    flat.dim = 3;
    flat.g = flat.ginv = SmallMat::Identity(3, 3);
    flat.dg = flat.db = flat.defect = SmallMat::Zero(3, 3);
    SmallMat id = SmallMat::Identity(3, 3);
    FrameVectorFields f = frame_vector_fields(id, flat);
    CHECK((f.Ex - id).norm() == 0.0);
    for (const auto& m : f.Ee) CHECK(m.norm() == 0.0);
    CHECK(f.dt_frame.norm() == 0.0);
    SmallMat v = f.V(id, 0, 1);
    CHECK(v(1, 0) == 1.0);
    CHECK(v(0, 1) == -1.0);

    // One Euler step of d_t^* keeps the frame orthonormal to O(dt^2).
    SmallMat g(3, 3), dg(3, 3), db(3, 3);
    g << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0;
    dg << 0.4, -0.1, 0.2, -0.1, -0.3, 0.05, 0.2, 0.05, 0.6;
    db << 0.0, 0.7, -0.2, -0.7, 0.0, 0.4, 0.2, -0.4, 0.0;
    PointGeometry pg = flat;
    pg.g = g;
    pg.ginv = g.inverse();
    pg.dg = dg;
    pg.db = db;
    SmallMat e = orthonormalize(rotation(0.3, 0.7), g);
    CHECK(orthonormality_defect(e, g) < 1e-14);
    for (TwistSign sign : {TwistSign::plus, TwistSign::minus}) {
      double prev = 0.0;
      for (double dt : {1e-2, 5e-3}) {
        FrameVectorFields fv = frame_vector_fields(e, pg, sign);
        SmallMat e1 = e + dt * fv.dt_frame;
        double d = orthonormality_defect(e1, g + dt * dg);
        if (prev > 0) CHECK(prev / d == doctest::Approx(4.0).epsilon(0.05));
        prev = d;
      }
    }
  }

  TEST_CASE("lift identities on an analytic conformal geometry") {
    AnalyticConformal geo;
    SpacePtr sp = torus_space(3, 24, 2 * pi, DiffMode::spectral);
    GeometrySlice s = make_slice(sp, conformal_metric(*sp, geo.a), zero_two_form(*sp), volume_three_form(*sp, geo.c));
    Field Yf = smooth_vector(*sp);
    Field lapY = laplacian_vec(s, Yf);
    FrameFn lifted[3];
    for (int k = 0; k < 3; ++k)
      lifted[k] = [&geo, k](const FramePoint& p) {
        PointGeometry pg = geo(p.first, 0.0);
        Eigen::Vector3d Y = vec_Y(p.first);
        Eigen::Vector3d ek = p.second.col(k);
        return Y.dot(pg.g * ek);
      };
    for (std::size_t node : {std::size_t(0), std::size_t(1234), std::size_t(9000)}) {
      std::array<double, 3> x = sp->grid().coords(node);
      PointGeometry pg = geo(x, 0.0);
      SmallMat e = orthonormalize(rotation(0.4 + node * 1e-3, -0.9), pg.g);
      FramePoint p{x, e};
      Eigen::Matrix3d dY = dvec_Y(x);
      Eigen::Vector3d Y = vec_Y(x);
      for (int k = 0; k < 3; ++k) {
        // E_i Y~_k = g(nabla_{e_i} Y, e_k)
        for (int i = 0; i < 3; ++i) {
          Eigen::Vector3d cov = Eigen::Vector3d::Zero();
          for (int m = 0; m < 3; ++m)
            for (int a = 0; a < 3; ++a) {
              double t = dY(m, a);
              for (int l = 0; l < 3; ++l) t += pg.G(m, a, l) * Y[l];
              cov[m] += e(a, i) * t;
            }
          Eigen::Vector3d ek = e.col(k);
          CHECK(apply_E(geo, i, lifted[k], p, 1e-5) == doctest::Approx(cov.dot(pg.g * ek)).epsilon(1e-8));
        }
        // sum_i E_i E_i Y~_k = g(Delta Y, e_k)
        double lap = 0.0;
        for (int i = 0; i < 3; ++i) {
          FrameFn inner = [&geo, i, &lifted, k](const FramePoint& q) { return apply_E(geo, i, lifted[k], q, 1e-4); };
          lap += apply_E(geo, i, inner, p, 1e-4);
        }
        Eigen::Vector3d ek = e.col(k);
        Eigen::Vector3d grid_lap(lapY.at(node, 0), lapY.at(node, 1), lapY.at(node, 2));
        CHECK(std::abs(lap - grid_lap.dot(pg.g * ek)) < 1e-6);
      }
    }
  }

  TEST_CASE("geometry sampler reproduces tabulated values") {
    FlowSolution f = mode_flow(12, 0.04, 1e-3, 10);
    std::vector<double> times;
    for (std::size_t m = 0; m < f.size(); ++m) times.push_back(f.t(m));
    GeometrySampler gs(f, times);
    GeometrySlice s2 = f.slice(2);
    Field gamma = bismut_connection(s2);
    Field defect = f.defect(2);
    std::size_t node = 777;
    PointGeometry pg = gs.at(f.space()->grid().coords(node), f.t(2));
    CHECK((pg.g - s2.g.matrix(node)).norm() < 1e-14);
    CHECK((pg.defect - defect.matrix(node)).norm() < 1e-12);
    CHECK(pg.G(1, 2, 0) == doctest::Approx(gamma.at(node, 1, 2, 0)).epsilon(1e-12));

    // Off-node: the analytic conformal factor at t = 0 is interpolated to O(h^4).
    std::array<double, 3> x{0.37, 1.1, 2.9};
    PointGeometry p0 = gs.at(x, 0.0);
    CHECK(p0.g(0, 0) == doctest::Approx(std::exp(0.2 * std::cos(0.37))).epsilon(2e-3));
    PointGeometry mid = gs.at(x, 0.015);
    PointGeometry lo = gs.at(x, 0.01), hi = gs.at(x, 0.02);
    CHECK(std::abs(mid.g(0, 0) - 0.5 * (lo.g(0, 0) + hi.g(0, 0))) < 1e-4);

    FlowSolution tor = torus_flow(8, 0.1, 1e-3, 10);
    GeometrySampler ts(tor, {0.0, 0.05, 0.1});
    PointGeometry pt = ts.at({1.0, 2.0, 3.0}, 0.1);
    CHECK(pt.g(0, 0) == doctest::Approx(std::cbrt(1.3)).epsilon(1e-8));
    CHECK_THROWS(ts.at({0, 0, 0}, 0.2));
  }
}
