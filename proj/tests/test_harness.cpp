#include <cmath>
#include <numbers>

#include "doctest.h"
#include "grflow/catalog.hpp"
#include "grflow/harness.hpp"

using namespace grflow;
using std::numbers::pi;

namespace {

FlowSolution torus_flow(double c) {
  FlowOptions o;
  o.T = 0.5;
  o.dt = 1e-3;
  o.output_every = 50;
  return run_flow(flat_torus_slice(torus_space(3, 8, 2 * pi, DiffMode::spectral), c), o);
}

FlowSolution long_circle() {
  return static_family(flat_torus_slice(torus_space(1, 16, 8 * pi, DiffMode::spectral), 0.0), 1.0, 8);
}

BatteryConfig battery(double Tp, double horizon, int K, std::size_t N, std::uint64_t seed,
                      std::array<double, 3> x0 = {0.4, 1.1, -0.7}) {
  BatteryConfig bc;
  bc.paths.x0 = x0;
  bc.paths.T_prime = Tp;
  bc.paths.horizon = horizon;
  bc.paths.K = K;
  bc.paths.N = N;
  bc.paths.seed = seed;
  return bc;
}

ScalarFn probe(const FlowSolution& flow, const BatteryConfig& bc, int b, double s = 1.0) {
  return frame_probe(flow, bc.paths, b, s);
}

ScalarFn constant_fn(double c) {
  return [c](const std::array<double, 3>&) { return c; };
}

CylinderFunction one_point(double t, ScalarFn f, const FlowSolution& flow, double shift = 0.0, double scale = 1.0) {
  return CylinderFunction({t}, {CylinderTerm{shift, {constant_fn(1.0)}}, CylinderTerm{scale, {f}}},
                          flow.space()->grid());
}

// 2 phi(x_0) - phi(x_t).
CylinderFunction two_point(double t, ScalarFn f, const FlowSolution& flow) {
  return CylinderFunction({0.0, t}, {CylinderTerm{2.0, {f, constant_fn(1.0)}}, CylinderTerm{-1.0, {constant_fn(1.0), f}}},
                          flow.space()->grid());
}

const VerificationReport& find(const std::vector<VerificationReport>& rs, const std::string& id, int nth = 0) {
  for (const auto& r : rs)
    if (r.id == id && nth-- == 0) return r;
  throw std::runtime_error("missing report " + id);
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("verdict rule") {
    VerificationReport r;
    r.lhs = 1.0;
    r.rhs = 0.9;
    r.lhs_se = 0.03;
    r.rhs_se = 0.04;
    r.decide();
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.slack() == doctest::Approx(0.05));
    r.lhs = 1.2;
    r.decide();
    CHECK(r.verdict == Verdict::fail);
    r.rhs = std::nan("");
    r.decide();
    CHECK(r.verdict == Verdict::inconclusive);
  }

  TEST_CASE("trivial instances") {
    FlowSolution tor = torus_flow(1.0);
    BatteryConfig bc = battery(0.5, 0.25, 32, 200, 2);
    CylinderFunction C = CylinderFunction::constant(1.7, 0.125, tor.space()->grid());
    for (const auto& r : verify_bochner_path(C, 0.0, {{0.0, 0.25}, {0.125, 0.25}}, bc, tor)) {
      CHECK(r.lhs == doctest::Approx(r.rhs));
      CHECK(r.verdict == Verdict::pass);
    }
    CHECK(verify_poincare_path(C, 0.0, 0.25, bc, tor).lhs == 0.0);
    CylinderFunction F = one_point(0.25, probe(tor, bc, 0), tor);
    VerificationReport deg = verify_poincare_path(F, 0.125, 0.125, bc, tor);
    CHECK(deg.lhs == 0.0);
    CHECK(deg.rhs == 0.0);
    CHECK(deg.verdict == Verdict::pass);
    // F^2 vanishes identically: phi(x0) = 0.
    CHECK_THROWS_AS(verify_hessian_variants(one_point(0.0, probe(tor, bc, 0), tor), 0.0, bc, tor), DomainError);
    CHECK_THROWS_AS(verify_bochner_path(F, 0.1, {{0.0, 0.25}}, bc, tor), ConfigError);
    CHECK_THROWS_AS(verify_poincare_path(F, 0.2, 0.1, bc, tor), ConfigError);
  }

  TEST_CASE("battery passes on the torus solution") {
    FlowSolution tor = torus_flow(1.0);
    BatteryConfig bc = battery(0.5, 0.25, 32, 1500, 5);
    const double t = 0.125;
    CylinderFunction F2 = two_point(t, probe(tor, bc, 1), tor);
    CylinderFunction F1 = one_point(0.25, probe(tor, bc, 0), tor, 1.5);
    std::vector<VerificationReport> all;
    for (const CylinderFunction* F : {&F2, &F1}) {
      for (double sigma : {0.0, 0.0625}) {
        auto b = verify_bochner_path(*F, sigma, {{0.0, 0.125}, {0.0625, 0.25}}, bc, tor);
        auto g = verify_gradient_estimates(*F, sigma, {{0.0, 0.125}, {0.0625, 0.25}}, bc, tor);
        all.insert(all.end(), b.begin(), b.end());
        all.insert(all.end(), g.begin(), g.end());
      }
      all.push_back(verify_poincare_path(*F, 0.0, 0.25, bc, tor));
      all.push_back(verify_logsob_path(*F, 0.0625, 0.25, bc, tor));
    }
    auto h = verify_hessian_variants(F1, 0.0625, bc, tor);
    all.insert(all.end(), h.begin(), h.end());
    for (const auto& r : all) {
      if (r.verdict != Verdict::pass) MESSAGE(r.to_json().dump());
      CHECK(r.verdict == Verdict::pass);
      CHECK(r.margin >= 0.0);
    }
    // The quadratic Bochner inequality is an equality on a solution.
    const auto& q = find(all, "bochner/quadratic");
    CHECK(std::abs(q.lhs - q.rhs) < 3 * q.lhs_se + q.margin);
    // Hessian correction of the Poincare estimate is strictly positive.
    VerificationReport plain = verify_poincare_path(F1, 0.0, 0.25, bc, tor);
    CHECK(find(h, "hessian/poincare").lhs > plain.lhs + 1e-4);
  }

  TEST_CASE("two-point probe detects the conformal drift") {
    FlowSolution pert = perturb_family(torus_flow(1.0), 0.6, PerturbMode::conformal_drift);
    const double t = 1.0 / 32;
    BatteryConfig bc = battery(0.5, t, 32, 6000, 7);
    CylinderFunction F2 = two_point(t, probe(pert, bc, 0), pert);
    auto b = verify_bochner_path(F2, 0.0, {{0.0, t}}, bc, pert);
    auto g = verify_gradient_estimates(F2, 0.0, {{0.0, t}}, bc, pert);
    auto h = verify_hessian_variants(F2.shifted(3.0), 0.0, bc, pert);
    for (std::string id : {"bochner/quadratic", "bochner/weak", "bochner/linear"}) {
      MESSAGE(id, " slack ", find(b, id).slack());
      CHECK(find(b, id).verdict == Verdict::fail);
    }
    CHECK(find(b, "bochner/submartingale").verdict == Verdict::fail);
    for (const char* id : {"grad/norm", "grad/square", "grad/start"}) CHECK(find(g, id).verdict == Verdict::fail);
    CHECK(find(h, "hessian/bochner").verdict == Verdict::fail);
  }

  TEST_CASE("one-point probes detect a shrinking defect on the circle") {
    FlowSolution circ = long_circle();
    FlowSolution pert = perturb_family(circ, -0.3, PerturbMode::conformal_drift);
    BatteryConfig bc = battery(1.0, 0.0, 32, 6000, 11, {0.5, 0, 0});
    BatteryConfig big = bc;
    big.paths.N = 60000;
    for (const FlowSolution* fam : {&circ, &pert}) {
      const bool genuine = fam == &circ;
      ScalarFn phi = probe(*fam, bc, 0, 4.0);
      CylinderFunction F = one_point(1.0, phi, *fam);
      CylinderFunction P = one_point(1.0, phi, *fam, 1.0, 0.2);
      auto g = verify_gradient_estimates(F, 0.0, {{0.0, 0.5}}, bc, *fam);
      VerificationReport pc = verify_poincare_path(F, 0.0, 1.0, bc, *fam);
      VerificationReport ls = verify_logsob_path(P, 0.0, 1.0, big, *fam);
      const Verdict want = genuine ? Verdict::pass : Verdict::fail;
      MESSAGE(fam->family(), " qv slack ", find(g, "grad/qv").slack(), " poincare ", pc.slack(), " logsob ", ls.slack());
      CHECK(find(g, "grad/qv").verdict == want);
      CHECK(pc.verdict == want);
      CHECK(ls.verdict == want);
    }
  }

  TEST_CASE("characterization recovers defects") {
    FlowSolution tor = torus_flow(1.0);
    Field beta = constant_tensor(*tor.space(), (SmallMat(3, 3) << 0, 1, 0, -1, 0, 0, 0, 0, 0).finished(),
                                 Symmetry::antisymmetric);
    CharacterizeConfig cc;
    cc.paths.x0 = {0.4, 1.1, -0.7};
    cc.paths.T_prime = 0.5;
    cc.paths.K = 64;
    cc.paths.N = 8000;
    cc.paths.seed = 9;
    cc.eps0 = 0.2;

    DefectReport genuine = characterize(tor, cc);
    CHECK(genuine.is_grf);
    CHECK(genuine.exact.norm() < 1e-6);
    CHECK(!genuine.probes.empty());

    DefectReport conf = characterize(perturb_family(tor, 0.3, PerturbMode::conformal_drift), cc);
    MESSAGE("conformal drift rel error ", conf.rel_error);
    CHECK_FALSE(conf.is_grf);
    CHECK(conf.rel_error < 0.2);

    DefectReport bd = characterize(perturb_family(tor, 1.5, PerturbMode::b_drift, &beta), cc);
    MESSAGE("b-drift rel error ", bd.rel_error);
    CHECK_FALSE(bd.is_grf);
    CHECK(bd.rel_error < 0.2);
    const SmallMat anti = 0.5 * (bd.estimate - bd.estimate.transpose());
    CHECK(std::abs(anti(0, 1)) > 3 * bd.stderr_(0, 1));
    CHECK(bd.to_json()["verdict"] == "is not GRF");
  }

  TEST_CASE("reports do not depend on the thread count") {
    FlowSolution tor = torus_flow(1.0);
    BatteryConfig bc = battery(0.5, 0.25, 32, 300, 13);
    CylinderFunction F = two_point(0.125, probe(tor, bc, 2), tor);
    auto run = [&](int k) {
      set_threads(k);
      std::string s;
      for (const auto& r : verify_bochner_path(F, 0.0, {{0.0, 0.25}}, bc, tor)) s += r.to_json().dump() + "\n";
      return s;
    };
    const std::string a = run(1), b = run(3);
    set_threads(1);
    CHECK(a == b);
  }
}
