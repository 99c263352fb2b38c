#pragma once

#include <string>
#include <vector>

#include "grflow/pathspace.hpp"

namespace grflow {

struct BatteryConfig {
  PathConfig paths;
  HeatOptions heat;
  // Discretization margin from a coupled run at K/2 (first-order Richardson).
  bool richardson = true;
  double margin_floor = 0.0;
  // |v| is replaced by sqrt(|v|^2 + norm_eps^2) in the linear variant.
  double norm_eps = 1e-8;
};

struct Window {
  double tau1 = 0.0;
  double tau2 = 0.0;
};

// Path-space Bochner inequalities for nabla_sigma F_tau over windows, in
// integrated and averaged form: quadratic (with Hessian), weak, linear (Ito
// term subtracted pathwise) and submartingale tested against the events
// {F_tau1 >= F_0}, {F_tau1 < F_0} and the whole space. Windows starting before
// sigma start at sigma, which carries the jump term.
std::vector<VerificationReport> verify_bochner_path(const CylinderFunction& F, double sigma,
                                                    const std::vector<Window>& windows, const BatteryConfig& bc,
                                                    const FlowSolution& flow);

// Gradient estimates in averaged form: norm and squared norm over windows,
// |grad_x E[F]|^2 <= E|nabla_0 F|^2 by centered differences of the semigroup
// value, and 2 E|nabla_tau F_tau|^2 <= 2 E|nabla_tau F|^2 at the window ends.
std::vector<VerificationReport> verify_gradient_estimates(const CylinderFunction& F, double sigma,
                                                          const std::vector<Window>& windows,
                                                          const BatteryConfig& bc, const FlowSolution& flow);

// E[(F_tau2 - F_tau1)^2] <= 2 E[F L F].
VerificationReport verify_poincare_path(const CylinderFunction& F, double tau1, double tau2, const BatteryConfig& bc,
                                        const FlowSolution& flow);
// E[G_tau2 log G_tau2 - G_tau1 log G_tau1] <= 4 E[F L F] with G the martingale of F^2.
VerificationReport verify_logsob_path(const CylinderFunction& F, double tau1, double tau2, const BatteryConfig& bc,
                                      const FlowSolution& flow);
// Integrated Bochner estimate at sigma, the Poincare Hessian estimate and the
// log-Sobolev Hessian estimate (requires F^2 bounded away from 0).
std::vector<VerificationReport> verify_hessian_variants(const CylinderFunction& F, double sigma,
                                                        const BatteryConfig& bc, const FlowSolution& flow);

struct CharacterizeConfig {
  PathConfig paths;  // horizon is replaced by eps0
  HeatOptions heat;
  double eps0 = 0.2;
  bool richardson = true;
};

// Defect form D(e_a, e_b) at (x0, T') in the g_{T'}-orthonormal frame at x0.
struct DefectReport {
  SmallMat estimate;
  SmallMat stderr_;
  SmallMat margin;
  SmallMat exact;
  double rel_error = 0.0;  // |estimate - exact| / |exact| (Frobenius)
  double abs_error = 0.0;
  bool is_grf = false;
  std::vector<VerificationReport> probes;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();

  std::string verdict() const { return is_grf ? "is GRF" : "is not GRF"; }
  nlohmann::ordered_json to_json() const;
};

// Probes phi_v(y) = sum_a w_a sin(y^a - x0^a) with grad phi_v(x0) = v and zero
// Hessian at x0. The one-point probe phi_v(X_eps) and the two-point probe
// 2 phi_u(X_0) - phi_v(X_eps) give weak Bochner defects Q1(v), Q2(u, v) whose
// difference is 4 eps D(v, u) + O(eps^2); the slope is fitted from eps0/4,
// eps0/2, eps0 on shared paths.
DefectReport characterize(const FlowSolution& family, const CharacterizeConfig& cfg);

// s sum_a w_a sin((y^a - x0^a) / s) with w = g_{T'} e_b at x0 (e the initial
// frame of cfg): gradient e_b and vanishing symmetric Hessian at x0.
ScalarFn frame_probe(const FlowSolution& flow, const PathConfig& cfg, int b, double scale = 1.0);

std::string cylinder_digest(const CylinderFunction& F);

}  // namespace grflow
