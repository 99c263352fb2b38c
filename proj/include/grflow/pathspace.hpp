#pragma once

#include <array>
#include <functional>
#include <vector>

#include "grflow/heat.hpp"
#include "grflow/stochastic.hpp"

namespace grflow {

using PathPoints = std::vector<std::array<double, 3>>;

// One separable term coef * prod_j phi_j(x_j) of a cylinder function.
struct CylinderTerm {
  double coef = 1.0;
  std::vector<ScalarFn> factors;  // one per partition time
};

// F(gamma) = f(x_{tau_1}, ..., x_{tau_k}) with f a finite sum of separable
// terms. Factors are evaluated through trigonometric interpolants of their
// grid samples (exact for resolved Fourier modes).
class CylinderFunction {
 public:
  CylinderFunction(std::vector<double> times, std::vector<CylinderTerm> terms, const PeriodicGrid& grid);
  static CylinderFunction constant(double c, double tau, const PeriodicGrid& grid);

  std::size_t order() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  std::size_t terms() const { return coef_.size(); }
  double coef(std::size_t r) const { return coef_[r]; }
  const Field& sample(std::size_t r, std::size_t j) const { return samples_[r][j]; }
  const TrigInterpolant& factor(std::size_t r, std::size_t j) const { return interp_[r][j]; }
  const PeriodicGrid& grid() const { return grid_; }

  double value(const PathPoints& x) const;
  // Coordinate differential d^(j) f.
  SmallVec partial(std::size_t j, const PathPoints& x) const;
  // Coordinate second partials d^(i) d^(j) f (row index in slot i).
  SmallMat mixed(std::size_t i, std::size_t j, const PathPoints& x) const;

  CylinderFunction square() const;
  CylinderFunction shifted(double c) const;  // F + c

  // Largest discrepancy between the evaluators and centered differences with
  // step h, relative to the size of the derivatives.
  double self_check(const PathPoints& x, double h) const;

 private:
  std::vector<double> times_;
  std::vector<double> coef_;
  std::vector<std::vector<ScalarFn>> fns_;
  std::vector<std::vector<Field>> samples_;
  std::vector<std::vector<TrigInterpolant>> interp_;
  PeriodicGrid grid_;
};

// Induced martingale F_tau on the path grid tau_m = m dtau. On the interval
// [tau_l, tau_{l+1}) the function f_tau is the product of the fixed factors
// of slots 1..l and psi_{r,l}(tau, .) = P_{T'-tau, T'-tau_{l+1}} G_{r,l+1} in
// the last slot, where G_{r,k} = phi_{r,k} and G_{r,j} = phi_{r,j} psi_{r,j}(tau_j).
class MartingaleField {
 public:
  MartingaleField(const CylinderFunction& F, const FlowSolution& flow, const PathConfig& cfg,
                  const HeatOptions& opts = {});

  const CylinderFunction& cylinder() const { return F_; }
  int steps() const { return K_; }
  double dtau() const { return dtau_; }
  double T_prime() const { return T_prime_; }
  double tau(std::size_t m) const { return m * dtau_; }
  // Path index of partition time j.
  std::size_t slot_index(std::size_t j) const { return slot_index_[j]; }
  // Number of partition times <= tau_m.
  std::size_t fixed(std::size_t m) const;
  // Last-slot function of term r at tau_m (absent once every slot is fixed).
  bool has_last(std::size_t m) const { return fixed(m) < F_.order(); }
  const TrigInterpolant& last(std::size_t r, std::size_t m) const { return psi_[r][m]; }

  // E_{(x,T')}[F] as a function of the base point x.
  double start_value(const std::array<double, 3>& x) const;

 private:
  CylinderFunction F_;
  int K_ = 0;
  double dtau_ = 0.0;
  double T_prime_ = 0.0;
  std::vector<std::size_t> slot_index_;
  std::vector<std::vector<TrigInterpolant>> psi_;
};

// F_tau and its derivatives at one path time. Slots are the fixed partition
// points followed by the last slot; vectors are components in the frame of
// each slot point, so that sums over slots are components in the initial
// g_{T'}-orthonormal frame at x.
struct MartingaleState {
  double value = 0.0;
  double time = 0.0;
  bool has_last = false;  // the final slot is the running point X_tau
  std::vector<double> slot_tau;
  std::vector<SmallVec> grad;                 // e_a^T d^(a) f_tau
  std::vector<std::vector<SmallMat>> hess;    // e_a^T nabla^(a) nabla^(b) f_tau e_b
};

// Evaluates the martingale along one sampled path; factor jets at the fixed
// points are cached. The sampler is needed for Hessians only.
class MartingalePath {
 public:
  MartingalePath(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler* geo = nullptr);

  MartingaleState state(std::size_t m, bool hessian = false) const;
  // The cylinder function itself (F = F_{tau} past the last partition time).
  MartingaleState terminal(bool hessian = false) const;

 private:
  struct Jet {
    double v = 0.0;
    SmallVec g;
    SmallMat h;
  };
  Jet jet(const TrigInterpolant& ip, std::size_t m, bool hessian) const;
  MartingaleState assemble(std::size_t m, std::size_t nfixed, bool with_last, bool hessian) const;

  const MartingaleField& mf_;
  const BrownianPath& path_;
  const GeometrySampler* geo_;
  std::vector<std::vector<Jet>> fixed_;  // [r][j]
};

enum class Limit { left, right };

// nabla_sigma F_tau at the state's time: sum of slot gradients with slot time
// >= sigma; zero for tau < sigma and for the left limit at tau = sigma.
SmallVec parallel_gradient(const MartingaleState& s, double sigma, Limit limit = Limit::right);
// nabla_tau nabla_sigma F (row index along tau).
SmallMat hessian_parallel(const MartingaleState& s, double tau, double sigma);
// nabla_tau F_tau at the state's own time. It jumps at partition times: the
// left limit includes the slot fixed at tau, the right limit (the value on the
// following step, used in Ito sums) only the running slot.
SmallVec tau_gradient(const MartingaleState& s, Limit side);
SmallMat tau_hessian(const MartingaleState& s, double sigma, Limit side);
// nabla_tau nabla_sigma log F = F^-1 Hess - F^-2 grad_tau F (x) grad_sigma F.
SmallMat log_hessian(const MartingaleState& s, double tau, double sigma);

// Finite-difference check of nabla_tau |nabla_sigma F|^2 = 2 <nabla_tau nabla_sigma F, nabla_sigma F>
// by moving the slot points along parallel frames; returns the relative error.
double hessian_identity_error(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo,
                              std::size_t m, double tau, double sigma, double h = 1e-4);
// Same for the log identity.
double log_hessian_identity_error(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo,
                                  std::size_t m, double tau, double sigma, double h = 1e-4);

struct MartingaleStats {
  Estimate residual_rms;   // sqrt of mean squared residual, stderr by the delta method
  Estimate qv_sum;         // sum (Delta F)^2
  Estimate qv_bracket;     // 2 int |nabla_tau F_tau|^2 dtau (trapezoid)
  Estimate qv_gap;         // paired difference
  Estimate ito_square;     // (sum <a, dW>)^2 with a = nabla_tau F_tau
  Estimate ito_bracket;    // 2 sum |a|^2 dtau (left points)
  Estimate ito_gap;
  std::vector<Estimate> mean;  // E[F_{tau_m}]
};

// Per-path residual F_{T'} - F_0 - sum <nabla_{tau_m} F_{tau_m}, dW_m> and the
// quadratic-variation and Ito-isometry statistics.
MartingaleStats martingale_rep_residual(const MartingaleField& mf, const PathConfig& cfg, const GeometrySampler& geo);
std::vector<double> martingale_rep_paths(const MartingaleField& mf, const PathConfig& cfg, const GeometrySampler& geo);

// Cameron-Martin direction h_tau in the g_{T'}-orthonormal frame at x.
struct HPath {
  std::vector<SmallVec> h;     // node values, h[0] = 0
  std::vector<SmallVec> hdot;  // difference quotients on steps
  double dtau = 0.0;

  static HPath from_function(const std::function<SmallVec(double)>& fn, int K, double dtau);
  static HPath ramp(const SmallVec& v, int K, double dtau);
  static HPath zero(int dim, int K, double dtau);
  double energy() const;
};

std::size_t path_index(const BrownianPath& path, double tau);

// D_V F = sum_j <h_{tau_j}, S_{tau_j} grad^(j) f>.
double dv_derivative(const CylinderFunction& F, const BrownianPath& path, const HPath& h);
// 1/2 sum_m <hdot_m - (S A S^-1)^T h_m, dW_m> with A the transport endomorphism
// of the Feynman-Kac formula (-defect(Y, .)^#).
double dv_star_weight(const BrownianPath& path, const HPath& h, const GeometrySampler& geo, double T_prime);
// D_V^* G = -D_V G + G * weight.
double dv_star(const CylinderFunction& G, const BrownianPath& path, const HPath& h, const GeometrySampler& geo,
               double T_prime);

struct IbpTriple {
  const CylinderFunction* F;
  const CylinderFunction* G;
  const HPath* h;
  std::string label;
};

// |E[D_V F G] - E[F D_V^* G]| against 3 stderr of the paired difference; one
// report per triple from a shared path batch.
std::vector<VerificationReport> ibp_residual(const std::vector<IbpTriple>& triples, const PathConfig& cfg,
                                             const FlowSolution& flow);

// int_a^b |nabla_tau F|^2 dtau, exact for the piecewise constant integrand.
double malliavin_norm(const CylinderFunction& F, const BrownianPath& path, double a = 0.0, double b = -1.0);
// E[F L_{(tau1, tau2)} F] = E[int_{tau1}^{tau2} |nabla_tau F|^2 dtau].
Estimate ou_quadratic_form(const CylinderFunction& F, double tau1, double tau2, const PathConfig& cfg,
                           const FlowSolution& flow);

}  // namespace grflow
