#pragma once

#include <array>
#include <functional>
#include <vector>

#include "grflow/flow.hpp"
#include "grflow/report.hpp"

namespace grflow {

// Coefficients of the heat operators at one time.
struct HeatCoefficients {
  double t = 0.0;
  Field ginv;        // g^ij
  Field contracted;  // g^ij Gamma^k_ij
  Field potential;   // R - |H|^2/4 (conjugate operator only)
  Field density;     // sqrt(det g)
  Field bismut;      // Gamma^nabla, when requested

  static HeatCoefficients at(const FlowSolution& flow, double t, bool potential, bool bismut);
  static HeatCoefficients from_slice(const GeometrySlice& slice, bool potential, bool bismut);
};

// Delta u = g^ij (d_i d_j u - Gamma^k_ij d_k u) with the given coefficients.
void apply_laplacian(const Space& space, const HeatCoefficients& c, const double* u, double* out);
Field apply_laplacian(const Space& space, const HeatCoefficients& c, const Field& u);

struct HeatOptions {
  double cfl = 0.8;      // fraction of the RK4 real-axis stability limit
  double max_dt = 0.0;   // optional cap on the step
  bool bismut = false;   // compute the Bismut connection at stage times
};

// Extra right-hand side for coupled systems: rhs[i] += source_i(t, state).
using HeatSource =
    std::function<void(const HeatCoefficients& c, const std::vector<Field>& state, std::vector<Field>& rhs)>;

// Solves d/dt y_i = Delta y_i + source_i forward in time from s; returns the
// state at every requested time (increasing, >= s).
std::vector<std::vector<Field>> evolve_heat(std::vector<Field> state, double s, const std::vector<double>& times,
                                            const FlowSolution& flow, const HeatSource& source = nullptr,
                                            const HeatOptions& opts = {});

Field heat_flow(const Field& u0, double s, double t, const FlowSolution& flow, const HeatOptions& opts = {});
std::vector<Field> heat_flow_snapshots(const Field& u0, double s, const std::vector<double>& times,
                                       const FlowSolution& flow, const HeatOptions& opts = {});
// Backward solve of -d_t v = Delta v - (R - |H|^2/4) v from vT at time t down to s.
Field conj_flow(const Field& vT, double t, double s, const FlowSolution& flow, const HeatOptions& opts = {});

double stable_heat_step(const Space& space, const HeatCoefficients& c, double cfl, bool with_potential);

struct KernelMeasure {
  std::array<double, 3> x0{0, 0, 0};
  std::size_t node = 0;
  double T = 0.0;
  double s = 0.0;
  Field density;  // p_{T,s}(x0, .)
  Field weights;  // p dV_{g(s)} per node
  double mass = 0.0;
  double clipped_mass = 0.0;

  double integrate(const Field& f) const;
};

KernelMeasure heat_kernel(const std::array<double, 3>& x0, double T, double s, const FlowSolution& flow,
                          const HeatOptions& opts = {});

// Discrete delta at a node normalized against dV_{g(t)}.
Field discrete_delta(const FlowSolution& flow, std::size_t node, double t);

// Scalar values on the flow's stored nodes m0 .. m0 + values.size() - 1.
struct SpacetimeFunction {
  const FlowSolution* flow = nullptr;
  std::size_t m0 = 0;
  std::vector<Field> values;

  std::size_t size() const { return values.size(); }
  double t(std::size_t k) const { return flow->t(m0 + k); }
  double max_abs() const;
};

using SpacetimeFn = std::function<double(const std::array<double, 3>& x, double t)>;
SpacetimeFunction sample_spacetime(const FlowSolution& flow, std::size_t m0, std::size_t m1, const SpacetimeFn& fn);
Field sample_field(const PeriodicGrid& grid, const std::function<double(const std::array<double, 3>&)>& fn);

// Results live on interior nodes (first and last input node dropped).
SpacetimeFunction heat_op(const SpacetimeFunction& u);
SpacetimeFunction conj_heat_op(const SpacetimeFunction& v);
double duality_residual(const SpacetimeFunction& u, const SpacetimeFunction& v);

enum class ScalarProfile { one, square, x_log_x, inverse };
double profile(ScalarProfile p, double x, int derivative);

SpacetimeFunction bochner_residual_1(const SpacetimeFunction& u);
SpacetimeFunction bochner_residual_2(const SpacetimeFunction& u, ScalarProfile phi);
SpacetimeFunction bochner_residual_3(const SpacetimeFunction& u, ScalarProfile psi);

double intertwine_check_1(const Field& u0, const FlowSolution& flow, double s, double t, const HeatOptions& opts = {});
double intertwine_check_2(const Field& u0, const FlowSolution& flow, double s, double t, double delta = 1e-3,
                          const HeatOptions& opts = {});

struct FunctionalCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double shift = 0.0;  // subtracted mean (Poincare) or scale (log-Sobolev)
};

FunctionalCheck poincare_values(const Field& phi, const KernelMeasure& nu, const FlowSolution& flow);
FunctionalCheck logsob_values(const Field& phi, const KernelMeasure& nu, const FlowSolution& flow);

VerificationReport poincare_check(const Field& phi, const std::array<double, 3>& x0, double s, double T,
                                  const FlowSolution& flow, double tol = 1e-8);
VerificationReport logsob_check(const Field& phi, const std::array<double, 3>& x0, double s, double T,
                                const FlowSolution& flow, double tol = 1e-8);

}  // namespace grflow
