#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "grflow/heat.hpp"
#include "grflow/spacetime.hpp"

namespace grflow {

// Philox4x32-10 counter-based generator.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Standard normal fully determined by (seed, path, level, index, component).
double keyed_normal(std::uint64_t seed, std::uint64_t path, std::uint32_t level, std::uint32_t index,
                    std::uint32_t comp);

// Brownian motion with dW dW = 2 dtau on [0, horizon] sampled at K + 1
// uniform times through a dyadic bridge hierarchy; K must be a power of two.
// Row k holds W(tau_k). Runs with different K share W at common times.
Eigen::MatrixXd brownian_values(std::uint64_t seed, std::uint64_t path, int dim, int K, double horizon);

// The single place where the variance convention enters.
constexpr double kBrownianVariance = 2.0;

struct PathConfig {
  std::array<double, 3> x0{0, 0, 0};
  double T_prime = 1.0;
  double horizon = 0.0;  // tau range [0, horizon]; 0 means T_prime - t_begin
  int K = 64;
  std::uint64_t seed = 1;
  std::size_t N = 1000;
  TwistSign sign = TwistSign::plus;

  double span(const FlowSolution& flow) const;
  double dtau(const FlowSolution& flow) const { return span(flow) / K; }
  void validate(const FlowSolution& flow) const;
};

struct BrownianPath {
  int dim = 1;
  std::vector<double> tau;
  std::vector<std::array<double, 3>> x;
  std::vector<SmallMat> e;
  std::vector<SmallVec> dW;  // dW[k] = W(tau_{k+1}) - W(tau_k)
  std::vector<SmallMat> S;   // S_k = e_0 e_k^{-1}
  std::vector<double> drift;  // orthonormality defect before each retraction

  std::size_t steps() const { return dW.size(); }
};

// Geometry tables for every path time of cfg (and of coarser dyadic grids).
GeometrySampler path_sampler(const PathConfig& cfg, const FlowSolution& flow);

BrownianPath sample_path(const PathConfig& cfg, const GeometrySampler& geo, std::size_t path_index);

// S_k as stored and its isometry defect |S^T g_{T'} S - g_{t_k}| (in the
// identified coordinates).
SmallMat transport(const BrownianPath& path, std::size_t k);
double transport_defect(const BrownianPath& path, const GeometrySampler& geo, double T_prime, std::size_t k);

using VectorFn = std::function<SmallVec(const std::array<double, 3>& x, const PointGeometry& pg)>;
using EndomorphismFn = std::function<SmallMat(const std::array<double, 3>& x, const PointGeometry& pg)>;
using ScalarFn = std::function<double(const std::array<double, 3>& x)>;

// A(Y) = -defect(Y, .)^#.
SmallMat defect_endomorphism(const PointGeometry& pg);

struct VectorEstimate {
  SmallVec mean;
  SmallVec stderr_;
};

// E[R S Z(X)] at tau = K dtau with dR/dtau = R S A S^{-1} advanced by Heun.
// A may be empty (R = Id).
VectorEstimate feynman_kac(const VectorFn& Z, const EndomorphismFn& A, const PathConfig& cfg,
                           const GeometrySampler& geo);

// Per-path values of f(X_{tau_K}).
std::vector<double> terminal_values(const ScalarFn& f, const PathConfig& cfg, const GeometrySampler& geo);

// Runs fn(path_index, path) for all cfg.N paths in parallel.
void for_each_path(const PathConfig& cfg, const GeometrySampler& geo,
                   const std::function<void(std::size_t, const BrownianPath&)>& fn);

struct WeakOrder {
  std::vector<int> K;
  std::vector<Estimate> diff;  // E[f(X)] at K[i] minus at K[i+1], coupled paths
  std::vector<double> ratio;   // diff[i] / diff[i+1]
  double order = 0.0;          // log2 of the last ratio
  double order_se = 0.0;
};

// Weak error order of E[f(X_{tau_K})] from dyadically refined step counts
// sharing Brownian paths.
WeakOrder weak_order(const ScalarFn& f, PathConfig cfg, const FlowSolution& flow, const std::vector<int>& K);

struct Chi2Test {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  int bins = 0;
  std::size_t N = 0;
  double expected_mass = 0.0;
};

// Joint histogram of (X_tau1, X_tau2) on a one-dimensional grid against the
// kernel product p_{T',T'-tau1}(x, y1) p_{T'-tau1,T'-tau2}(y1, y2). Bins are
// unions of consecutive node cells; x0 must be a node.
Chi2Test two_time_chi2(const FlowSolution& flow, const PathConfig& cfg, double tau1, double tau2, int bins,
                       const HeatOptions& opts = {});

// Trigonometric interpolant of a grid field (exact for resolved modes).
class TrigInterpolant {
 public:
  TrigInterpolant() = default;
  TrigInterpolant(const PeriodicGrid& grid, const Field& f, double rel_cut = 1e-14);

  double value(const std::array<double, 3>& x) const;
  // Value, gradient and Hessian in coordinates.
  void jet(const std::array<double, 3>& x, double& v, SmallVec* grad, SmallMat* hess) const;
  std::size_t modes() const { return coef_.size(); }

 private:
  int dim_ = 1;
  std::array<int, 3> n_{1, 1, 1};
  std::array<double, 3> k0_{1, 1, 1};
  std::vector<std::array<int, 3>> wave_;
  std::vector<std::complex<double>> coef_;
};

}  // namespace grflow
