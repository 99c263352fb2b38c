#pragma once

#include <string>
#include <vector>

#include "grflow/geometry.hpp"

namespace grflow {

struct GrfRhs {
  Field dg;
  Field db;
};

// dg = -2 Rc + H^2/2, db = -d*H.
GrfRhs grf_rhs(const GeometrySlice& slice);

struct FlowOptions {
  double T = 1.0;
  double dt = 1e-3;
  int output_every = 1;
  double blowup_factor = 1e6;
};

enum class PerturbMode { conformal_drift, b_drift };

// Time-indexed family of slices with stored time derivatives. Values between
// nodes come from cubic Hermite interpolation.
class FlowSolution {
 public:
  struct Node {
    double t = 0.0;
    Field g, b, dg, db;
  };

  FlowSolution(SpacePtr space, std::shared_ptr<const Field> H0, std::vector<Node> nodes, std::string family);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t m) const { return nodes_[m]; }
  double t(std::size_t m) const { return nodes_[m].t; }
  double t_begin() const { return nodes_.front().t; }
  double t_end() const { return nodes_.back().t; }
  const SpacePtr& space() const { return space_; }
  const std::shared_ptr<const Field>& H0() const { return H0_; }
  const std::string& family() const { return family_; }

  GeometrySlice slice(std::size_t m) const;
  GeometrySlice slice_at(double t) const;
  Field dg_at(double t) const;
  Field db_at(double t) const;
  // Defect tensor Rc^nabla + (dg - db)/2 at a node or arbitrary time.
  Field defect(std::size_t m) const;
  Field defect_at(double t) const;

  // Index m with t_m <= t <= t_{m+1}; throws if t is outside the family.
  std::size_t locate(double t) const;

  std::string integrator = "rk4";
  double step = 0.0;
  int steps = 0;
  double max_rhs_mismatch = 0.0;

 private:
  void hermite(double t, Field& g, Field& b, Field* dg, Field* db) const;

  SpacePtr space_;
  std::shared_ptr<const Field> H0_;
  std::vector<Node> nodes_;
  std::string family_;
};

FlowSolution run_flow(const GeometrySlice& initial, const FlowOptions& opts);

// Time-independent family on [0, T] with `intervals` uniform intervals.
FlowSolution static_family(const GeometrySlice& slice, double T, int intervals);

FlowSolution perturb_family(const FlowSolution& sol, double eps, PerturbMode mode, const Field* beta = nullptr);

// ||d_t(g - b) + 2 Rc^nabla||_inf at an interior node, with d_t by centered
// differences of the stored slices.
double flow_residual(const FlowSolution& sol, std::size_t m);

}  // namespace grflow
