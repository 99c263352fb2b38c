#pragma once

#include <array>
#include <functional>
#include <vector>

#include "grflow/heat.hpp"

namespace grflow {

// Sign of the b-term in the time part of the twisted connection:
// nabla_t Y = d_t Y + 1/2 d_t(g +- b)(Y, .)^#.
enum class TwistSign { plus, minus };

inline double twist(TwistSign s) { return s == TwistSign::plus ? 1.0 : -1.0; }

// Vector fields on the flow's stored nodes m0 .. m0 + values.size() - 1.
struct SpacetimeVectorField {
  const FlowSolution* flow = nullptr;
  std::size_t m0 = 0;
  std::vector<Field> values;

  std::size_t size() const { return values.size(); }
  double t(std::size_t k) const { return flow->t(m0 + k); }
};

// Centered time difference plus the musical term from the stored d_t g, d_t b.
// Results live on interior nodes.
SpacetimeVectorField nabla_t(const SpacetimeVectorField& Y, TwistSign sign = TwistSign::plus);

// max |d/dt |Y|^2 - 2 g(nabla_t Y, Y)| over interior nodes.
double compatibility_residual(const SpacetimeVectorField& Y, TwistSign sign = TwistSign::plus);

// Delta grad u - grad Delta u - Rc^nabla(grad u, .)^# with the Bismut Laplacian on vectors.
Field commutator_residual(const Field& u, const GeometrySlice& slice);

// Left-invariant frame derivatives of a function at one point of a
// homogeneous model: d1[i] = X_i u, d2(i, j) = X_i X_j u, d3[i](j, k) = X_i X_j X_k u.
struct FunctionJet {
  int dim = 3;
  SmallVec d1;
  SmallMat d2;
  std::array<SmallMat, 3> d3;
};

// u(q) = <a, q> on the unit quaternions with X_i generated by (lambda/2)(i, j, k).
FunctionJet su2_linear_jet(double lambda, const Eigen::Vector4d& q, const Eigen::Vector4d& a);

// The commutator residual evaluated algebraically from a jet.
SmallVec commutator_residual_jet(const GeometrySlice& slice, const FunctionJet& jet);

struct GradientEvolution {
  double residual = 0.0;   // max over interior nodes of |R|_g
  double grad_norm = 0.0;  // max |grad u|_g over the same nodes
  std::vector<double> per_node;
};

// R = nabla_t grad u - Delta grad u + (pure ? 0 : defect(grad u, .)^#) for
// u solving the heat equation from u0 at t(m0), sampled on nodes m0 .. m1.
GradientEvolution gradient_evolution_residual(const Field& u0, const FlowSolution& flow, std::size_t m0,
                                              std::size_t m1, TwistSign sign = TwistSign::plus, bool pure = false,
                                              const HeatOptions& opts = {});

// Geometry at one spacetime point: metric, Bismut connection (Gamma^k_ij at
// k*9 + i*3 + j), time derivatives of g and b, and the defect tensor.
struct PointGeometry {
  int dim = 3;
  SmallMat g, ginv, dg, db, defect;
  std::array<double, 27> gamma{};

  double G(int k, int i, int j) const { return gamma[(k * 3 + i) * 3 + j]; }
};

using PointGeometryFn = std::function<PointGeometry(const std::array<double, 3>& x, double t)>;

// Coefficients of E_i, V_ij and d_t^* at a frame point. Each entry is a pair
// (x-part, frame part); frame parts are n x n with column a the velocity of e_a.
struct FrameVectorFields {
  SmallMat Ex;               // column i = x-part of E_i
  std::vector<SmallMat> Ee;  // frame part of E_i
  SmallMat dt_frame;         // frame part of d_t^* (the t-part is 1)

  // Frame part of V_ij.
  SmallMat V(const SmallMat& e, int i, int j) const;
};

FrameVectorFields frame_vector_fields(const SmallMat& e, const PointGeometry& pg, TwistSign sign = TwistSign::plus);

double orthonormality_defect(const SmallMat& e, const SmallMat& g);

// Polar retraction of e onto the g-orthonormal frames: e (e^T g e)^{-1/2}.
SmallMat orthonormalize(const SmallMat& e, const SmallMat& g);

// Point geometry along a flow on a periodic grid, tabulated on a list of
// times and interpolated cubically in space and time. Spatially constant
// fields are stored once per time.
class GeometrySampler {
 public:
  GeometrySampler(const FlowSolution& flow, std::vector<double> times);

  PointGeometry at(const std::array<double, 3>& x, double t) const;
  const std::vector<double>& times() const { return times_; }
  int dim() const { return dim_; }

 private:
  struct Table {
    bool uniform = true;
    std::vector<double> values;  // [node][27+9*4] or one block
  };
  void fill(const Table& tab, const std::array<double, 3>& x, double* out) const;

  int dim_;
  PeriodicGrid grid_;
  std::vector<double> times_;
  std::vector<Table> tables_;
};

}  // namespace grflow
