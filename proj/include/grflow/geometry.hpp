#pragma once

#include <memory>

#include "grflow/backend.hpp"
#include "grflow/derivatives.hpp"
#include "grflow/field.hpp"

namespace grflow {

// A backend together with its differentiation rule. On a homogeneous model
// all fields are left-invariant, so frame derivatives of components vanish
// and brackets enter through the structure constants.
class Space {
 public:
  explicit Space(Backend backend, DiffMode mode = DiffMode::fd4);

  const Backend& backend() const { return backend_; }
  int dim() const { return dim_; }
  std::size_t nodes() const { return nodes_; }
  bool is_grid() const { return grid_ != nullptr; }
  const PeriodicGrid& grid() const;
  const HomogeneousModel& model() const;
  DiffMode mode() const { return mode_; }
  const GridDerivative& deriv() const;

  // Componentwise derivative along coordinate axis (zero on homogeneous models).
  Field partial(const Field& f, int axis) const;
  // Volume of one cell (grid) or 1 (homogeneous, per unit Haar volume).
  double cell_volume() const;

 private:
  Backend backend_;
  DiffMode mode_;
  int dim_;
  std::size_t nodes_;
  const PeriodicGrid* grid_ = nullptr;
  std::unique_ptr<GridDerivative> deriv_;
};

using SpacePtr = std::shared_ptr<const Space>;

SpacePtr make_space(Backend backend, DiffMode mode = DiffMode::fd4);

struct GeometrySlice {
  SpacePtr space;
  Field g;                          // symmetric 2-tensor
  Field b;                          // 2-form potential
  std::shared_ptr<const Field> H0;  // closed background 3-form
  double t = 0.0;

  int dim() const { return space->dim(); }
  std::size_t nodes() const { return space->nodes(); }
  // Checks SPD metric, antisymmetric b and closed H0; throws GeometryError.
  void validate(double closed_tol = 1e-9) const;
};

GeometrySlice make_slice(SpacePtr space, Field g, Field b, Field H0, double t = 0.0);

// Exterior derivative of a p-form (coordinate differences on grids,
// Chevalley-Eilenberg differential on homogeneous models).
Field exterior_derivative(const Space& space, const Field& form);
Field total_three_form(const GeometrySlice& slice);

Field inverse_metric(const Field& g);
Field volume_density(const Field& g);
double min_eigenvalue(const Field& g);

Field h_squared(const Field& H, const Field& g);
Field h_norm_squared(const Field& H, const Field& g);

// Connection coefficients Gamma^k_ij stored as at(node, k, i, j).
Field levi_civita(const Space& space, const Field& g);
Field ricci_lc(const Space& space, const Field& g);
Field scalar_curv(const Space& space, const Field& g);
Field codifferential_H(const Space& space, const Field& H, const Field& g);

Field bismut_connection(const GeometrySlice& slice);
Field bismut_connection(const Space& space, const Field& g, const Field& H);
// Torsion T^k_ij = Gamma^k_ij - Gamma^k_ji - c^k_ij, stored like a connection.
Field torsion(const Space& space, const Field& gamma);
// (nabla_a g)_ij stored as at(node, a, i, j).
Field covariant_derivative_metric(const Space& space, const Field& g, const Field& gamma);

struct BismutRicci {
  Field full;     // Rc - H^2/4 - d*H/2
  Field sym;      // Rc - H^2/4
  Field antisym;  // -d*H/2
};
BismutRicci bismut_ricci(const GeometrySlice& slice);

Field differential(const Space& space, const Field& u);
Field raise(const Field& ginv, const Field& alpha);
Field lower(const Field& g, const Field& Y);
Field gradient(const Space& space, const Field& u, const Field& g);
Field inner(const Field& g, const Field& X, const Field& Y);
Field norm_squared_2tensor(const Field& g, const Field& T);
// V^j = Y^a B_ak g^kj  (first-slot musical contraction).
Field contract_first(const Field& B, const Field& Y, const Field& ginv);

Field laplacian_fn(const Space& space, const Field& u, const Field& g);
// (nabla nabla u)_ij = d_i d_j u - Gamma^k_ij d_k u for the given connection.
Field hessian(const Space& space, const Field& u, const Field& gamma);
Field laplacian_vec(const Space& space, const Field& Y, const Field& g, const Field& gamma);
Field laplacian_vec(const GeometrySlice& slice, const Field& Y);

}  // namespace grflow
