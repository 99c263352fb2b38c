#include "grflow/catalog.hpp"

#include <cmath>
#include <numbers>

namespace grflow {

SpacePtr torus_space(int dim, int nodes, double length, DiffMode mode) {
  return make_space(PeriodicGrid(dim, nodes, length), mode);
}

Field constant_tensor(const Space& space, const SmallMat& m, Symmetry sym) {
  Field f(space.dim(), 2, space.nodes(), sym);
  for (std::size_t node = 0; node < space.nodes(); ++node) f.set_matrix(node, m);
  return f;
}

Field identity_metric(const Space& space) {
  return constant_tensor(space, SmallMat::Identity(space.dim(), space.dim()), Symmetry::symmetric);
}

Field zero_two_form(const Space& space) { return Field(space.dim(), 2, space.nodes(), Symmetry::antisymmetric); }

namespace {

double levi(int i, int j, int k) { return (i - j) * (j - k) * (k - i) / 2.0; }

}  // namespace

Field volume_three_form(const Space& space, double c) {
  const int n = space.dim();
  Field H(n, 3, space.nodes(), Symmetry::antisymmetric);
  if (n < 3) return H;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        const double e = levi(i, j, k);
        if (e == 0.0) continue;
        for (std::size_t node = 0; node < space.nodes(); ++node) H.at(node, i, j, k) = c * e;
      }
  return H;
}

Field cartan_three_form(const Space& space, double kappa) {
  if (space.dim() != 3 || space.is_grid()) throw ConfigError("Cartan 3-form needs a three-dimensional group model");
  return volume_three_form(space, kappa);
}

Field sample_scalar(const Space& space, const std::function<double(const std::array<double, 3>&)>& fn) {
  const PeriodicGrid& grid = space.grid();
  Field f = Field::scalar(space.nodes());
  for (std::size_t node = 0; node < space.nodes(); ++node) f.at(node) = fn(grid.coords(node));
  return f;
}

Field conformal_metric(const Space& space, double amp, int k, int axis) {
  const PeriodicGrid& grid = space.grid();
  const int n = space.dim();
  Field g(n, 2, space.nodes(), Symmetry::symmetric);
  const double w = 2.0 * std::numbers::pi * k / grid.L[axis];
  for (std::size_t node = 0; node < space.nodes(); ++node) {
    const double f = std::exp(2.0 * amp * std::cos(w * grid.coords(node)[axis]));
    for (int i = 0; i < n; ++i) g.at(node, i, i) = f;
  }
  return g;
}

Field mode_two_form(const Space& space, double amp, int i, int j, int k, int axis) {
  const PeriodicGrid& grid = space.grid();
  Field b = zero_two_form(space);
  const double w = 2.0 * std::numbers::pi * k / grid.L[axis];
  for (std::size_t node = 0; node < space.nodes(); ++node) {
    const double v = amp * std::sin(w * grid.coords(node)[axis]);
    b.at(node, i, j) = v;
    b.at(node, j, i) = -v;
  }
  return b;
}

GeometrySlice flat_torus_slice(SpacePtr space, double c) {
  Field g = identity_metric(*space);
  Field b = zero_two_form(*space);
  Field H = volume_three_form(*space, c);
  return make_slice(std::move(space), std::move(g), std::move(b), std::move(H));
}

GeometrySlice su2_slice(double lambda, double kappa, double metric_scale) {
  SpacePtr space = make_space(HomogeneousModel::su2(lambda));
  Field g = constant_tensor(*space, metric_scale * SmallMat::Identity(3, 3), Symmetry::symmetric);
  Field b = zero_two_form(*space);
  Field H = cartan_three_form(*space, kappa);
  return make_slice(std::move(space), std::move(g), std::move(b), std::move(H));
}

}  // namespace grflow
