#pragma once

#include <vector>

#include "grflow/backend.hpp"
#include "grflow/field.hpp"

namespace grflow {

enum class DiffMode { fd4, spectral };

// Periodic partial derivatives on a grid: 4th-order central stencils or
// Fourier differentiation (used as an oracle mode).
class GridDerivative {
 public:
  GridDerivative(const PeriodicGrid& grid, DiffMode mode);

  const PeriodicGrid& grid() const { return grid_; }
  DiffMode mode() const { return mode_; }

  void d1(const double* in, double* out, int axis) const;
  void d2(const double* in, double* out, int axis) const;
  // Second derivative along axes a, b (pure stencil when a == b).
  void d11(const double* in, double* out, int a, int b) const;

  // Componentwise partial derivative of a field along an axis.
  Field partial(const Field& f, int axis) const;

 private:
  void apply_line(const double* in, double* out, int axis, int order) const;

  PeriodicGrid grid_;
  DiffMode mode_;
  std::vector<std::vector<double>> spec1_, spec2_;  // dense N x N per axis
};

}  // namespace grflow
