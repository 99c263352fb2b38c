#pragma once

#include <array>
#include <functional>

#include "grflow/flow.hpp"

namespace grflow {

// Analytic fields used by configs, tests and the acceptance runs.

SpacePtr torus_space(int dim, int nodes, double length, DiffMode mode = DiffMode::fd4);

Field constant_tensor(const Space& space, const SmallMat& m, Symmetry sym);
Field identity_metric(const Space& space);
Field zero_two_form(const Space& space);
// c dx^1 ^ dx^2 ^ dx^3 (zero below dimension 3); on homogeneous models the
// left-invariant c e^{123}.
Field volume_three_form(const Space& space, double c);
// H0 = kappa * eps on an su(2) model.
Field cartan_three_form(const Space& space, double kappa);

// g = exp(2 amp cos(2 pi k x^axis / L)) delta.
Field conformal_metric(const Space& space, double amp, int k = 1, int axis = 0);
// b = amp sin(2 pi k x^axis / L) dx^i ^ dx^j.
Field mode_two_form(const Space& space, double amp, int i, int j, int k = 1, int axis = 0);

GeometrySlice flat_torus_slice(SpacePtr space, double c);
GeometrySlice su2_slice(double lambda, double kappa, double metric_scale = 1.0);

Field sample_scalar(const Space& space, const std::function<double(const std::array<double, 3>&)>& fn);

}  // namespace grflow
