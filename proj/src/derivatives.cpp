#include "grflow/derivatives.hpp"

#include <cmath>
#include <numbers>

namespace grflow {

namespace {

std::vector<double> spectral_matrix(int n, double length, int order) {
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int q = 0; q < n; ++q) {
        int kk = q <= n / 2 ? q : q - n;
        double k = two_pi * kk / length;
        double phase = two_pi * kk * (i - j) / n;
        if (order == 1) {
          if (n % 2 == 0 && q == n / 2) continue;
          s += -k * std::sin(phase);
        } else {
          s += -k * k * std::cos(phase);
        }
      }
      m[static_cast<std::size_t>(i) * n + j] = s / n;
    }
  return m;
}

}  // namespace

GridDerivative::GridDerivative(const PeriodicGrid& grid, DiffMode mode) : grid_(grid), mode_(mode) {
  if (mode_ == DiffMode::spectral) {
    for (int a = 0; a < grid_.dim; ++a) {
      spec1_.push_back(spectral_matrix(grid_.n[a], grid_.L[a], 1));
      spec2_.push_back(spectral_matrix(grid_.n[a], grid_.L[a], 2));
    }
  }
}

void GridDerivative::apply_line(const double* in, double* out, int axis, int order) const {
  const int n = grid_.n[axis];
  const std::size_t stride = grid_.stride(axis);
  const double h = grid_.h(axis);
  std::vector<double> line(n), res(n);
  const std::size_t total = grid_.size();
  const std::size_t block = stride * n;
  for (std::size_t outer = 0; outer < total; outer += block) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      const std::size_t base = outer + inner;
      for (int i = 0; i < n; ++i) line[i] = in[base + i * stride];
      if (mode_ == DiffMode::fd4) {
        if (order == 1) {
          const double c = 1.0 / (12.0 * h);
          for (int i = 0; i < n; ++i) {
            int m2 = (i - 2 + n) % n, m1 = (i - 1 + n) % n, p1 = (i + 1) % n, p2 = (i + 2) % n;
            res[i] = c * (line[m2] - 8.0 * line[m1] + 8.0 * line[p1] - line[p2]);
          }
        } else {
          const double c = 1.0 / (12.0 * h * h);
          for (int i = 0; i < n; ++i) {
            int m2 = (i - 2 + n) % n, m1 = (i - 1 + n) % n, p1 = (i + 1) % n, p2 = (i + 2) % n;
            res[i] = c * (-line[m2] + 16.0 * line[m1] - 30.0 * line[i] + 16.0 * line[p1] - line[p2]);
          }
        }
      } else {
        const std::vector<double>& m = order == 1 ? spec1_[axis] : spec2_[axis];
        for (int i = 0; i < n; ++i) {
          double s = 0.0;
          const double* row = m.data() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) s += row[j] * line[j];
          res[i] = s;
        }
      }
      for (int i = 0; i < n; ++i) out[base + i * stride] = res[i];
    }
  }
}

void GridDerivative::d1(const double* in, double* out, int axis) const { apply_line(in, out, axis, 1); }

void GridDerivative::d2(const double* in, double* out, int axis) const { apply_line(in, out, axis, 2); }

void GridDerivative::d11(const double* in, double* out, int a, int b) const {
  if (a == b) {
    d2(in, out, a);
    return;
  }
  std::vector<double> tmp(grid_.size());
  d1(in, tmp.data(), a);
  d1(tmp.data(), out, b);
}

Field GridDerivative::partial(const Field& f, int axis) const {
  Field out(f.dim(), f.rank(), f.nodes(), f.symmetry());
  for (std::size_t c = 0; c < f.components(); ++c) d1(f.component(c), out.component(c), axis);
  return out;
}

}  // namespace grflow
