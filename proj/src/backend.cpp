#include "grflow/backend.hpp"

#include <cmath>
#include <string>

#include "grflow/core.hpp"

namespace grflow {

PeriodicGrid::PeriodicGrid(int d, int nodes, double length) : dim(d) {
  for (int a = 0; a < 3; ++a) {
    n[a] = a < d ? nodes : 1;
    L[a] = a < d ? length : 1.0;
  }
  validate();
}

PeriodicGrid::PeriodicGrid(int d, std::array<int, 3> nodes, std::array<double, 3> lengths)
    : dim(d), n(nodes), L(lengths) {
  for (int a = d; a < 3; ++a) {
    n[a] = 1;
    L[a] = 1.0;
  }
  validate();
}

double PeriodicGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= h(a);
  return v;
}

std::size_t PeriodicGrid::index(int i, int j, int k) const {
  return (static_cast<std::size_t>(k) * n[1] + j) * n[0] + i;
}

std::size_t PeriodicGrid::wrap_index(int i, int j, int k) const {
  i %= n[0];
  if (i < 0) i += n[0];
  j %= n[1];
  if (j < 0) j += n[1];
  k %= n[2];
  if (k < 0) k += n[2];
  return index(i, j, k);
}

std::array<int, 3> PeriodicGrid::unravel(std::size_t node) const {
  int i = static_cast<int>(node % n[0]);
  std::size_t r = node / n[0];
  int j = static_cast<int>(r % n[1]);
  int k = static_cast<int>(r / n[1]);
  return {i, j, k};
}

std::array<double, 3> PeriodicGrid::coords(std::size_t node) const {
  auto ijk = unravel(node);
  return {ijk[0] * h(0), ijk[1] * h(1), ijk[2] * h(2)};
}

std::size_t PeriodicGrid::stride(int a) const {
  if (a == 0) return 1;
  if (a == 1) return static_cast<std::size_t>(n[0]);
  return static_cast<std::size_t>(n[0]) * n[1];
}

std::size_t PeriodicGrid::nearest(const double* x) const {
  int ijk[3] = {0, 0, 0};
  for (int a = 0; a < dim; ++a) ijk[a] = static_cast<int>(std::lround(x[a] / h(a)));
  return wrap_index(ijk[0], ijk[1], ijk[2]);
}

void PeriodicGrid::validate() const {
  if (dim < 1 || dim > 3) throw GeometryError("grid dimension must be 1, 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 8) throw GeometryError("grid needs at least 8 nodes per axis");
    if (!(L[a] > 0.0)) throw GeometryError("grid period must be positive");
  }
}

HomogeneousModel::HomogeneousModel(int d, std::vector<double> constants) : dim(d), c(std::move(constants)) {
  validate();
}

HomogeneousModel HomogeneousModel::su2(double lambda) {
  std::vector<double> c(27, 0.0);
  auto eps = [](int i, int j, int k) {
    return static_cast<double>((i - j) * (j - k) * (k - i)) / 2.0;
  };
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c[(k * 3 + i) * 3 + j] = lambda * eps(i, j, k);
  return HomogeneousModel(3, std::move(c));
}

double HomogeneousModel::jacobi_defect() const {
  // sum_cyc [[X_i, X_j], X_k] = sum_m (c^m_ij c^l_mk + c^m_jk c^l_mi + c^m_ki c^l_mj) X_l
  double worst = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) {
          double s = 0.0;
          for (int m = 0; m < dim; ++m)
            s += (*this)(m, i, j) * (*this)(l, m, k) + (*this)(m, j, k) * (*this)(l, m, i) +
                 (*this)(m, k, i) * (*this)(l, m, j);
          worst = std::max(worst, std::abs(s));
        }
  return worst;
}

void HomogeneousModel::validate(double tol) const {
  if (dim < 1) throw GeometryError("model dimension must be positive");
  if (c.size() != static_cast<std::size_t>(dim) * dim * dim)
    throw GeometryError("structure constants must have dim^3 entries");
  for (int k = 0; k < dim; ++k)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        if (std::abs((*this)(k, i, j) + (*this)(k, j, i)) > tol)
          throw GeometryError("structure constants not antisymmetric");
  double jd = jacobi_defect();
  if (jd > tol) throw GeometryError("Jacobi identity violated: defect " + std::to_string(jd));
}

int dimension(const Backend& b) {
  return std::visit([](const auto& x) { return x.dim; }, b);
}

std::size_t node_count(const Backend& b) {
  if (const auto* g = std::get_if<PeriodicGrid>(&b)) return g->size();
  return 1;
}

}  // namespace grflow
