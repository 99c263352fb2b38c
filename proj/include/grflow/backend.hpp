#pragma once

#include <array>
#include <cstddef>
#include <variant>
#include <vector>

namespace grflow {

struct PeriodicGrid {
  int dim = 1;
  std::array<int, 3> n{8, 1, 1};
  std::array<double, 3> L{1.0, 1.0, 1.0};

  PeriodicGrid() = default;
  PeriodicGrid(int d, int nodes, double length);
  PeriodicGrid(int d, std::array<int, 3> nodes, std::array<double, 3> lengths);

  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2]; }
  double h(int a) const { return L[a] / n[a]; }
  double cell_volume() const;
  std::size_t index(int i, int j, int k) const;
  std::size_t wrap_index(int i, int j, int k) const;
  std::array<int, 3> unravel(std::size_t node) const;
  std::array<double, 3> coords(std::size_t node) const;
  std::size_t stride(int a) const;
  // Nearest node to a point (periodic).
  std::size_t nearest(const double* x) const;
  void validate() const;
};

// Left-invariant structure: [X_i, X_j] = c^k_ij X_k in an orthonormal basis.
struct HomogeneousModel {
  int dim = 3;
  std::vector<double> c;  // c[(k*dim + i)*dim + j]

  HomogeneousModel() = default;
  HomogeneousModel(int d, std::vector<double> constants);
  static HomogeneousModel su2(double lambda);

  double operator()(int k, int i, int j) const { return c[(static_cast<std::size_t>(k) * dim + i) * dim + j]; }
  double jacobi_defect() const;
  void validate(double tol = 1e-12) const;
};

using Backend = std::variant<PeriodicGrid, HomogeneousModel>;

int dimension(const Backend& b);
std::size_t node_count(const Backend& b);
inline bool is_grid(const Backend& b) { return std::holds_alternative<PeriodicGrid>(b); }

}  // namespace grflow
