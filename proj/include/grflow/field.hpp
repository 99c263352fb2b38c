#pragma once

#include <cstddef>
#include <vector>

#include "grflow/core.hpp"

namespace grflow {

enum class Symmetry { none, symmetric, antisymmetric };

// Rank-r tensor field over nodes with all n^r components materialized.
// Storage is component-major: data[c * nodes + node], c = ((i*n)+j)*n+k.
// Which slots are upper or lower is fixed by the producing operation.
class Field {
 public:
  Field() = default;
  Field(int dim, int rank, std::size_t nodes, Symmetry sym = Symmetry::none);

  static Field scalar(std::size_t nodes, double value = 0.0);

  int dim() const { return dim_; }
  int rank() const { return rank_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t components() const { return ncomp_; }
  Symmetry symmetry() const { return sym_; }
  void set_symmetry(Symmetry s) { sym_ = s; }

  std::size_t comp(int i) const { return static_cast<std::size_t>(i); }
  std::size_t comp(int i, int j) const { return static_cast<std::size_t>(i) * dim_ + j; }
  std::size_t comp(int i, int j, int k) const { return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k; }

  double* component(std::size_t c) { return data_.data() + c * nodes_; }
  const double* component(std::size_t c) const { return data_.data() + c * nodes_; }

  double& at(std::size_t node) { return data_[node]; }
  double at(std::size_t node) const { return data_[node]; }
  double& at(std::size_t node, int i) { return data_[comp(i) * nodes_ + node]; }
  double at(std::size_t node, int i) const { return data_[comp(i) * nodes_ + node]; }
  double& at(std::size_t node, int i, int j) { return data_[comp(i, j) * nodes_ + node]; }
  double at(std::size_t node, int i, int j) const { return data_[comp(i, j) * nodes_ + node]; }
  double& at(std::size_t node, int i, int j, int k) { return data_[comp(i, j, k) * nodes_ + node]; }
  double at(std::size_t node, int i, int j, int k) const { return data_[comp(i, j, k) * nodes_ + node]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Components at one node as a matrix (rank 2) or vector (rank 1).
  SmallMat matrix(std::size_t node) const;
  SmallVec vector(std::size_t node) const;
  void set_matrix(std::size_t node, const SmallMat& m);
  void set_vector(std::size_t node, const SmallVec& v);

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  Field& axpy(double a, const Field& x);

  double max_abs() const;
  // Largest violation of the declared (anti)symmetry in the first two slots
  // (rank 2) or all slots (rank 3).
  double symmetry_defect() const;
  bool same_shape(const Field& o) const;

 private:
  int dim_ = 0;
  int rank_ = 0;
  std::size_t nodes_ = 0;
  std::size_t ncomp_ = 0;
  Symmetry sym_ = Symmetry::none;
  std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

// Sup-norm of a - b.
double max_diff(const Field& a, const Field& b);

Field symmetric_part(const Field& t);
Field antisymmetric_part(const Field& t);
Field transpose(const Field& t);

}  // namespace grflow
