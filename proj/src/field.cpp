#include "grflow/field.hpp"

#include <algorithm>
#include <cmath>

namespace grflow {

Field::Field(int dim, int rank, std::size_t nodes, Symmetry sym)
    : dim_(dim), rank_(rank), nodes_(nodes), sym_(sym) {
  ncomp_ = 1;
  for (int r = 0; r < rank; ++r) ncomp_ *= static_cast<std::size_t>(dim);
  data_.assign(ncomp_ * nodes_, 0.0);
}

Field Field::scalar(std::size_t nodes, double value) {
  Field f(1, 0, nodes);
  std::fill(f.data_.begin(), f.data_.end(), value);
  return f;
}

SmallMat Field::matrix(std::size_t node) const {
  SmallMat m(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) m(i, j) = at(node, i, j);
  return m;
}

SmallVec Field::vector(std::size_t node) const {
  SmallVec v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = at(node, i);
  return v;
}

void Field::set_matrix(std::size_t node, const SmallMat& m) {
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) at(node, i, j) = m(i, j);
}

void Field::set_vector(std::size_t node, const SmallVec& v) {
  for (int i = 0; i < dim_; ++i) at(node, i) = v(i);
}

bool Field::same_shape(const Field& o) const {
  return dim_ == o.dim_ && rank_ == o.rank_ && nodes_ == o.nodes_;
}

Field& Field::operator+=(const Field& o) {
  if (!same_shape(o)) throw GeometryError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  if (!same_shape(o)) throw GeometryError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Field& Field::axpy(double a, const Field& x) {
  if (!same_shape(x)) throw GeometryError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  return *this;
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Field::symmetry_defect() const {
  if (sym_ == Symmetry::none || rank_ < 2) return 0.0;
  double sign = sym_ == Symmetry::symmetric ? 1.0 : -1.0;
  double worst = 0.0;
  for (std::size_t n = 0; n < nodes_; ++n) {
    if (rank_ == 2) {
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) worst = std::max(worst, std::abs(at(n, i, j) - sign * at(n, j, i)));
    } else if (rank_ == 3) {
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
          for (int k = 0; k < dim_; ++k) {
            double v = at(n, i, j, k);
            worst = std::max(worst, std::abs(v - sign * at(n, j, i, k)));
            worst = std::max(worst, std::abs(v - sign * at(n, i, k, j)));
          }
    }
  }
  return worst;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double max_diff(const Field& a, const Field& b) {
  if (!a.same_shape(b)) throw GeometryError("field shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Field symmetric_part(const Field& t) {
  Field s(t.dim(), 2, t.nodes(), Symmetry::symmetric);
  for (std::size_t n = 0; n < t.nodes(); ++n)
    for (int i = 0; i < t.dim(); ++i)
      for (int j = 0; j < t.dim(); ++j) s.at(n, i, j) = 0.5 * (t.at(n, i, j) + t.at(n, j, i));
  return s;
}

Field antisymmetric_part(const Field& t) {
  Field s(t.dim(), 2, t.nodes(), Symmetry::antisymmetric);
  for (std::size_t n = 0; n < t.nodes(); ++n)
    for (int i = 0; i < t.dim(); ++i)
      for (int j = 0; j < t.dim(); ++j) s.at(n, i, j) = 0.5 * (t.at(n, i, j) - t.at(n, j, i));
  return s;
}

Field transpose(const Field& t) {
  Field s(t.dim(), 2, t.nodes(), t.symmetry());
  for (std::size_t n = 0; n < t.nodes(); ++n)
    for (int i = 0; i < t.dim(); ++i)
      for (int j = 0; j < t.dim(); ++j) s.at(n, i, j) = t.at(n, j, i);
  return s;
}

}  // namespace grflow
