#include "grflow/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace grflow {

Space::Space(Backend backend, DiffMode mode) : backend_(std::move(backend)), mode_(mode) {
  dim_ = dimension(backend_);
  nodes_ = node_count(backend_);
  if (const auto* g = std::get_if<PeriodicGrid>(&backend_)) {
    g->validate();
    grid_ = g;
    deriv_ = std::make_unique<GridDerivative>(*g, mode_);
  } else {
    std::get<HomogeneousModel>(backend_).validate();
  }
}

const PeriodicGrid& Space::grid() const {
  if (!grid_) throw GeometryError("backend is not a periodic grid");
  return *grid_;
}

const HomogeneousModel& Space::model() const { return std::get<HomogeneousModel>(backend_); }

const GridDerivative& Space::deriv() const {
  if (!deriv_) throw GeometryError("backend is not a periodic grid");
  return *deriv_;
}

Field Space::partial(const Field& f, int axis) const {
  if (!grid_) return Field(f.dim(), f.rank(), f.nodes(), f.symmetry());
  return deriv_->partial(f, axis);
}

double Space::cell_volume() const { return grid_ ? grid_->cell_volume() : 1.0; }

SpacePtr make_space(Backend backend, DiffMode mode) {
  return std::make_shared<const Space>(std::move(backend), mode);
}

void GeometrySlice::validate(double closed_tol) const {
  if (!space) throw GeometryError("slice without backend");
  const int n = dim();
  if (g.rank() != 2 || g.dim() != n || g.nodes() != nodes()) throw GeometryError("metric has wrong shape");
  if (b.rank() != 2 || b.dim() != n || b.nodes() != nodes()) throw GeometryError("b has wrong shape");
  if (!H0 || H0->rank() != 3) throw GeometryError("H0 must be a 3-form");
  for (std::size_t node = 0; node < nodes(); ++node)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (g.at(node, i, j) != g.at(node, j, i)) throw GeometryError("metric not symmetric");
        if (b.at(node, i, j) != -b.at(node, j, i)) throw GeometryError("b not antisymmetric");
      }
  if (min_eigenvalue(g) <= 0.0) throw GeometryError("metric not positive definite");
  if (n >= 4) {
    Field dH = exterior_derivative(*space, *H0);
    if (dH.max_abs() > closed_tol) throw GeometryError("H0 is not closed");
  }
}

GeometrySlice make_slice(SpacePtr space, Field g, Field b, Field H0, double t) {
  GeometrySlice s;
  s.space = std::move(space);
  g.set_symmetry(Symmetry::symmetric);
  b.set_symmetry(Symmetry::antisymmetric);
  H0.set_symmetry(Symmetry::antisymmetric);
  s.g = std::move(g);
  s.b = std::move(b);
  s.H0 = std::make_shared<const Field>(std::move(H0));
  s.t = t;
  s.validate();
  return s;
}

namespace {

std::size_t flat_index(const std::vector<int>& idx, int n) {
  std::size_t c = 0;
  for (int v : idx) c = c * n + v;
  return c;
}

bool next_multi(std::vector<int>& idx, int n) {
  for (int p = static_cast<int>(idx.size()) - 1; p >= 0; --p) {
    if (++idx[p] < n) return true;
    idx[p] = 0;
  }
  return false;
}

}  // namespace

Field exterior_derivative(const Space& space, const Field& form) {
  const int n = space.dim();
  const int p = form.rank();
  const std::size_t N = form.nodes();
  Field out(n, p + 1, N, Symmetry::antisymmetric);
  std::vector<int> idx(p + 1, 0);
  std::vector<int> rest(p, 0);
  if (space.is_grid()) {
    bool constant = true;
    for (std::size_t c = 0; c < form.components() && constant; ++c) {
      const double* v = form.component(c);
      for (std::size_t q = 1; q < N; ++q)
        if (v[q] != v[0]) {
          constant = false;
          break;
        }
    }
    if (constant) return out;
    std::vector<Field> dpart;
    for (int a = 0; a < n; ++a) dpart.push_back(space.partial(form, a));
    do {
      double* o = out.component(flat_index(idx, n));
      for (int a = 0; a <= p; ++a) {
        int r = 0;
        for (int q = 0; q <= p; ++q)
          if (q != a) rest[r++] = idx[q];
        const double sign = (a % 2 == 0) ? 1.0 : -1.0;
        const double* src = dpart[idx[a]].component(flat_index(rest, n));
        for (std::size_t node = 0; node < N; ++node) o[node] += sign * src[node];
      }
    } while (next_multi(idx, n));
  } else {
    const HomogeneousModel& m = space.model();
    std::vector<int> rem(p, 0);
    do {
      double s = 0.0;
      for (int a = 0; a <= p; ++a)
        for (int b = a + 1; b <= p; ++b) {
          const double sign = ((a + b) % 2 == 0) ? 1.0 : -1.0;
          int r = 1;
          for (int q = 0; q <= p; ++q)
            if (q != a && q != b) rem[r++] = idx[q];
          for (int mm = 0; mm < n; ++mm) {
            double cm = m(mm, idx[a], idx[b]);
            if (cm == 0.0) continue;
            rem[0] = mm;
            s += sign * cm * form.data()[flat_index(rem, n)];
          }
        }
      out.data()[flat_index(idx, n)] = s;
    } while (next_multi(idx, n));
  }
  return out;
}

Field total_three_form(const GeometrySlice& slice) {
  Field H = exterior_derivative(*slice.space, slice.b);
  H += *slice.H0;
  H.set_symmetry(Symmetry::antisymmetric);
  return H;
}

namespace {

// True when every component is the same at all nodes.
bool uniform(const Field& f) {
  const std::size_t N = f.nodes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    const double* v = f.component(c);
    for (std::size_t q = 1; q < N; ++q)
      if (v[q] != v[0]) return false;
  }
  return true;
}

void broadcast_first(Field& f) {
  const std::size_t N = f.nodes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    double* v = f.component(c);
    std::fill(v + 1, v + N, v[0]);
  }
}

// Inverse and determinant of a symmetric n x n matrix (n <= 3), closed form.
double invert_small(const double* m, int n, double* out) {
  if (n == 1) {
    out[0] = 1.0 / m[0];
    return m[0];
  }
  if (n == 2) {
    const double det = m[0] * m[3] - m[1] * m[2];
    out[0] = m[3] / det;
    out[3] = m[0] / det;
    out[1] = out[2] = -0.5 * (m[1] + m[2]) / det;
    return det;
  }
  const double a = m[0], b = m[1], c = m[2], d = m[4], e = m[5], f = m[8];
  const double A = d * f - e * e, B = c * e - b * f, C = b * e - c * d;
  const double det = a * A + b * B + c * C;
  out[0] = A / det;
  out[1] = out[3] = B / det;
  out[2] = out[6] = C / det;
  out[4] = (a * f - c * c) / det;
  out[5] = out[7] = (b * c - a * e) / det;
  out[8] = (a * d - b * b) / det;
  return det;
}

void load(const Field& g, std::size_t node, double* m) {
  const int n = g.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i * n + j] = g.at(node, i, j);
}

// Leading principal minors positive (Sylvester).
bool positive_definite_at(const double* m, int n) {
  if (!(m[0] > 0.0)) return false;
  if (n >= 2 && !(m[0] * m[n + 1] - m[1] * m[n] > 0.0)) return false;
  if (n == 3) {
    double inv[9];
    if (!(invert_small(m, 3, inv) > 0.0)) return false;
  }
  return true;
}

}  // namespace

Field inverse_metric(const Field& g) {
  const int n = g.dim();
  Field inv(n, 2, g.nodes(), Symmetry::symmetric);
  const bool uni = uniform(g);
  const std::size_t N = uni ? 1 : g.nodes();
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (std::size_t node = 0; node < N; ++node) {
    double m[9], mi[9];
    load(g, node, m);
    if (n > 3) {
      SmallMat x = g.matrix(node);
      Eigen::MatrixXd xi = Eigen::MatrixXd(x).inverse();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inv.at(node, i, j) = 0.5 * (xi(i, j) + xi(j, i));
      continue;
    }
    if (!positive_definite_at(m, n)) {
      bad = true;
      continue;
    }
    invert_small(m, n, mi);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) inv.at(node, i, j) = mi[i * n + j];
  }
  if (bad) throw GeometryError("metric not positive definite");
  if (uni) broadcast_first(inv);
  return inv;
}

Field volume_density(const Field& g) {
  const int n = g.dim();
  Field v = Field::scalar(g.nodes());
  const bool uni = uniform(g);
  const std::size_t N = uni ? 1 : g.nodes();
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (std::size_t node = 0; node < N; ++node) {
    double d;
    if (n <= 3) {
      double m[9], mi[9];
      load(g, node, m);
      d = invert_small(m, n, mi);
    } else {
      d = Eigen::MatrixXd(g.matrix(node)).determinant();
    }
    if (!(d > 0.0)) bad = true;
    v.at(node) = std::sqrt(std::max(d, 0.0));
  }
  if (bad) throw GeometryError("metric not positive definite");
  if (uni) broadcast_first(v);
  return v;
}

double min_eigenvalue(const Field& g) {
  const int n = g.dim();
  const std::size_t N = uniform(g) ? 1 : g.nodes();
  std::vector<double> lo(N);
#pragma omp parallel for schedule(static)
  for (std::size_t node = 0; node < N; ++node) {
    if (n == 3) {
      Eigen::Matrix3d m;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = g.at(node, i, j);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(m, Eigen::EigenvaluesOnly);
      lo[node] = es.eigenvalues()(0);
    } else if (n == 2) {
      const double a = g.at(node, 0, 0), b = 0.5 * (g.at(node, 0, 1) + g.at(node, 1, 0)), c = g.at(node, 1, 1);
      lo[node] = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    } else if (n == 1) {
      lo[node] = g.at(node, 0, 0);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(g.matrix(node)), Eigen::EigenvaluesOnly);
      lo[node] = es.eigenvalues()(0);
    }
  }
  double m = std::numeric_limits<double>::infinity();
  for (double v : lo) m = std::min(m, v);
  return m;
}

Field h_squared(const Field& H, const Field& g) {
  const int n = g.dim();
  Field ginv = inverse_metric(g);
  Field out(n, 2, g.nodes(), Symmetry::symmetric);
  const bool uni = uniform(g) && uniform(H);
  const std::size_t N = uni ? 1 : g.nodes();
#pragma omp parallel for schedule(static)
  for (std::size_t node = 0; node < N; ++node) {
    std::vector<double> raised(static_cast<std::size_t>(n) * n * n);
    // raised[i][b][d] = g^ab g^cd H_iac
    for (int i = 0; i < n; ++i)
      for (int bb = 0; bb < n; ++bb)
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) s += ginv.at(node, a, bb) * ginv.at(node, c, d) * H.at(node, i, a, c);
          raised[(static_cast<std::size_t>(i) * n + bb) * n + d] = s;
        }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int bb = 0; bb < n; ++bb)
          for (int d = 0; d < n; ++d) s += raised[(static_cast<std::size_t>(i) * n + bb) * n + d] * H.at(node, j, bb, d);
        out.at(node, i, j) = s;
        out.at(node, j, i) = s;
      }
  }
  if (uni) broadcast_first(out);
  return out;
}

Field h_norm_squared(const Field& H, const Field& g) {
  Field h2 = h_squared(H, g);
  Field ginv = inverse_metric(g);
  Field out = Field::scalar(g.nodes());
  for (std::size_t node = 0; node < g.nodes(); ++node) {
    double s = 0.0;
    for (int i = 0; i < g.dim(); ++i)
      for (int j = 0; j < g.dim(); ++j) s += ginv.at(node, i, j) * h2.at(node, i, j);
    out.at(node) = s;
  }
  return out;
}

Field levi_civita(const Space& space, const Field& g) {
  const int n = space.dim();
  const std::size_t N = g.nodes();
  Field ginv = inverse_metric(g);
  Field gamma(n, 3, N);
  if (space.is_grid() && uniform(g)) return gamma;
  if (space.is_grid()) {
    std::vector<Field> dg;
    for (int a = 0; a < n; ++a) dg.push_back(space.partial(g, a));
#pragma omp parallel for schedule(static)
    for (std::size_t node = 0; node < N; ++node)
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int l = 0; l < n; ++l)
              s += ginv.at(node, k, l) *
                   (dg[i].at(node, l, j) + dg[j].at(node, l, i) - dg[l].at(node, i, j));
            gamma.at(node, k, i, j) = 0.5 * s;
            gamma.at(node, k, j, i) = 0.5 * s;
          }
  } else {
    const HomogeneousModel& m = space.model();
    // Koszul: g(nabla_i X_j, X_l) = (c_ij,l - c_jl,i + c_li,j) / 2 with c_ij,l = c^m_ij g_ml.
    auto cl = [&](int i, int j, int l) {
      double s = 0.0;
      for (int mm = 0; mm < n; ++mm) s += m(mm, i, j) * g.at(0, mm, l);
      return s;
    };
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += ginv.at(0, k, l) * 0.5 * (cl(i, j, l) - cl(j, l, i) + cl(l, i, j));
          gamma.at(0, k, i, j) = s;
        }
  }
  return gamma;
}

Field ricci_lc(const Space& space, const Field& g) {
  const int n = space.dim();
  const std::size_t N = g.nodes();
  Field gamma = levi_civita(space, g);
  Field rc(n, 2, N, Symmetry::symmetric);
  if (space.is_grid() && uniform(g)) return rc;
  if (space.is_grid()) {
    std::vector<Field> dG;
    for (int a = 0; a < n; ++a) dG.push_back(space.partial(gamma, a));
#pragma omp parallel for schedule(static)
    for (std::size_t node = 0; node < N; ++node)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) {
            s += dG[k].at(node, k, i, j) - dG[j].at(node, k, i, k);
            for (int l = 0; l < n; ++l)
              s += gamma.at(node, k, k, l) * gamma.at(node, l, i, j) - gamma.at(node, k, j, l) * gamma.at(node, l, i, k);
          }
          rc.at(node, i, j) = s;
        }
    // Symmetrize the discretization noise away; Rc is symmetric exactly.
    Field sym = symmetric_part(rc);
    return sym;
  }
  const HomogeneousModel& m = space.model();
  // R(X_i,X_j)X_k = R^p_ijk X_p, Rc_jk = sum_i R^i_ijk.
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int mm = 0; mm < n; ++mm)
          s += gamma.at(0, mm, j, k) * gamma.at(0, i, i, mm) - gamma.at(0, mm, i, k) * gamma.at(0, i, j, mm) -
               m(mm, i, j) * gamma.at(0, i, mm, k);
      rc.at(0, j, k) = s;
    }
  return symmetric_part(rc);
}

Field scalar_curv(const Space& space, const Field& g) {
  Field rc = ricci_lc(space, g);
  Field ginv = inverse_metric(g);
  Field R = Field::scalar(g.nodes());
  for (std::size_t node = 0; node < g.nodes(); ++node) {
    double s = 0.0;
    for (int i = 0; i < g.dim(); ++i)
      for (int j = 0; j < g.dim(); ++j) s += ginv.at(node, i, j) * rc.at(node, i, j);
    R.at(node) = s;
  }
  return R;
}

Field codifferential_H(const Space& space, const Field& H, const Field& g) {
  const int n = space.dim();
  const std::size_t N = g.nodes();
  if (space.is_grid() && uniform(g) && uniform(H)) return Field(n, 2, N, Symmetry::antisymmetric);
  Field ginv = inverse_metric(g);
  Field gamma = levi_civita(space, g);
  std::vector<Field> dH;
  for (int a = 0; a < n; ++a) dH.push_back(space.partial(H, a));
  Field out(n, 2, N, Symmetry::antisymmetric);
#pragma omp parallel for schedule(static)
  for (std::size_t node = 0; node < N; ++node)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int a = 0; a < n; ++a) {
            double gia = ginv.at(node, i, a);
            if (gia == 0.0) continue;
            double DH = dH[a].at(node, i, j, k);
            for (int p = 0; p < n; ++p)
              DH -= gamma.at(node, p, a, i) * H.at(node, p, j, k) + gamma.at(node, p, a, j) * H.at(node, i, p, k) +
                    gamma.at(node, p, a, k) * H.at(node, i, j, p);
            s += gia * DH;
          }
        out.at(node, j, k) = -s;
      }
  return out;
}

Field bismut_connection(const Space& space, const Field& g, const Field& H) {
  const int n = space.dim();
  Field gamma = levi_civita(space, g);
  Field ginv = inverse_metric(g);
  for (std::size_t node = 0; node < g.nodes(); ++node)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += ginv.at(node, k, l) * H.at(node, l, i, j);
          gamma.at(node, k, i, j) += 0.5 * s;
        }
  return gamma;
}

Field bismut_connection(const GeometrySlice& slice) {
  return bismut_connection(*slice.space, slice.g, total_three_form(slice));
}

Field torsion(const Space& space, const Field& gamma) {
  const int n = space.dim();
  Field T(n, 3, gamma.nodes());
  for (std::size_t node = 0; node < gamma.nodes(); ++node)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double c = space.is_grid() ? 0.0 : space.model()(k, i, j);
          T.at(node, k, i, j) = gamma.at(node, k, i, j) - gamma.at(node, k, j, i) - c;
        }
  return T;
}

Field covariant_derivative_metric(const Space& space, const Field& g, const Field& gamma) {
  const int n = space.dim();
  Field out(n, 3, g.nodes());
  for (int a = 0; a < n; ++a) {
    Field dg = space.partial(g, a);
    for (std::size_t node = 0; node < g.nodes(); ++node)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = dg.at(node, i, j);
          for (int p = 0; p < n; ++p)
            s -= gamma.at(node, p, a, i) * g.at(node, p, j) + gamma.at(node, p, a, j) * g.at(node, i, p);
          out.at(node, a, i, j) = s;
        }
  }
  return out;
}

BismutRicci bismut_ricci(const GeometrySlice& slice) {
  const Space& space = *slice.space;
  Field H = total_three_form(slice);
  BismutRicci r;
  r.sym = ricci_lc(space, slice.g);
  r.sym.axpy(-0.25, h_squared(H, slice.g));
  r.sym.set_symmetry(Symmetry::symmetric);
  r.antisym = codifferential_H(space, H, slice.g);
  r.antisym *= -0.5;
  r.full = r.sym;
  r.full += r.antisym;
  r.full.set_symmetry(Symmetry::none);
  return r;
}

Field differential(const Space& space, const Field& u) {
  const int n = space.dim();
  Field du(n, 1, u.nodes());
  if (!space.is_grid()) return du;
  for (int a = 0; a < n; ++a) space.deriv().d1(u.component(0), du.component(a), a);
  return du;
}

Field raise(const Field& ginv, const Field& alpha) {
  const int n = ginv.dim();
  Field Y(n, 1, alpha.nodes());
  for (std::size_t node = 0; node < alpha.nodes(); ++node)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += ginv.at(node, i, j) * alpha.at(node, j);
      Y.at(node, i) = s;
    }
  return Y;
}

Field lower(const Field& g, const Field& Y) { return raise(g, Y); }

Field gradient(const Space& space, const Field& u, const Field& g) {
  return raise(inverse_metric(g), differential(space, u));
}

Field inner(const Field& g, const Field& X, const Field& Y) {
  const int n = g.dim();
  Field out = Field::scalar(X.nodes());
  for (std::size_t node = 0; node < X.nodes(); ++node) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += g.at(node, i, j) * X.at(node, i) * Y.at(node, j);
    out.at(node) = s;
  }
  return out;
}

Field norm_squared_2tensor(const Field& ginv, const Field& T) {
  const int n = ginv.dim();
  Field out = Field::scalar(T.nodes());
  for (std::size_t node = 0; node < T.nodes(); ++node) {
    SmallMat gi = ginv.matrix(node);
    SmallMat t = T.matrix(node);
    SmallMat a = gi * t * gi;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += a(i, j) * t(i, j);
    out.at(node) = s;
  }
  return out;
}

Field contract_first(const Field& B, const Field& Y, const Field& ginv) {
  const int n = ginv.dim();
  Field V(n, 1, Y.nodes());
  for (std::size_t node = 0; node < Y.nodes(); ++node)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int k = 0; k < n; ++k) s += Y.at(node, a) * B.at(node, a, k) * ginv.at(node, k, j);
      V.at(node, j) = s;
    }
  return V;
}

Field hessian(const Space& space, const Field& u, const Field& gamma) {
  const int n = space.dim();
  const std::size_t N = u.nodes();
  Field hess(n, 2, N);
  if (!space.is_grid()) return hess;
  Field du = differential(space, u);
  std::vector<double> tmp(N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j < i) {
        for (std::size_t node = 0; node < N; ++node) hess.at(node, i, j) = hess.at(node, j, i);
        continue;
      }
      space.deriv().d11(u.component(0), tmp.data(), i, j);
      for (std::size_t node = 0; node < N; ++node) hess.at(node, i, j) = tmp[node];
    }
  for (std::size_t node = 0; node < N; ++node)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += gamma.at(node, k, i, j) * du.at(node, k);
        hess.at(node, i, j) -= s;
      }
  return hess;
}

Field laplacian_fn(const Space& space, const Field& u, const Field& g) {
  Field hess = hessian(space, u, levi_civita(space, g));
  Field ginv = inverse_metric(g);
  Field out = Field::scalar(u.nodes());
  for (std::size_t node = 0; node < u.nodes(); ++node) {
    double s = 0.0;
    for (int i = 0; i < g.dim(); ++i)
      for (int j = 0; j < g.dim(); ++j) s += ginv.at(node, i, j) * hess.at(node, i, j);
    out.at(node) = s;
  }
  return out;
}

Field laplacian_vec(const Space& space, const Field& Y, const Field& g, const Field& gamma) {
  const int n = space.dim();
  const std::size_t N = Y.nodes();
  // A_j^k = (nabla_j Y)^k stored as at(node, j, k).
  Field A(n, 2, N);
  std::vector<Field> dY;
  for (int a = 0; a < n; ++a) dY.push_back(space.partial(Y, a));
  for (std::size_t node = 0; node < N; ++node)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = dY[j].at(node, k);
        for (int m = 0; m < n; ++m) s += gamma.at(node, k, j, m) * Y.at(node, m);
        A.at(node, j, k) = s;
      }
  std::vector<Field> dA;
  for (int a = 0; a < n; ++a) dA.push_back(space.partial(A, a));
  Field ginv = inverse_metric(g);
  Field out(n, 1, N);
  for (std::size_t node = 0; node < N; ++node)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = ginv.at(node, i, j);
          if (gij == 0.0) continue;
          double v = dA[i].at(node, j, k);
          for (int l = 0; l < n; ++l) v += -gamma.at(node, l, i, j) * A.at(node, l, k) + gamma.at(node, k, i, l) * A.at(node, j, l);
          s += gij * v;
        }
      out.at(node, k) = s;
    }
  return out;
}

Field laplacian_vec(const GeometrySlice& slice, const Field& Y) {
  return laplacian_vec(*slice.space, Y, slice.g, bismut_connection(slice));
}

}  // namespace grflow
