#include "grflow/spacetime.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>

namespace grflow {

namespace {

Field node_time_derivative(const SpacetimeVectorField& Y, std::size_t k) {
  double dt = Y.t(k + 1) - Y.t(k - 1);
  Field d = Y.values[k + 1] - Y.values[k - 1];
  d *= 1.0 / dt;
  return d;
}

Field twist_term(const FlowSolution& flow, std::size_t m, const Field& Y, const Field& ginv, TwistSign sign) {
  const auto& node = flow.node(m);
  Field B = node.dg;
  B.axpy(twist(sign), node.db);
  Field v = contract_first(B, Y, ginv);
  v *= 0.5;
  return v;
}

}  // namespace

SpacetimeVectorField nabla_t(const SpacetimeVectorField& Y, TwistSign sign) {
  if (Y.size() < 3) throw std::invalid_argument("nabla_t needs at least three time nodes");
  SpacetimeVectorField out;
  out.flow = Y.flow;
  out.m0 = Y.m0 + 1;
  for (std::size_t k = 1; k + 1 < Y.size(); ++k) {
    std::size_t m = Y.m0 + k;
    Field ginv = inverse_metric(Y.flow->node(m).g);
    Field d = node_time_derivative(Y, k);
    d += twist_term(*Y.flow, m, Y.values[k], ginv, sign);
    out.values.push_back(std::move(d));
  }
  return out;
}

double compatibility_residual(const SpacetimeVectorField& Y, TwistSign sign) {
  SpacetimeVectorField nY = nabla_t(Y, sign);
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < Y.size(); ++k) {
    std::size_t m = Y.m0 + k;
    Field n2p = inner(Y.flow->node(m + 1).g, Y.values[k + 1], Y.values[k + 1]);
    Field n2m = inner(Y.flow->node(m - 1).g, Y.values[k - 1], Y.values[k - 1]);
    double dt = Y.t(k + 1) - Y.t(k - 1);
    Field lhs = n2p - n2m;
    lhs *= 1.0 / dt;
    Field rhs = inner(Y.flow->node(m).g, nY.values[k - 1], Y.values[k]);
    rhs *= 2.0;
    worst = std::max(worst, max_diff(lhs, rhs));
  }
  return worst;
}

Field commutator_residual(const Field& u, const GeometrySlice& slice) {
  const Space& space = *slice.space;
  Field ginv = inverse_metric(slice.g);
  Field Y = gradient(space, u, slice.g);
  Field r = laplacian_vec(slice, Y);
  r -= gradient(space, laplacian_fn(space, u, slice.g), slice.g);
  r -= contract_first(bismut_ricci(slice).full, Y, ginv);
  return r;
}

FunctionJet su2_linear_jet(double lambda, const Eigen::Vector4d& q, const Eigen::Vector4d& a) {
  std::array<Eigen::Quaterniond, 3> e;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    v[i] = lambda / 2.0;
    e[i] = Eigen::Quaterniond(0.0, v[0], v[1], v[2]);
  }
  Eigen::Quaterniond p(q[0], q[1], q[2], q[3]);
  auto pair = [&](const Eigen::Quaterniond& w) {
    return a[0] * w.w() + a[1] * w.x() + a[2] * w.y() + a[3] * w.z();
  };
  FunctionJet jet;
  jet.d1 = SmallVec::Zero(3);
  jet.d2 = SmallMat::Zero(3, 3);
  for (int i = 0; i < 3; ++i) {
    jet.d1[i] = pair(p * e[i]);
    jet.d3[i] = SmallMat::Zero(3, 3);
    for (int j = 0; j < 3; ++j) {
      jet.d2(i, j) = pair(p * e[i] * e[j]);
      for (int k = 0; k < 3; ++k) jet.d3[i](j, k) = pair(p * e[i] * e[j] * e[k]);
    }
  }
  return jet;
}

SmallVec commutator_residual_jet(const GeometrySlice& slice, const FunctionJet& jet) {
  if (slice.space->is_grid()) throw std::invalid_argument("jet commutator needs a homogeneous model");
  const int n = slice.dim();
  SmallMat g = slice.g.matrix(0);
  SmallMat gi = g.inverse();
  Field gamma_f = bismut_connection(slice);
  auto G = [&](int k, int i, int j) { return gamma_f.at(0, k, i, j); };
  SmallMat rc = bismut_ricci(slice).full.matrix(0);

  // Y^k = g^kl X_l u and its frame derivatives.
  SmallVec Y = gi * jet.d1;
  SmallMat XY(n, n);  // XY(j, k) = X_j Y^k
  std::array<SmallMat, 3> XXY;  // XXY[i](j, k) = X_i X_j Y^k
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int l = 0; l < n; ++l) s += gi(k, l) * jet.d2(j, l);
      XY(j, k) = s;
    }
  for (int i = 0; i < n; ++i) {
    XXY[i] = SmallMat::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += gi(k, l) * jet.d3[i](j, l);
        XXY[i](j, k) = s;
      }
  }
  // A(j, k) = (nabla_{X_j} Y)^k and X_i A.
  SmallMat A(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = XY(j, k);
      for (int m = 0; m < n; ++m) s += G(k, j, m) * Y[m];
      A(j, k) = s;
    }
  SmallVec lapY = SmallVec::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (gi(i, j) == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        double XA = XXY[i](j, k);
        for (int m = 0; m < n; ++m) XA += G(k, j, m) * XY(i, m);
        double s = XA;
        for (int l = 0; l < n; ++l) s += G(k, i, l) * A(j, l) - G(l, i, j) * A(l, k);
        lapY[k] += gi(i, j) * s;
      }
    }
  // X_l (Delta u) = g^ij (X_l X_i X_j u - Gamma^k_ij X_l X_k u).
  SmallVec dlap = SmallVec::Zero(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = jet.d3[l](i, j);
        for (int k = 0; k < n; ++k) s -= G(k, i, j) * jet.d2(l, k);
        dlap[l] += gi(i, j) * s;
      }
  SmallVec grad_lap = gi * dlap;
  SmallVec ric = gi * (rc.transpose() * Y);
  return lapY - grad_lap - ric;
}

GradientEvolution gradient_evolution_residual(const Field& u0, const FlowSolution& flow, std::size_t m0,
                                              std::size_t m1, TwistSign sign, bool pure, const HeatOptions& opts) {
  if (m1 < m0 + 2 || m1 >= flow.size()) throw std::invalid_argument("gradient evolution needs three nodes");
  std::vector<double> times;
  for (std::size_t m = m0; m <= m1; ++m) times.push_back(flow.t(m));
  std::vector<Field> u = heat_flow_snapshots(u0, flow.t(m0), times, flow, opts);
  const Space& space = *flow.space();
  SpacetimeVectorField Y;
  Y.flow = &flow;
  Y.m0 = m0;
  for (std::size_t k = 0; k < u.size(); ++k) Y.values.push_back(gradient(space, u[k], flow.node(m0 + k).g));

  GradientEvolution out;
  SpacetimeVectorField nY = nabla_t(Y, sign);
  for (std::size_t k = 1; k + 1 < Y.size(); ++k) {
    std::size_t m = m0 + k;
    GeometrySlice s = flow.slice(m);
    Field ginv = inverse_metric(s.g);
    Field r = nY.values[k - 1];
    r -= laplacian_vec(s, Y.values[k]);
    if (!pure) r += contract_first(flow.defect(m), Y.values[k], ginv);
    Field rn = inner(s.g, r, r);
    Field yn = inner(s.g, Y.values[k], Y.values[k]);
    double worst = std::sqrt(std::max(0.0, rn.max_abs()));
    out.per_node.push_back(worst);
    out.residual = std::max(out.residual, worst);
    out.grad_norm = std::max(out.grad_norm, std::sqrt(yn.max_abs()));
  }
  return out;
}

SmallMat FrameVectorFields::V(const SmallMat& e, int i, int j) const {
  SmallMat v = SmallMat::Zero(e.rows(), e.cols());
  v.col(i) += e.col(j);
  v.col(j) -= e.col(i);
  return v;
}

FrameVectorFields frame_vector_fields(const SmallMat& e, const PointGeometry& pg, TwistSign sign) {
  const int n = pg.dim;
  FrameVectorFields f;
  f.Ex = e;
  f.Ee.resize(n);
  for (int i = 0; i < n; ++i) {
    SmallMat v = SmallMat::Zero(n, n);
    // -e_i^k e_a^l Gamma^m_kl for each frame vector a.
    for (int a = 0; a < n; ++a)
      for (int m = 0; m < n; ++m) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) s += e(k, i) * e(l, a) * pg.G(m, k, l);
        v(m, a) = -s;
      }
    f.Ee[i] = std::move(v);
  }
  // d_t e_a = -1/2 d_t(g +- b)(e_a, .)^#.
  SmallMat B = pg.dg + twist(sign) * pg.db;
  f.dt_frame = -0.5 * pg.ginv * B.transpose() * e;
  return f;
}

double orthonormality_defect(const SmallMat& e, const SmallMat& g) {
  SmallMat m = e.transpose() * g * e;
  m -= SmallMat::Identity(e.cols(), e.cols());
  return m.cwiseAbs().maxCoeff();
}

SmallMat orthonormalize(const SmallMat& e, const SmallMat& g) {
  SmallMat m = e.transpose() * g * e;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<SmallMat> es(m);
  SmallVec d = es.eigenvalues().cwiseSqrt().cwiseInverse();
  SmallMat inv_sqrt = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  return e * inv_sqrt;
}

namespace {

constexpr int kBlock = 27 + 36;

void cubic_weights(double s, double w[4]) {
  // Lagrange weights for nodes -1, 0, 1, 2 at offset s in [0, 1).
  w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
  w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  w[2] = -(s + 1.0) * s * (s - 2.0) / 2.0;
  w[3] = (s + 1.0) * s * (s - 1.0) / 6.0;
}

void pack_node(const Field& gamma, const Field& g, const Field& dg, const Field& db, const Field& defect,
               std::size_t src, int n, double* out) {
  std::fill(out, out + kBlock, 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[(k * 3 + i) * 3 + j] = gamma.at(src, k, i, j);
  const Field* mats[4] = {&g, &dg, &db, &defect};
  for (int q = 0; q < 4; ++q)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[27 + q * 9 + i * 3 + j] = mats[q]->at(src, i, j);
}

bool spatially_uniform(const Field& f) {
  const std::size_t N = f.nodes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    const double* p = f.component(c);
    for (std::size_t i = 1; i < N; ++i)
      if (p[i] != p[0]) return false;
  }
  return true;
}

}  // namespace

GeometrySampler::GeometrySampler(const FlowSolution& flow, std::vector<double> times)
    : dim_(flow.space()->dim()), times_(std::move(times)) {
  if (!flow.space()->is_grid()) throw ConfigError("path sampling needs a periodic grid backend");
  if (times_.empty()) throw std::invalid_argument("sampler needs at least one time");
  std::sort(times_.begin(), times_.end());
  times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
  grid_ = flow.space()->grid();
  const double tol = 1e-12 * std::max(1.0, std::abs(flow.t_end()));
  for (double t : times_)
    if (t < flow.t_begin() - tol || t > flow.t_end() + tol) throw std::out_of_range("sampler time outside the flow");
  tables_.resize(times_.size());
  for (std::size_t q = 0; q < times_.size(); ++q) {
    double t = std::clamp(times_[q], flow.t_begin(), flow.t_end());
    GeometrySlice s = flow.slice_at(t);
    Field dg = flow.dg_at(t);
    Field db = flow.db_at(t);
    Field gamma = bismut_connection(s);
    Field defect = bismut_ricci(s).full;
    defect.axpy(0.5, dg);
    defect.axpy(-0.5, db);
    Table& tab = tables_[q];
    tab.uniform = spatially_uniform(s.g) && spatially_uniform(gamma) && spatially_uniform(dg) &&
                  spatially_uniform(db) && spatially_uniform(defect);
    std::size_t count = tab.uniform ? 1 : s.nodes();
    tab.values.assign(count * kBlock, 0.0);
    for (std::size_t i = 0; i < count; ++i)
      pack_node(gamma, s.g, dg, db, defect, i, dim_, tab.values.data() + i * kBlock);
  }
}

void GeometrySampler::fill(const Table& tab, const std::array<double, 3>& x, double* out) const {
  if (tab.uniform) {
    std::copy(tab.values.begin(), tab.values.begin() + kBlock, out);
    return;
  }
  std::fill(out, out + kBlock, 0.0);
  int base[3] = {0, 0, 0};
  double w[3][4] = {{0, 1, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}};
  for (int a = 0; a < dim_; ++a) {
    double u = x[a] / grid_.h(a);
    double f = std::floor(u);
    base[a] = static_cast<int>(f);
    cubic_weights(u - f, w[a]);
  }
  int span[3] = {1, 1, 1};
  int off0[3] = {1, 1, 1};
  for (int a = 0; a < dim_; ++a) {
    span[a] = 4;
    off0[a] = 0;
  }
  for (int i = 0; i < span[0]; ++i)
    for (int j = 0; j < span[1]; ++j)
      for (int k = 0; k < span[2]; ++k) {
        int oi = off0[0] + i, oj = off0[1] + j, ok = off0[2] + k;
        double wt = w[0][oi] * w[1][oj] * w[2][ok];
        if (wt == 0.0) continue;
        std::size_t node = grid_.wrap_index(base[0] + oi - 1, base[1] + oj - 1, base[2] + ok - 1);
        const double* src = tab.values.data() + node * kBlock;
        for (int c = 0; c < kBlock; ++c) out[c] += wt * src[c];
      }
}

PointGeometry GeometrySampler::at(const std::array<double, 3>& x, double t) const {
  double buf[kBlock];
  const double tol = 1e-12 * std::max(1.0, std::abs(times_.back()));
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  std::size_t q = static_cast<std::size_t>(it - times_.begin());
  if (q < times_.size() && std::abs(times_[q] - t) <= tol) {
    fill(tables_[q], x, buf);
  } else {
    if (t < times_.front() - tol || t > times_.back() + tol || times_.size() < 2)
      throw std::out_of_range("sampler time outside the table");
    // Cubic Lagrange in time over the four nearest tabulated times.
    std::size_t hi = std::clamp<std::size_t>(q, 1, times_.size() - 1);
    std::size_t lo = hi >= 2 ? hi - 2 : 0;
    std::size_t top = std::min(times_.size(), lo + 4);
    if (top - lo < 4 && top >= 4) lo = top - 4;
    std::fill(buf, buf + kBlock, 0.0);
    double tmp[kBlock];
    for (std::size_t a = lo; a < top; ++a) {
      double wt = 1.0;
      for (std::size_t b = lo; b < top; ++b)
        if (b != a) wt *= (t - times_[b]) / (times_[a] - times_[b]);
      fill(tables_[a], x, tmp);
      for (int c = 0; c < kBlock; ++c) buf[c] += wt * tmp[c];
    }
  }
  const int n = dim_;
  PointGeometry pg;
  pg.dim = n;
  std::copy(buf, buf + 27, pg.gamma.begin());
  SmallMat* mats[4] = {&pg.g, &pg.dg, &pg.db, &pg.defect};
  for (int m = 0; m < 4; ++m) {
    mats[m]->resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) (*mats[m])(i, j) = buf[27 + m * 9 + i * 3 + j];
  }
  pg.ginv = pg.g.inverse();
  return pg;
}

}  // namespace grflow
