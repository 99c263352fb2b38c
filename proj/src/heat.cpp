#include "grflow/heat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace grflow {

HeatCoefficients HeatCoefficients::from_slice(const GeometrySlice& slice, bool potential, bool bismut) {
  const Space& space = *slice.space;
  const int n = space.dim();
  HeatCoefficients c;
  c.t = slice.t;
  c.ginv = inverse_metric(slice.g);
  Field gamma = levi_civita(space, slice.g);
  c.contracted = Field(n, 1, slice.nodes());
  for (std::size_t node = 0; node < slice.nodes(); ++node)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += c.ginv.at(node, i, j) * gamma.at(node, k, i, j);
      c.contracted.at(node, k) = s;
    }
  c.density = volume_density(slice.g);
  if (potential || bismut) {
    Field H = total_three_form(slice);
    if (potential) {
      c.potential = scalar_curv(space, slice.g);
      c.potential.axpy(-0.25, h_norm_squared(H, slice.g));
    }
    if (bismut) c.bismut = bismut_connection(space, slice.g, H);
  }
  return c;
}

HeatCoefficients HeatCoefficients::at(const FlowSolution& flow, double t, bool potential, bool bismut) {
  return from_slice(flow.slice_at(t), potential, bismut);
}

void apply_laplacian(const Space& space, const HeatCoefficients& c, const double* u, double* out) {
  const std::size_t N = space.nodes();
  std::fill(out, out + N, 0.0);
  if (!space.is_grid()) return;
  const int n = space.dim();
  const GridDerivative& D = space.deriv();
  std::vector<std::vector<double>> du(n, std::vector<double>(N));
  std::vector<double> tmp(N);
  for (int i = 0; i < n; ++i) D.d1(u, du[i].data(), i);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double* gij = c.ginv.component(c.ginv.comp(i, j));
      bool any = false;
      for (std::size_t node = 0; node < N && !any; ++node) any = gij[node] != 0.0;
      if (!any) continue;
      if (i == j)
        D.d2(u, tmp.data(), i);
      else
        D.d1(du[i].data(), tmp.data(), j);
      const double w = i == j ? 1.0 : 2.0;
      for (std::size_t node = 0; node < N; ++node) out[node] += w * gij[node] * tmp[node];
    }
  for (int k = 0; k < n; ++k) {
    const double* gk = c.contracted.component(k);
    for (std::size_t node = 0; node < N; ++node) out[node] -= gk[node] * du[k][node];
  }
}

Field apply_laplacian(const Space& space, const HeatCoefficients& c, const Field& u) {
  Field out = Field::scalar(u.nodes());
  apply_laplacian(space, c, u.component(0), out.component(0));
  return out;
}

double stable_heat_step(const Space& space, const HeatCoefficients& c, double cfl, bool with_potential) {
  if (!space.is_grid()) return std::numeric_limits<double>::infinity();
  const PeriodicGrid& grid = space.grid();
  const int n = space.dim();
  double lam_g = 0.0, drift = 0.0, pot = 0.0;
  for (std::size_t node = 0; node < c.ginv.nodes(); ++node) {
    // Row-sum bound on the largest eigenvalue of g^-1.
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += std::abs(c.ginv.at(node, i, j));
      lam_g = std::max(lam_g, row);
    }
    for (int k = 0; k < n; ++k) drift = std::max(drift, std::abs(c.contracted.at(node, k)));
    if (with_potential) pot = std::max(pot, std::abs(c.potential.at(node)));
  }
  const double stencil = space.mode() == DiffMode::fd4 ? 16.0 / 3.0 : std::numbers::pi * std::numbers::pi;
  double inv_h2 = 0.0, inv_h = 0.0;
  for (int a = 0; a < n; ++a) {
    inv_h2 += 1.0 / (grid.h(a) * grid.h(a));
    inv_h = std::max(inv_h, 1.0 / grid.h(a));
  }
  const double lam = stencil * lam_g * inv_h2 + 1.4 * drift * inv_h + pot;
  double dt = cfl * 2.78 / std::max(lam, 1e-300);
  // Accuracy cap for the zeroth-order term, which does not shrink with h.
  if (pot > 0.0) dt = std::min(dt, 0.02 / pot);
  return dt;
}

namespace {

void axpy_states(std::vector<Field>& out, const std::vector<Field>& y, double a, const std::vector<Field>& k) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i];
    out[i].axpy(a, k[i]);
  }
}

}  // namespace

std::vector<std::vector<Field>> evolve_heat(std::vector<Field> state, double s, const std::vector<double>& times,
                                            const FlowSolution& flow, const HeatSource& source,
                                            const HeatOptions& opts) {
  const Space& space = *flow.space();
  std::vector<std::vector<Field>> out;
  if (times.empty()) return out;
  HeatCoefficients c0 = HeatCoefficients::at(flow, s, false, opts.bismut);
  HeatCoefficients cend = HeatCoefficients::at(flow, times.back(), false, false);
  double dtmax = std::min(stable_heat_step(space, c0, opts.cfl, false), stable_heat_step(space, cend, opts.cfl, false));
  if (opts.max_dt > 0.0) dtmax = std::min(dtmax, opts.max_dt);

  auto rhs = [&](const HeatCoefficients& c, const std::vector<Field>& y) {
    std::vector<Field> r;
    r.reserve(y.size());
    for (const Field& f : y) r.push_back(apply_laplacian(space, c, f));
    if (source) source(c, y, r);
    return r;
  };

  double t = s;
  HeatCoefficients ct = std::move(c0);
  std::vector<Field> tmp(state.size());
  for (double target : times) {
    if (target < t - 1e-12) throw DomainError("snapshot times must be increasing");
    const double len = target - t;
    if (len > 1e-14) {
      const int nsteps = static_cast<int>(std::ceil(len / dtmax - 1e-9));
      const double dt = len / nsteps;
      for (int step = 0; step < nsteps; ++step) {
        const double t1 = step + 1 == nsteps ? target : t + dt;
        HeatCoefficients cm = HeatCoefficients::at(flow, t + 0.5 * dt, false, opts.bismut);
        HeatCoefficients c1 = HeatCoefficients::at(flow, t1, false, opts.bismut);
        auto k1 = rhs(ct, state);
        axpy_states(tmp, state, 0.5 * dt, k1);
        auto k2 = rhs(cm, tmp);
        axpy_states(tmp, state, 0.5 * dt, k2);
        auto k3 = rhs(cm, tmp);
        axpy_states(tmp, state, dt, k3);
        auto k4 = rhs(c1, tmp);
        for (std::size_t i = 0; i < state.size(); ++i) {
          auto& y = state[i].data();
          for (std::size_t q = 0; q < y.size(); ++q)
            y[q] += dt / 6.0 * (k1[i].data()[q] + 2.0 * k2[i].data()[q] + 2.0 * k3[i].data()[q] + k4[i].data()[q]);
        }
        t = t1;
        ct = std::move(c1);
      }
    }
    out.push_back(state);
  }
  return out;
}

Field heat_flow(const Field& u0, double s, double t, const FlowSolution& flow, const HeatOptions& opts) {
  if (t < s) throw DomainError("heat_flow needs s <= t");
  return evolve_heat({u0}, s, {t}, flow, nullptr, opts)[0][0];
}

std::vector<Field> heat_flow_snapshots(const Field& u0, double s, const std::vector<double>& times,
                                       const FlowSolution& flow, const HeatOptions& opts) {
  auto all = evolve_heat({u0}, s, times, flow, nullptr, opts);
  std::vector<Field> out;
  for (auto& st : all) out.push_back(std::move(st[0]));
  return out;
}

Field conj_flow(const Field& vT, double t, double s, const FlowSolution& flow, const HeatOptions& opts) {
  if (s > t) throw DomainError("conj_flow needs s <= t");
  const Space& space = *flow.space();
  Field v = vT;
  if (t - s < 1e-14) return v;
  HeatCoefficients ct = HeatCoefficients::at(flow, t, true, false);
  HeatCoefficients cs = HeatCoefficients::at(flow, s, true, false);
  double dtmax = std::min(stable_heat_step(space, ct, opts.cfl, true), stable_heat_step(space, cs, opts.cfl, true));
  if (opts.max_dt > 0.0) dtmax = std::min(dtmax, opts.max_dt);
  const int nsteps = static_cast<int>(std::ceil((t - s) / dtmax - 1e-9));
  const double dt = (t - s) / nsteps;
  auto rhs = [&](const HeatCoefficients& c, const Field& y) {
    Field r = apply_laplacian(space, c, y);
    for (std::size_t q = 0; q < y.nodes(); ++q) r.at(q) -= c.potential.at(q) * y.at(q);
    return r;
  };
  double cur = t;
  for (int step = 0; step < nsteps; ++step) {
    const double t1 = step + 1 == nsteps ? s : cur - dt;
    HeatCoefficients cm = HeatCoefficients::at(flow, cur - 0.5 * dt, true, false);
    HeatCoefficients c1 = HeatCoefficients::at(flow, t1, true, false);
    Field k1 = rhs(ct, v);
    Field y = v;
    y.axpy(0.5 * dt, k1);
    Field k2 = rhs(cm, y);
    y = v;
    y.axpy(0.5 * dt, k2);
    Field k3 = rhs(cm, y);
    y = v;
    y.axpy(dt, k3);
    Field k4 = rhs(c1, y);
    for (std::size_t q = 0; q < v.nodes(); ++q)
      v.at(q) += dt / 6.0 * (k1.at(q) + 2.0 * k2.at(q) + 2.0 * k3.at(q) + k4.at(q));
    cur = t1;
    ct = std::move(c1);
  }
  return v;
}

double KernelMeasure::integrate(const Field& f) const {
  std::vector<double> terms(f.nodes());
  for (std::size_t q = 0; q < f.nodes(); ++q) terms[q] = f.at(q) * weights.at(q);
  return pairwise_sum(terms);
}

Field discrete_delta(const FlowSolution& flow, std::size_t node, double t) {
  const Space& space = *flow.space();
  Field rho = volume_density(flow.slice_at(t).g);
  Field v = Field::scalar(space.nodes());
  v.at(node) = 1.0 / (space.cell_volume() * rho.at(node));
  return v;
}

KernelMeasure heat_kernel(const std::array<double, 3>& x0, double T, double s, const FlowSolution& flow,
                          const HeatOptions& opts) {
  if (!(s < T)) throw DomainError("heat kernel needs s < T");
  const Space& space = *flow.space();
  const PeriodicGrid& grid = space.grid();
  double hmax = 0.0;
  for (int a = 0; a < grid.dim; ++a) hmax = std::max(hmax, grid.h(a));
  HeatCoefficients cT = HeatCoefficients::at(flow, T, true, false);
  const double lam_min = min_eigenvalue(cT.ginv);
  const double width = std::sqrt(2.0 * (T - s) * lam_min);
  if (width < 3.0 * hmax) throw DomainError("kernel width below three grid spacings; T - s too small for this grid");

  KernelMeasure k;
  k.x0 = x0;
  k.node = grid.nearest(x0.data());
  k.T = T;
  k.s = s;
  Field v = discrete_delta(flow, k.node, T);
  // Short smoothing leg with reduced steps, then the remaining backward solve.
  const double smooth = std::min(4.0 * hmax * hmax, T - s);
  HeatOptions fine = opts;
  fine.max_dt = stable_heat_step(space, cT, opts.cfl, true) / 4.0;
  v = conj_flow(v, T, T - smooth, flow, fine);
  v = conj_flow(v, T - smooth, s, flow, opts);
  Field rho = volume_density(flow.slice_at(s).g);
  const double cell = space.cell_volume();
  std::vector<double> neg;
  for (std::size_t q = 0; q < v.nodes(); ++q)
    if (v.at(q) < 0.0) {
      neg.push_back(-v.at(q) * rho.at(q) * cell);
      v.at(q) = 0.0;
    }
  k.clipped_mass = pairwise_sum(neg);
  k.density = v;
  k.weights = Field::scalar(v.nodes());
  for (std::size_t q = 0; q < v.nodes(); ++q) k.weights.at(q) = v.at(q) * rho.at(q) * cell;
  k.mass = pairwise_sum(k.weights.data());
  return k;
}

double SpacetimeFunction::max_abs() const {
  double m = 0.0;
  for (const Field& f : values) m = std::max(m, f.max_abs());
  return m;
}

Field sample_field(const PeriodicGrid& grid, const std::function<double(const std::array<double, 3>&)>& fn) {
  Field f = Field::scalar(grid.size());
  for (std::size_t q = 0; q < grid.size(); ++q) f.at(q) = fn(grid.coords(q));
  return f;
}

SpacetimeFunction sample_spacetime(const FlowSolution& flow, std::size_t m0, std::size_t m1, const SpacetimeFn& fn) {
  SpacetimeFunction u;
  u.flow = &flow;
  u.m0 = m0;
  const PeriodicGrid& grid = flow.space()->grid();
  for (std::size_t m = m0; m <= m1; ++m) {
    const double t = flow.t(m);
    u.values.push_back(sample_field(grid, [&](const std::array<double, 3>& x) { return fn(x, t); }));
  }
  return u;
}

namespace {

Field time_derivative(const SpacetimeFunction& u, std::size_t k) {
  Field d = u.values[k + 1];
  d -= u.values[k - 1];
  d *= 1.0 / (u.t(k + 1) - u.t(k - 1));
  return d;
}

SpacetimeFunction interior_like(const SpacetimeFunction& u) {
  if (u.size() < 3) throw DomainError("need at least three time nodes");
  SpacetimeFunction r;
  r.flow = u.flow;
  r.m0 = u.m0 + 1;
  return r;
}

Field grad_norm_sq(const Space& space, const Field& u, const Field& ginv) {
  Field du = differential(space, u);
  Field out = Field::scalar(u.nodes());
  for (std::size_t q = 0; q < u.nodes(); ++q) {
    double s = 0.0;
    for (int i = 0; i < space.dim(); ++i)
      for (int j = 0; j < space.dim(); ++j) s += ginv.at(q, i, j) * du.at(q, i) * du.at(q, j);
    out.at(q) = s;
  }
  return out;
}

Field grad_inner(const Space& space, const Field& u, const Field& w, const Field& ginv) {
  Field du = differential(space, u);
  Field dw = differential(space, w);
  Field out = Field::scalar(u.nodes());
  for (std::size_t q = 0; q < u.nodes(); ++q) {
    double s = 0.0;
    for (int i = 0; i < space.dim(); ++i)
      for (int j = 0; j < space.dim(); ++j) s += ginv.at(q, i, j) * du.at(q, i) * dw.at(q, j);
    out.at(q) = s;
  }
  return out;
}

Field map_field(const Field& u, const std::function<double(double)>& fn) {
  Field out = Field::scalar(u.nodes());
  for (std::size_t q = 0; q < u.nodes(); ++q) out.at(q) = fn(u.at(q));
  return out;
}

}  // namespace

SpacetimeFunction heat_op(const SpacetimeFunction& u) {
  SpacetimeFunction r = interior_like(u);
  const Space& space = *u.flow->space();
  for (std::size_t k = 1; k + 1 < u.size(); ++k) {
    HeatCoefficients c = HeatCoefficients::from_slice(u.flow->slice(u.m0 + k), false, false);
    Field d = time_derivative(u, k);
    d -= apply_laplacian(space, c, u.values[k]);
    r.values.push_back(std::move(d));
  }
  return r;
}

SpacetimeFunction conj_heat_op(const SpacetimeFunction& v) {
  SpacetimeFunction r = interior_like(v);
  const Space& space = *v.flow->space();
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    HeatCoefficients c = HeatCoefficients::from_slice(v.flow->slice(v.m0 + k), true, false);
    Field d = time_derivative(v, k);
    d *= -1.0;
    d -= apply_laplacian(space, c, v.values[k]);
    for (std::size_t q = 0; q < d.nodes(); ++q) d.at(q) += c.potential.at(q) * v.values[k].at(q);
    r.values.push_back(std::move(d));
  }
  return r;
}

double duality_residual(const SpacetimeFunction& u, const SpacetimeFunction& v) {
  if (u.m0 != v.m0 || u.size() != v.size() || u.flow != v.flow) throw DomainError("u and v must share a time grid");
  SpacetimeFunction bu = heat_op(u);
  SpacetimeFunction bv = conj_heat_op(v);
  const Space& space = *u.flow->space();
  const double cell = space.cell_volume();
  std::vector<double> I(bu.size()), P(bu.size());
  for (std::size_t k = 0; k < bu.size(); ++k) {
    Field rho = volume_density(u.flow->slice(bu.m0 + k).g);
    const Field& uk = u.values[k + 1];
    const Field& vk = v.values[k + 1];
    std::vector<double> a(uk.nodes()), b(uk.nodes());
    for (std::size_t q = 0; q < uk.nodes(); ++q) {
      a[q] = (bu.values[k].at(q) * vk.at(q) - bv.values[k].at(q) * uk.at(q)) * rho.at(q) * cell;
      b[q] = uk.at(q) * vk.at(q) * rho.at(q) * cell;
    }
    I[k] = pairwise_sum(a);
    P[k] = pairwise_sum(b);
  }
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < I.size(); ++k) integral += 0.5 * (I[k] + I[k + 1]) * (bu.t(k + 1) - bu.t(k));
  return std::abs(integral - (P.back() - P.front()));
}

double profile(ScalarProfile p, double x, int derivative) {
  switch (p) {
    case ScalarProfile::one:
      return derivative == 0 ? 1.0 : 0.0;
    case ScalarProfile::square:
      return derivative == 0 ? x * x : derivative == 1 ? 2.0 * x : 2.0;
    case ScalarProfile::x_log_x:
      if (!(x > 0.0)) throw DomainError("x log x needs positive argument");
      return derivative == 0 ? x * std::log(x) : derivative == 1 ? std::log(x) + 1.0 : 1.0 / x;
    case ScalarProfile::inverse:
      if (!(x > 0.0)) throw DomainError("1/x needs positive argument");
      return derivative == 0 ? 1.0 / x : derivative == 1 ? -1.0 / (x * x) : 2.0 / (x * x * x);
  }
  return 0.0;
}

namespace {

struct NodeQuantities {
  Field ginv;
  Field grad_sq;     // |grad u|^2
  Field hess_sq;     // |nabla nabla u|^2 (Bismut)
  Field hess;        // Bismut Hessian
  Field box;         // box u
  Field grad_dot_grad_box;
};

NodeQuantities node_quantities(const SpacetimeFunction& u, const SpacetimeFunction& box_u, std::size_t k) {
  const Space& space = *u.flow->space();
  GeometrySlice sl = u.flow->slice(u.m0 + k);
  NodeQuantities nq;
  nq.ginv = inverse_metric(sl.g);
  nq.grad_sq = grad_norm_sq(space, u.values[k], nq.ginv);
  nq.hess = hessian(space, u.values[k], bismut_connection(sl));
  nq.hess_sq = norm_squared_2tensor(nq.ginv, nq.hess);
  nq.box = box_u.values[k - 1];
  nq.grad_dot_grad_box = grad_inner(space, u.values[k], nq.box, nq.ginv);
  return nq;
}

// Field time derivative minus Laplacian of an arbitrary spacetime function at node k.
Field box_of(const SpacetimeFunction& w, std::size_t k) {
  const Space& space = *w.flow->space();
  HeatCoefficients c = HeatCoefficients::from_slice(w.flow->slice(w.m0 + k), false, false);
  Field d = time_derivative(w, k);
  d -= apply_laplacian(space, c, w.values[k]);
  return d;
}

SpacetimeFunction pointwise(const SpacetimeFunction& u, const std::function<Field(std::size_t)>& fn) {
  SpacetimeFunction w;
  w.flow = u.flow;
  w.m0 = u.m0;
  for (std::size_t k = 0; k < u.size(); ++k) w.values.push_back(fn(k));
  return w;
}

}  // namespace

SpacetimeFunction bochner_residual_1(const SpacetimeFunction& u) {
  SpacetimeFunction r = interior_like(u);
  SpacetimeFunction bu = heat_op(u);
  const Space& space = *u.flow->space();
  SpacetimeFunction half = pointwise(u, [&](std::size_t k) {
    Field ginv = inverse_metric(u.flow->slice(u.m0 + k).g);
    Field v = grad_norm_sq(space, u.values[k], ginv);
    v *= 0.5;
    return v;
  });
  for (std::size_t k = 1; k + 1 < u.size(); ++k) {
    NodeQuantities nq = node_quantities(u, bu, k);
    Field res = box_of(half, k);
    res += nq.hess_sq;
    res -= nq.grad_dot_grad_box;
    r.values.push_back(std::move(res));
  }
  return r;
}

SpacetimeFunction bochner_residual_2(const SpacetimeFunction& u, ScalarProfile phi) {
  SpacetimeFunction r = interior_like(u);
  SpacetimeFunction bu = heat_op(u);
  const Space& space = *u.flow->space();
  SpacetimeFunction U = pointwise(u, [&](std::size_t k) {
    return map_field(u.values[k], [&](double x) { return profile(phi, x, 0); });
  });
  for (std::size_t k = 1; k + 1 < u.size(); ++k) {
    Field ginv = inverse_metric(u.flow->slice(u.m0 + k).g);
    Field gsq = grad_norm_sq(space, u.values[k], ginv);
    Field res = box_of(U, k);
    const Field& box = bu.values[k - 1];
    for (std::size_t q = 0; q < res.nodes(); ++q) {
      const double x = u.values[k].at(q);
      res.at(q) += -profile(phi, x, 1) * box.at(q) + profile(phi, x, 2) * gsq.at(q);
    }
    r.values.push_back(std::move(res));
  }
  return r;
}

SpacetimeFunction bochner_residual_3(const SpacetimeFunction& u, ScalarProfile psi) {
  SpacetimeFunction r = interior_like(u);
  SpacetimeFunction bu = heat_op(u);
  const Space& space = *u.flow->space();
  const int n = space.dim();
  SpacetimeFunction W = pointwise(u, [&](std::size_t k) {
    Field ginv = inverse_metric(u.flow->slice(u.m0 + k).g);
    Field gsq = grad_norm_sq(space, u.values[k], ginv);
    for (std::size_t q = 0; q < gsq.nodes(); ++q) gsq.at(q) *= profile(psi, u.values[k].at(q), 0);
    return gsq;
  });
  for (std::size_t k = 1; k + 1 < u.size(); ++k) {
    NodeQuantities nq = node_quantities(u, bu, k);
    Field du = differential(space, u.values[k]);
    Field res = box_of(W, k);
    for (std::size_t q = 0; q < res.nodes(); ++q) {
      const double x = u.values[k].at(q);
      const double p0 = profile(psi, x, 0), p1 = profile(psi, x, 1), p2 = profile(psi, x, 2);
      const double V = nq.grad_sq.at(q);
      // Hess(grad u, grad u) with grad u = g^-1 du.
      double hgg = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double gi = 0.0, gj = 0.0;
          for (int a = 0; a < n; ++a) {
            gi += nq.ginv.at(q, i, a) * du.at(q, a);
            gj += nq.ginv.at(q, j, a) * du.at(q, a);
          }
          hgg += nq.hess.at(q, i, j) * gi * gj;
        }
      const double rhs = p0 * (-2.0 * nq.hess_sq.at(q) + 2.0 * nq.grad_dot_grad_box.at(q)) +
                         V * (p1 * nq.box.at(q) - p2 * V) - 4.0 * p1 * hgg;
      res.at(q) -= rhs;
    }
    r.values.push_back(std::move(res));
  }
  return r;
}

double intertwine_check_1(const Field& u0, const FlowSolution& flow, double s, double t, const HeatOptions& opts) {
  const Space& space = *flow.space();
  GeometrySlice ss = flow.slice_at(s);
  Field p0 = grad_norm_sq(space, u0, inverse_metric(ss.g));
  HeatOptions o = opts;
  o.bismut = true;
  HeatSource src = [&](const HeatCoefficients& c, const std::vector<Field>& y, std::vector<Field>& rhs) {
    Field hs = norm_squared_2tensor(c.ginv, hessian(space, y[0], c.bismut));
    rhs[2].axpy(2.0, hs);
  };
  auto st = evolve_heat({u0, p0, Field::scalar(u0.nodes())}, s, {t}, flow, src, o)[0];
  Field ginv = inverse_metric(flow.slice_at(t).g);
  Field lhs = grad_norm_sq(space, st[0], ginv);
  double worst = 0.0;
  for (std::size_t q = 0; q < lhs.nodes(); ++q)
    worst = std::max(worst, std::abs(lhs.at(q) - st[1].at(q) + st[2].at(q)));
  return worst;
}

double intertwine_check_2(const Field& u0, const FlowSolution& flow, double s, double t, double delta,
                          const HeatOptions& opts) {
  for (double v : u0.data())
    if (v < delta) throw DomainError("intertwining check needs u0 >= delta > 0");
  const Space& space = *flow.space();
  const int n = space.dim();
  GeometrySlice ss = flow.slice_at(s);
  Field p0 = grad_norm_sq(space, u0, inverse_metric(ss.g));
  for (std::size_t q = 0; q < p0.nodes(); ++q) p0.at(q) /= u0.at(q);
  HeatOptions o = opts;
  o.bismut = true;
  HeatSource src = [&](const HeatCoefficients& c, const std::vector<Field>& y, std::vector<Field>& rhs) {
    const Field& w = y[0];
    Field hess = hessian(space, w, c.bismut);
    Field dw = differential(space, w);
    for (std::size_t q = 0; q < w.nodes(); ++q) {
      const double iw = 1.0 / w.at(q);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) hess.at(q, i, j) = hess.at(q, i, j) * iw - dw.at(q, i) * dw.at(q, j) * iw * iw;
    }
    Field hs = norm_squared_2tensor(c.ginv, hess);
    for (std::size_t q = 0; q < w.nodes(); ++q) rhs[2].at(q) += 2.0 * w.at(q) * hs.at(q);
  };
  auto st = evolve_heat({u0, p0, Field::scalar(u0.nodes())}, s, {t}, flow, src, o)[0];
  Field ginv = inverse_metric(flow.slice_at(t).g);
  Field lhs = grad_norm_sq(space, st[0], ginv);
  double worst = 0.0;
  for (std::size_t q = 0; q < lhs.nodes(); ++q)
    worst = std::max(worst, std::abs(lhs.at(q) / st[0].at(q) - st[1].at(q) + st[2].at(q)));
  return worst;
}

FunctionalCheck poincare_values(const Field& phi, const KernelMeasure& nu, const FlowSolution& flow) {
  const Space& space = *flow.space();
  FunctionalCheck r;
  r.shift = nu.integrate(phi) / nu.mass;
  Field centered = phi;
  for (double& v : centered.data()) v -= r.shift;
  Field sq = map_field(centered, [](double x) { return x * x; });
  r.lhs = nu.integrate(sq);
  Field gsq = grad_norm_sq(space, phi, inverse_metric(flow.slice_at(nu.s).g));
  r.rhs = 2.0 * (nu.T - nu.s) * nu.integrate(gsq);
  return r;
}

FunctionalCheck logsob_values(const Field& phi, const KernelMeasure& nu, const FlowSolution& flow) {
  const Space& space = *flow.space();
  FunctionalCheck r;
  Field sq = map_field(phi, [](double x) { return x * x; });
  const double norm2 = nu.integrate(sq);
  if (!(norm2 > 0.0)) throw DomainError("log-Sobolev test function vanishes on the kernel support");
  r.shift = std::sqrt(norm2);
  Field ent = map_field(phi, [&](double x) {
    const double y = x * x / norm2;
    return y > 0.0 ? y * std::log(y) : 0.0;
  });
  r.lhs = nu.integrate(ent);
  Field gsq = grad_norm_sq(space, phi, inverse_metric(flow.slice_at(nu.s).g));
  r.rhs = 4.0 * (nu.T - nu.s) * nu.integrate(gsq) / norm2;
  return r;
}

namespace {

VerificationReport kernel_report(const char* id, const FunctionalCheck& fc, const KernelMeasure& nu,
                                 const std::array<double, 3>& x0, double tol) {
  VerificationReport rep;
  rep.id = id;
  rep.inputs["x0"] = x0;
  rep.inputs["s"] = nu.s;
  rep.inputs["T"] = nu.T;
  rep.inputs["kernel_mass"] = nu.mass;
  rep.inputs["clipped_mass"] = nu.clipped_mass;
  rep.lhs = fc.lhs;
  rep.rhs = fc.rhs;
  rep.margin = tol + nu.clipped_mass * std::max(1.0, std::abs(fc.lhs));
  rep.decide();
  return rep;
}

}  // namespace

VerificationReport poincare_check(const Field& phi, const std::array<double, 3>& x0, double s, double T,
                                  const FlowSolution& flow, double tol) {
  KernelMeasure nu = heat_kernel(x0, T, s, flow);
  return kernel_report("poincare", poincare_values(phi, nu, flow), nu, x0, tol);
}

VerificationReport logsob_check(const Field& phi, const std::array<double, 3>& x0, double s, double T,
                                const FlowSolution& flow, double tol) {
  KernelMeasure nu = heat_kernel(x0, T, s, flow);
  return kernel_report("logsob", logsob_values(phi, nu, flow), nu, x0, tol);
}

}  // namespace grflow
