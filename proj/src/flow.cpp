#include "grflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace grflow {

GrfRhs grf_rhs(const GeometrySlice& slice) {
  const Space& space = *slice.space;
  Field H = total_three_form(slice);
  GrfRhs r;
  r.dg = ricci_lc(space, slice.g);
  r.dg *= -2.0;
  r.dg.axpy(0.5, h_squared(H, slice.g));
  r.dg.set_symmetry(Symmetry::symmetric);
  r.db = codifferential_H(space, H, slice.g);
  r.db *= -1.0;
  r.db.set_symmetry(Symmetry::antisymmetric);
  return r;
}

FlowSolution::FlowSolution(SpacePtr space, std::shared_ptr<const Field> H0, std::vector<Node> nodes,
                           std::string family)
    : space_(std::move(space)), H0_(std::move(H0)), nodes_(std::move(nodes)), family_(std::move(family)) {
  if (nodes_.empty()) throw GeometryError("empty flow solution");
  for (std::size_t m = 1; m < nodes_.size(); ++m)
    if (!(nodes_[m].t > nodes_[m - 1].t)) throw GeometryError("flow time grid must be increasing");
}

GeometrySlice FlowSolution::slice(std::size_t m) const {
  GeometrySlice s;
  s.space = space_;
  s.g = nodes_[m].g;
  s.b = nodes_[m].b;
  s.H0 = H0_;
  s.t = nodes_[m].t;
  return s;
}

std::size_t FlowSolution::locate(double t) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(t_end()));
  if (t < t_begin() - tol || t > t_end() + tol) throw GeometryError("time outside the flow interval");
  if (nodes_.size() == 1) return 0;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t, [](double v, const Node& n) { return v < n.t; });
  std::size_t m = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(m, nodes_.size() - 2);
}

void FlowSolution::hermite(double t, Field& g, Field& b, Field* dg, Field* db) const {
  std::size_t m = locate(t);
  if (nodes_.size() == 1) {
    g = nodes_[0].g;
    b = nodes_[0].b;
    if (dg) *dg = nodes_[0].dg;
    if (db) *db = nodes_[0].db;
    return;
  }
  const Node& a = nodes_[m];
  const Node& c = nodes_[m + 1];
  const double h = c.t - a.t;
  const double s = std::clamp((t - a.t) / h, 0.0, 1.0);
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double d00 = (6 * s2 - 6 * s) / h, d10 = 3 * s2 - 4 * s + 1, d01 = (-6 * s2 + 6 * s) / h, d11 = 3 * s2 - 2 * s;
  auto mix = [&](const Field& p0, const Field& m0, const Field& p1, const Field& m1, double w0, double v0, double w1,
                 double v1) {
    Field out(p0.dim(), p0.rank(), p0.nodes(), p0.symmetry());
    auto& o = out.data();
    const auto &x0 = p0.data(), &y0 = m0.data(), &x1 = p1.data(), &y1 = m1.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = w0 * x0[i] + v0 * y0[i] + w1 * x1[i] + v1 * y1[i];
    return out;
  };
  g = mix(a.g, a.dg, c.g, c.dg, h00, h10 * h, h01, h11 * h);
  b = mix(a.b, a.db, c.b, c.db, h00, h10 * h, h01, h11 * h);
  if (dg) *dg = mix(a.g, a.dg, c.g, c.dg, d00, d10, d01, d11);
  if (db) *db = mix(a.b, a.db, c.b, c.db, d00, d10, d01, d11);
}

GeometrySlice FlowSolution::slice_at(double t) const {
  GeometrySlice s;
  s.space = space_;
  s.H0 = H0_;
  s.t = t;
  hermite(t, s.g, s.b, nullptr, nullptr);
  return s;
}

Field FlowSolution::dg_at(double t) const {
  Field g, b, dg;
  hermite(t, g, b, &dg, nullptr);
  return dg;
}

Field FlowSolution::db_at(double t) const {
  Field g, b, db;
  hermite(t, g, b, nullptr, &db);
  return db;
}

Field FlowSolution::defect(std::size_t m) const {
  Field d = bismut_ricci(slice(m)).full;
  d.axpy(0.5, nodes_[m].dg);
  d.axpy(-0.5, nodes_[m].db);
  return d;
}

Field FlowSolution::defect_at(double t) const {
  GeometrySlice s;
  s.space = space_;
  s.H0 = H0_;
  s.t = t;
  Field dg, db;
  hermite(t, s.g, s.b, &dg, &db);
  Field d = bismut_ricci(s).full;
  d.axpy(0.5, dg);
  d.axpy(-0.5, db);
  return d;
}

namespace {

GeometrySlice shifted(const GeometrySlice& base, const GrfRhs& k, double a, double t) {
  GeometrySlice s;
  s.space = base.space;
  s.H0 = base.H0;
  s.t = t;
  s.g = base.g;
  s.g.axpy(a, k.dg);
  s.b = base.b;
  s.b.axpy(a, k.db);
  if (min_eigenvalue(s.g) <= 0.0) throw FlowBreakdown("metric lost positive definiteness", t);
  return s;
}

}  // namespace

FlowSolution run_flow(const GeometrySlice& initial, const FlowOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.T > 0.0)) throw GeometryError("flow needs positive T and dt");
  initial.validate();
  const Space& space = *initial.space;
  if (space.is_grid()) {
    const PeriodicGrid& grid = space.grid();
    double hmin = grid.h(0);
    for (int a = 1; a < grid.dim; ++a) hmin = std::min(hmin, grid.h(a));
    double gmax = 0.0;
    Field ginv = inverse_metric(initial.g);
    for (std::size_t node = 0; node < ginv.nodes(); ++node)
      for (int a = 0; a < grid.dim; ++a) gmax = std::max(gmax, ginv.at(node, a, a));
    // Explicit stability heuristic for the parabolic part of the flow.
    if (opts.dt > 0.25 * hmin * hmin / std::max(gmax, 1e-300) && initial.g.max_abs() > 0.0) {
      double spread = 0.0;
      for (std::size_t c = 0; c < initial.g.components(); ++c) {
        const double* v = initial.g.component(c);
        auto mm = std::minmax_element(v, v + initial.g.nodes());
        spread = std::max(spread, *mm.second - *mm.first);
      }
      if (spread > 0.0 || initial.b.max_abs() > 0.0)
        std::cerr << "warning: flow step exceeds the explicit stability heuristic\n";
    }
  }
  const int nsteps = static_cast<int>(std::llround(opts.T / opts.dt));
  const double dt = opts.T / nsteps;
  const double cap = opts.blowup_factor * std::max(initial.g.max_abs(), 1e-300);

  std::vector<FlowSolution::Node> nodes;
  GeometrySlice cur = initial;
  GrfRhs k1 = grf_rhs(cur);
  nodes.push_back({cur.t, cur.g, cur.b, k1.dg, k1.db});
  for (int step = 0; step < nsteps; ++step) {
    const double t = cur.t;
    GrfRhs k2 = grf_rhs(shifted(cur, k1, 0.5 * dt, t + 0.5 * dt));
    GrfRhs k3 = grf_rhs(shifted(cur, k2, 0.5 * dt, t + 0.5 * dt));
    GrfRhs k4 = grf_rhs(shifted(cur, k3, dt, t + dt));
    GeometrySlice next;
    next.space = cur.space;
    next.H0 = cur.H0;
    next.t = initial.t + (step + 1) * dt;
    next.g = cur.g;
    next.b = cur.b;
    auto& g = next.g.data();
    auto& b = next.b.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += dt / 6.0 * (k1.dg.data()[i] + 2 * k2.dg.data()[i] + 2 * k3.dg.data()[i] + k4.dg.data()[i]);
    for (std::size_t i = 0; i < b.size(); ++i)
      b[i] += dt / 6.0 * (k1.db.data()[i] + 2 * k2.db.data()[i] + 2 * k3.db.data()[i] + k4.db.data()[i]);
    if (min_eigenvalue(next.g) <= 0.0) throw FlowBreakdown("metric lost positive definiteness", next.t);
    if (next.g.max_abs() > cap || !std::isfinite(next.g.max_abs())) throw FlowBreakdown("metric blow-up", next.t);
    cur = std::move(next);
    k1 = grf_rhs(cur);
    if ((step + 1) % opts.output_every == 0 || step + 1 == nsteps)
      nodes.push_back({cur.t, cur.g, cur.b, k1.dg, k1.db});
  }
  FlowSolution sol(initial.space, initial.H0, std::move(nodes), "grf");
  sol.step = dt;
  sol.steps = nsteps;
  return sol;
}

FlowSolution static_family(const GeometrySlice& slice, double T, int intervals) {
  std::vector<FlowSolution::Node> nodes;
  Field zg(slice.dim(), 2, slice.nodes(), Symmetry::symmetric);
  Field zb(slice.dim(), 2, slice.nodes(), Symmetry::antisymmetric);
  for (int m = 0; m <= intervals; ++m)
    nodes.push_back({slice.t + T * m / intervals, slice.g, slice.b, zg, zb});
  FlowSolution sol(slice.space, slice.H0, std::move(nodes), "static");
  sol.integrator = "none";
  sol.step = T / intervals;
  sol.steps = intervals;
  return sol;
}

FlowSolution perturb_family(const FlowSolution& sol, double eps, PerturbMode mode, const Field* beta) {
  if (mode == PerturbMode::b_drift) {
    if (!beta) throw GeometryError("b-drift needs a 2-form");
    if (exterior_derivative(*sol.space(), *beta).max_abs() > 1e-9) throw GeometryError("b-drift 2-form is not closed");
  }
  std::vector<FlowSolution::Node> nodes;
  for (std::size_t m = 0; m < sol.size(); ++m) {
    FlowSolution::Node n = sol.node(m);
    if (mode == PerturbMode::conformal_drift) {
      const double f = 1.0 + eps * n.t;
      Field dg = n.dg;
      dg *= f;
      dg.axpy(eps, n.g);
      n.g *= f;
      n.dg = std::move(dg);
    } else {
      n.b.axpy(eps * n.t, *beta);
      n.db.axpy(eps, *beta);
    }
    nodes.push_back(std::move(n));
  }
  std::string tag = mode == PerturbMode::conformal_drift ? "conformal-drift" : "b-drift";
  FlowSolution out(sol.space(), sol.H0(), std::move(nodes), sol.family() + "+" + tag);
  out.integrator = sol.integrator;
  out.step = sol.step;
  out.steps = sol.steps;
  return out;
}

double flow_residual(const FlowSolution& sol, std::size_t m) {
  if (m == 0 || m + 1 >= sol.size()) throw GeometryError("flow residual needs an interior node");
  const auto& a = sol.node(m - 1);
  const auto& c = sol.node(m + 1);
  const double h = c.t - a.t;
  Field rc = bismut_ricci(sol.slice(m)).full;
  double worst = 0.0;
  for (std::size_t i = 0; i < rc.data().size(); ++i) {
    double d = ((c.g.data()[i] - c.b.data()[i]) - (a.g.data()[i] - a.b.data()[i])) / h;
    worst = std::max(worst, std::abs(d + 2.0 * rc.data()[i]));
  }
  return worst;
}

}  // namespace grflow
