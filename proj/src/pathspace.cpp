#include "grflow/pathspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace grflow {

namespace {

std::size_t grid_index(double tau, double dtau, int K) {
  const double q = tau / dtau;
  const long idx = std::lround(q);
  if (std::abs(q - idx) > 1e-9 * std::max(1.0, q) || idx < 0 || idx > K)
    throw ConfigError("partition time is not on the path grid");
  return static_cast<std::size_t>(idx);
}

bool at_least(double a, double b, double scale) { return a >= b - 1e-12 * std::max(1.0, scale); }

}  // namespace

CylinderFunction::CylinderFunction(std::vector<double> times, std::vector<CylinderTerm> terms,
                                   const PeriodicGrid& grid)
    : times_(std::move(times)), grid_(grid) {
  if (times_.empty()) throw ConfigError("cylinder function needs at least one partition time");
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (times_[j] < 0.0) throw ConfigError("partition times must be nonnegative");
    if (j > 0 && times_[j] <= times_[j - 1]) throw ConfigError("partition times must increase");
  }
  for (auto& t : terms) {
    if (t.factors.size() != times_.size()) throw ConfigError("cylinder term needs one factor per partition time");
    coef_.push_back(t.coef);
    std::vector<Field> s;
    std::vector<TrigInterpolant> ip;
    for (const auto& fn : t.factors) {
      s.push_back(sample_field(grid_, fn));
      ip.emplace_back(grid_, s.back());
    }
    fns_.push_back(std::move(t.factors));
    samples_.push_back(std::move(s));
    interp_.push_back(std::move(ip));
  }
}

CylinderFunction CylinderFunction::constant(double c, double tau, const PeriodicGrid& grid) {
  CylinderTerm t;
  t.coef = c;
  t.factors = {[](const std::array<double, 3>&) { return 1.0; }};
  return CylinderFunction({tau}, {t}, grid);
}

double CylinderFunction::value(const PathPoints& x) const {
  double s = 0.0;
  for (std::size_t r = 0; r < terms(); ++r) {
    double p = coef_[r];
    for (std::size_t j = 0; j < order(); ++j) p *= interp_[r][j].value(x[j]);
    s += p;
  }
  return s;
}

SmallVec CylinderFunction::partial(std::size_t j, const PathPoints& x) const {
  SmallVec out = SmallVec::Zero(grid_.dim);
  for (std::size_t r = 0; r < terms(); ++r) {
    double p = coef_[r];
    SmallVec g;
    for (std::size_t i = 0; i < order(); ++i) {
      if (i == j) {
        double v;
        interp_[r][i].jet(x[i], v, &g, nullptr);
      } else {
        p *= interp_[r][i].value(x[i]);
      }
    }
    out += p * g;
  }
  return out;
}

SmallMat CylinderFunction::mixed(std::size_t i, std::size_t j, const PathPoints& x) const {
  const int n = grid_.dim;
  SmallMat out = SmallMat::Zero(n, n);
  for (std::size_t r = 0; r < terms(); ++r) {
    double p = coef_[r];
    SmallVec gi, gj;
    SmallMat h;
    for (std::size_t a = 0; a < order(); ++a) {
      double v;
      if (a == i && a == j) {
        interp_[r][a].jet(x[a], v, nullptr, &h);
      } else if (a == i) {
        interp_[r][a].jet(x[a], v, &gi, nullptr);
      } else if (a == j) {
        interp_[r][a].jet(x[a], v, &gj, nullptr);
      } else {
        p *= interp_[r][a].value(x[a]);
      }
    }
    out += i == j ? SmallMat(p * h) : SmallMat(p * gi * gj.transpose());
  }
  return out;
}

CylinderFunction CylinderFunction::square() const {
  std::vector<CylinderTerm> terms2;
  for (std::size_t r = 0; r < terms(); ++r)
    for (std::size_t s = 0; s < terms(); ++s) {
      CylinderTerm t;
      t.coef = coef_[r] * coef_[s];
      for (std::size_t j = 0; j < order(); ++j) {
        ScalarFn a = fns_[r][j], b = fns_[s][j];
        t.factors.push_back([a, b](const std::array<double, 3>& x) { return a(x) * b(x); });
      }
      terms2.push_back(std::move(t));
    }
  return CylinderFunction(times_, std::move(terms2), grid_);
}

CylinderFunction CylinderFunction::shifted(double c) const {
  std::vector<CylinderTerm> t;
  for (std::size_t r = 0; r < terms(); ++r) t.push_back({coef_[r], fns_[r]});
  CylinderTerm k;
  k.coef = c;
  k.factors.assign(order(), [](const std::array<double, 3>&) { return 1.0; });
  t.push_back(std::move(k));
  return CylinderFunction(times_, std::move(t), grid_);
}

double CylinderFunction::self_check(const PathPoints& x, double h) const {
  const int n = grid_.dim;
  double err = 0.0, scale = 1e-300;
  for (std::size_t j = 0; j < order(); ++j) {
    SmallVec d = partial(j, x);
    for (std::size_t i = 0; i < order(); ++i) {
      SmallMat m = mixed(i, j, x);
      for (int a = 0; a < n; ++a) {
        PathPoints xp = x, xm = x;
        xp[i][a] += h;
        xm[i][a] -= h;
        SmallVec fd = (partial(j, xp) - partial(j, xm)) / (2 * h);
        err = std::max(err, (fd - m.row(a).transpose()).cwiseAbs().maxCoeff());
        scale = std::max(scale, m.cwiseAbs().maxCoeff());
      }
    }
    for (int a = 0; a < n; ++a) {
      PathPoints xp = x, xm = x;
      xp[j][a] += h;
      xm[j][a] -= h;
      err = std::max(err, std::abs((value(xp) - value(xm)) / (2 * h) - d[a]));
    }
    scale = std::max(scale, d.cwiseAbs().maxCoeff());
  }
  return err / scale;
}

MartingaleField::MartingaleField(const CylinderFunction& F, const FlowSolution& flow, const PathConfig& cfg,
                                 const HeatOptions& opts)
    : F_(F), K_(cfg.K), dtau_(cfg.dtau(flow)), T_prime_(cfg.T_prime) {
  cfg.validate(flow);
  const PeriodicGrid& grid = flow.space()->grid();
  if (grid.dim != F.grid().dim || grid.n != F.grid().n || grid.L != F.grid().L)
    throw ConfigError("cylinder function and flow use different grids");
  const std::size_t k = F.order();
  for (std::size_t j = 0; j < k; ++j) slot_index_.push_back(grid_index(F.times()[j], dtau_, K_));

  psi_.assign(F.terms(), std::vector<TrigInterpolant>(K_ + 1));
  for (std::size_t r = 0; r < F.terms(); ++r) {
    Field next;
    for (std::size_t jj = k; jj-- > 0;) {
      Field G = F.sample(r, jj);
      if (jj + 1 < k) {
        double* g = G.component(0);
        const double* nx = next.component(0);
        for (std::size_t i = 0; i < G.nodes(); ++i) g[i] *= nx[i];
      }
      const std::size_t hi = slot_index_[jj];
      const std::size_t lo = jj == 0 ? 0 : slot_index_[jj - 1];
      if (lo >= hi) break;
      std::vector<double> times;
      for (std::size_t m = hi; m-- > lo;) times.push_back(T_prime_ - m * dtau_);
      std::vector<Field> snaps = heat_flow_snapshots(G, T_prime_ - hi * dtau_, times, flow, opts);
      for (std::size_t q = 0; q < snaps.size(); ++q) psi_[r][hi - 1 - q] = TrigInterpolant(grid, snaps[q]);
      next = std::move(snaps.back());
    }
  }
}

std::size_t MartingaleField::fixed(std::size_t m) const {
  return static_cast<std::size_t>(std::upper_bound(slot_index_.begin(), slot_index_.end(), m) - slot_index_.begin());
}

double MartingaleField::start_value(const std::array<double, 3>& x) const {
  const std::size_t nf = fixed(0);
  double s = 0.0;
  for (std::size_t r = 0; r < F_.terms(); ++r) {
    double p = F_.coef(r);
    for (std::size_t j = 0; j < nf; ++j) p *= F_.factor(r, j).value(x);
    if (has_last(0)) p *= psi_[r][0].value(x);
    s += p;
  }
  return s;
}

MartingalePath::MartingalePath(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler* geo)
    : mf_(mf), path_(path), geo_(geo) {
  if (static_cast<int>(path.steps()) != mf.steps()) throw ConfigError("path and martingale grids differ");
  const CylinderFunction& F = mf.cylinder();
  fixed_.resize(F.terms());
  for (std::size_t r = 0; r < F.terms(); ++r)
    for (std::size_t j = 0; j < F.order(); ++j) fixed_[r].push_back(jet(F.factor(r, j), mf.slot_index(j), geo != nullptr));
}

MartingalePath::Jet MartingalePath::jet(const TrigInterpolant& ip, std::size_t m, bool hessian) const {
  Jet J;
  ip.jet(path_.x[m], J.v, &J.g, hessian ? &J.h : nullptr);
  return J;
}

MartingaleState MartingalePath::assemble(std::size_t m, std::size_t nfixed, bool with_last, bool hessian) const {
  if (hessian && !geo_) throw ConfigError("Hessians along paths need the geometry sampler");
  const CylinderFunction& F = mf_.cylinder();
  const int n = path_.dim;
  const std::size_t ns = nfixed + (with_last ? 1 : 0);
  std::vector<std::size_t> idx(ns);
  for (std::size_t a = 0; a < nfixed; ++a) idx[a] = mf_.slot_index(a);
  if (with_last) idx[nfixed] = m;

  MartingaleState s;
  s.has_last = with_last;
  s.time = mf_.tau(m);
  s.slot_tau.resize(ns);
  for (std::size_t a = 0; a < ns; ++a) s.slot_tau[a] = mf_.tau(idx[a]);
  std::vector<SmallVec> d(ns, SmallVec::Zero(n));
  std::vector<std::vector<SmallMat>> dd;
  if (hessian) dd.assign(ns, std::vector<SmallMat>(ns, SmallMat::Zero(n, n)));

  std::vector<Jet> J(ns);
  for (std::size_t r = 0; r < F.terms(); ++r) {
    for (std::size_t a = 0; a < nfixed; ++a) J[a] = fixed_[r][a];
    if (with_last) J[nfixed] = jet(mf_.last(r, m), m, hessian);
    auto prod_except = [&](std::size_t a, std::size_t b) {
      double p = F.coef(r);
      for (std::size_t c = 0; c < ns; ++c)
        if (c != a && c != b) p *= J[c].v;
      return p;
    };
    s.value += prod_except(ns, ns);
    for (std::size_t a = 0; a < ns; ++a) {
      d[a] += prod_except(a, ns) * J[a].g;
      if (!hessian) continue;
      dd[a][a] += prod_except(a, ns) * J[a].h;
      for (std::size_t b = 0; b < ns; ++b)
        if (b != a) dd[a][b] += prod_except(a, b) * J[a].g * J[b].g.transpose();
    }
  }

  s.grad.resize(ns);
  for (std::size_t a = 0; a < ns; ++a) s.grad[a] = path_.e[idx[a]].transpose() * d[a];
  if (hessian) {
    s.hess.assign(ns, std::vector<SmallMat>(ns));
    for (std::size_t a = 0; a < ns; ++a) {
      PointGeometry pg = geo_->at(path_.x[idx[a]], mf_.T_prime() - mf_.tau(idx[a]));
      for (int sdx = 0; sdx < n; ++sdx)
        for (int rdx = 0; rdx < n; ++rdx)
          for (int kdx = 0; kdx < n; ++kdx) dd[a][a](sdx, rdx) -= pg.G(kdx, sdx, rdx) * d[a][kdx];
      for (std::size_t b = 0; b < ns; ++b) s.hess[a][b] = path_.e[idx[a]].transpose() * dd[a][b] * path_.e[idx[b]];
    }
  }
  return s;
}

MartingaleState MartingalePath::state(std::size_t m, bool hessian) const {
  const std::size_t nf = mf_.fixed(m);
  return assemble(m, nf, nf < mf_.cylinder().order(), hessian);
}

MartingaleState MartingalePath::terminal(bool hessian) const {
  return assemble(path_.steps(), mf_.cylinder().order(), false, hessian);
}

SmallVec parallel_gradient(const MartingaleState& s, double sigma, Limit limit) {
  const int n = s.grad.empty() ? 1 : static_cast<int>(s.grad[0].size());
  SmallVec out = SmallVec::Zero(n);
  if (s.slot_tau.empty()) return out;
  for (std::size_t a = 0; a < s.grad.size(); ++a)
    if (at_least(s.slot_tau[a], sigma, sigma)) out += s.grad[a];
  if (limit == Limit::left) {
    // The left limit at tau = sigma drops contributions that appear at sigma.
    for (std::size_t a = 0; a < s.grad.size(); ++a)
      if (std::abs(s.slot_tau[a] - sigma) <= 1e-12 * std::max(1.0, sigma)) out -= s.grad[a];
  }
  return out;
}

SmallMat hessian_parallel(const MartingaleState& s, double tau, double sigma) {
  const int n = s.grad.empty() ? 1 : static_cast<int>(s.grad[0].size());
  SmallMat out = SmallMat::Zero(n, n);
  if (s.hess.empty() && !s.grad.empty()) throw ConfigError("state was evaluated without Hessians");
  for (std::size_t a = 0; a < s.hess.size(); ++a) {
    if (!at_least(s.slot_tau[a], tau, tau)) continue;
    for (std::size_t b = 0; b < s.hess.size(); ++b)
      if (at_least(s.slot_tau[b], sigma, sigma)) out += s.hess[a][b];
  }
  return out;
}

namespace {

// Slots that carry the tau direction at the state's time.
std::vector<std::size_t> tau_slots(const MartingaleState& s, Limit side) {
  std::vector<std::size_t> out;
  const std::size_t ns = s.slot_tau.size();
  if (ns == 0) return out;
  if (side == Limit::right) {
    if (s.has_last) out.push_back(ns - 1);
    return out;
  }
  const double t = s.time;
  for (std::size_t a = 0; a < ns; ++a)
    if (std::abs(s.slot_tau[a] - t) <= 1e-12 * std::max(1.0, t)) out.push_back(a);
  return out;
}

}  // namespace

SmallVec tau_gradient(const MartingaleState& s, Limit side) {
  const int n = s.grad.empty() ? 1 : static_cast<int>(s.grad[0].size());
  SmallVec out = SmallVec::Zero(n);
  for (std::size_t a : tau_slots(s, side)) out += s.grad[a];
  return out;
}

SmallMat tau_hessian(const MartingaleState& s, double sigma, Limit side) {
  const int n = s.grad.empty() ? 1 : static_cast<int>(s.grad[0].size());
  SmallMat out = SmallMat::Zero(n, n);
  if (s.hess.empty() && !s.grad.empty()) throw ConfigError("state was evaluated without Hessians");
  for (std::size_t a : tau_slots(s, side))
    for (std::size_t b = 0; b < s.hess.size(); ++b)
      if (at_least(s.slot_tau[b], sigma, sigma)) out += s.hess[a][b];
  return out;
}

SmallMat log_hessian(const MartingaleState& s, double tau, double sigma) {
  if (!(s.value > 0.0)) throw DomainError("log Hessian needs a positive functional");
  SmallVec gt = parallel_gradient(s, tau), gs = parallel_gradient(s, sigma);
  return hessian_parallel(s, tau, sigma) / s.value - gt * gs.transpose() / (s.value * s.value);
}

namespace {

// Moves every slot point with time >= tau along e_a w and transports its
// frame parallel to first order; returns the perturbed path.
BrownianPath perturbed_path(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo,
                            std::size_t m, double tau, const SmallVec& w, double eps) {
  BrownianPath q = path;
  const int n = path.dim;
  std::vector<std::size_t> idx;
  const std::size_t nf = mf.fixed(m);
  for (std::size_t j = 0; j < nf; ++j) idx.push_back(mf.slot_index(j));
  if (nf < mf.cylinder().order()) idx.push_back(m);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (std::size_t i : idx) {
    if (!at_least(mf.tau(i), tau, tau)) continue;
    PointGeometry pg = geo.at(path.x[i], mf.T_prime() - mf.tau(i));
    const SmallMat& e = path.e[i];
    SmallVec dir = e * w;
    SmallMat de = SmallMat::Zero(n, n);
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) de(k, c) -= pg.G(k, a, b) * dir[a] * e(b, c);
    for (int a = 0; a < n; ++a) q.x[i][a] += eps * dir[a];
    q.e[i] = e + eps * de;
  }
  return q;
}

template <class Fn>
double identity_error(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo, std::size_t m,
                      double tau, double h, Fn&& fn) {
  // fn(state) -> (scalar, analytic derivative vector along tau)
  const int n = path.dim;
  MartingalePath mp(mf, path, &geo);
  auto [v0, deriv] = fn(mp.state(m, true));
  (void)v0;
  double err = 0.0, scale = 1e-300;
  for (int c = 0; c < n; ++c) {
    SmallVec w = SmallVec::Zero(n);
    w[c] = 1.0;
    BrownianPath pp = perturbed_path(mf, path, geo, m, tau, w, h);
    BrownianPath pm = perturbed_path(mf, path, geo, m, tau, w, -h);
    MartingalePath a(mf, pp, &geo), b(mf, pm, &geo);
    const double fd = (fn(a.state(m, true)).first - fn(b.state(m, true)).first) / (2 * h);
    err = std::max(err, std::abs(fd - deriv[c]));
    scale = std::max(scale, std::abs(deriv[c]));
  }
  return err / scale;
}

}  // namespace

double hessian_identity_error(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo,
                              std::size_t m, double tau, double sigma, double h) {
  return identity_error(mf, path, geo, m, tau, h, [&](const MartingaleState& s) {
    SmallVec g = parallel_gradient(s, sigma);
    return std::make_pair(g.squaredNorm(), SmallVec(2.0 * hessian_parallel(s, tau, sigma) * g));
  });
}

double log_hessian_identity_error(const MartingaleField& mf, const BrownianPath& path, const GeometrySampler& geo,
                                  std::size_t m, double tau, double sigma, double h) {
  // d_tau of (nabla_sigma log F)_c = (F^-1 nabla_sigma F)_c, checked component by component.
  double worst = 0.0;
  const int n = path.dim;
  for (int c = 0; c < n; ++c)
    worst = std::max(worst, identity_error(mf, path, geo, m, tau, h, [&](const MartingaleState& s) {
      SmallVec g = parallel_gradient(s, sigma) / s.value;
      return std::make_pair(g[c], SmallVec(log_hessian(s, tau, sigma).col(c)));
    }));
  return worst;
}

MartingaleStats martingale_rep_residual(const MartingaleField& mf, const PathConfig& cfg, const GeometrySampler& geo) {
  const std::size_t N = cfg.N;
  const int K = mf.steps();
  std::vector<double> r2(N), qs(N), qb(N), qg(N), is(N), ib(N), ig(N);
  std::vector<std::vector<double>> vals(K + 1, std::vector<double>(N));
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    MartingalePath mp(mf, p);
    double prev = 0.0, first = 0.0, ito = 0.0, sum_dF2 = 0.0, left = 0.0, trap = 0.0;
    const double c = kBrownianVariance * mf.dtau();
    for (int m = 0; m <= K; ++m) {
      MartingaleState s = mp.state(m);
      vals[m][i] = s.value;
      if (m == 0) first = s.value;
      if (m > 0) {
        sum_dF2 += (s.value - prev) * (s.value - prev);
        trap += 0.5 * c * tau_gradient(s, Limit::left).squaredNorm();
      }
      prev = s.value;
      if (m < K) {
        SmallVec a = tau_gradient(s, Limit::right);
        ito += a.dot(p.dW[m]);
        left += c * a.squaredNorm();
        trap += 0.5 * c * a.squaredNorm();
      }
    }
    const double res = prev - first - ito;
    r2[i] = res * res;
    qs[i] = sum_dF2;
    qb[i] = trap;
    qg[i] = sum_dF2 - trap;
    is[i] = ito * ito;
    ib[i] = left;
    ig[i] = ito * ito - left;
  });
  MartingaleStats st;
  Estimate m2 = mean_stderr(r2);
  st.residual_rms.mean = std::sqrt(m2.mean);
  st.residual_rms.stderr_ = m2.mean > 0.0 ? m2.stderr_ / (2.0 * std::sqrt(m2.mean)) : 0.0;
  st.qv_sum = mean_stderr(qs);
  st.qv_bracket = mean_stderr(qb);
  st.qv_gap = mean_stderr(qg);
  st.ito_square = mean_stderr(is);
  st.ito_bracket = mean_stderr(ib);
  st.ito_gap = mean_stderr(ig);
  for (const auto& v : vals) st.mean.push_back(mean_stderr(v));
  return st;
}

std::vector<double> martingale_rep_paths(const MartingaleField& mf, const PathConfig& cfg, const GeometrySampler& geo) {
  std::vector<double> out(cfg.N);
  const int K = mf.steps();
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    MartingalePath mp(mf, p);
    double ito = 0.0, first = 0.0, last = 0.0;
    for (int m = 0; m <= K; ++m) {
      MartingaleState s = mp.state(m);
      if (m == 0) first = s.value;
      last = s.value;
      if (m < K) ito += tau_gradient(s, Limit::right).dot(p.dW[m]);
    }
    out[i] = last - first - ito;
  });
  return out;
}

HPath HPath::from_function(const std::function<SmallVec(double)>& fn, int K, double dtau) {
  HPath h;
  h.dtau = dtau;
  for (int m = 0; m <= K; ++m) h.h.push_back(fn(m * dtau));
  h.h[0].setZero();
  for (int m = 0; m < K; ++m) h.hdot.push_back((h.h[m + 1] - h.h[m]) / dtau);
  return h;
}

HPath HPath::ramp(const SmallVec& v, int K, double dtau) {
  return from_function([v](double t) { return SmallVec(t * v); }, K, dtau);
}

HPath HPath::zero(int dim, int K, double dtau) {
  return from_function([dim](double) { return SmallVec(SmallVec::Zero(dim)); }, K, dtau);
}

double HPath::energy() const {
  double e = 0.0;
  for (const auto& d : hdot) e += d.squaredNorm() * dtau;
  return e;
}

std::size_t path_index(const BrownianPath& path, double tau) {
  return grid_index(tau, path.tau.at(1) - path.tau.at(0), static_cast<int>(path.steps()));
}

double dv_derivative(const CylinderFunction& F, const BrownianPath& path, const HPath& h) {
  PathPoints x;
  std::vector<std::size_t> idx;
  for (double t : F.times()) {
    idx.push_back(path_index(path, t));
    x.push_back(path.x[idx.back()]);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < F.order(); ++j) s += h.h.at(idx[j]).dot(path.e[idx[j]].transpose() * F.partial(j, x));
  return s;
}

double dv_star_weight(const BrownianPath& path, const HPath& h, const GeometrySampler& geo, double T_prime) {
  double s = 0.0;
  for (std::size_t m = 0; m < path.steps(); ++m) {
    PointGeometry pg = geo.at(path.x[m], T_prime - path.tau[m]);
    const SmallMat& e = path.e[m];
    SmallMat M = e.inverse() * defect_endomorphism(pg) * e;
    s += (h.hdot.at(m) - M.transpose() * h.h.at(m)).dot(path.dW[m]);
  }
  return 0.5 * s;
}

double dv_star(const CylinderFunction& G, const BrownianPath& path, const HPath& h, const GeometrySampler& geo,
               double T_prime) {
  PathPoints x;
  for (double t : G.times()) x.push_back(path.x[path_index(path, t)]);
  return -dv_derivative(G, path, h) + G.value(x) * dv_star_weight(path, h, geo, T_prime);
}

std::vector<VerificationReport> ibp_residual(const std::vector<IbpTriple>& triples, const PathConfig& cfg,
                                             const FlowSolution& flow) {
  cfg.validate(flow);
  GeometrySampler geo = path_sampler(cfg, flow);
  const std::size_t T = triples.size();
  std::vector<std::vector<double>> diff(T, std::vector<double>(cfg.N)), lhs(T, std::vector<double>(cfg.N)),
      rhs(T, std::vector<double>(cfg.N));
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    std::map<const HPath*, double> weight;
    for (std::size_t t = 0; t < T; ++t) {
      const IbpTriple& tr = triples[t];
      if (!weight.count(tr.h)) weight[tr.h] = dv_star_weight(p, *tr.h, geo, cfg.T_prime);
      PathPoints xf, xg;
      for (double s : tr.F->times()) xf.push_back(p.x[path_index(p, s)]);
      for (double s : tr.G->times()) xg.push_back(p.x[path_index(p, s)]);
      const double Fv = tr.F->value(xf), Gv = tr.G->value(xg);
      const double a = dv_derivative(*tr.F, p, *tr.h) * Gv;
      const double b = Fv * (-dv_derivative(*tr.G, p, *tr.h) + Gv * weight[tr.h]);
      lhs[t][i] = a;
      rhs[t][i] = b;
      diff[t][i] = a - b;
    }
  });
  std::vector<VerificationReport> out;
  for (std::size_t t = 0; t < T; ++t) {
    VerificationReport r;
    r.id = "ibp/" + triples[t].label;
    r.inputs["family"] = flow.family();
    r.inputs["T_prime"] = cfg.T_prime;
    r.inputs["K"] = cfg.K;
    r.inputs["N"] = cfg.N;
    r.inputs["F_order"] = triples[t].F->order();
    r.inputs["G_order"] = triples[t].G->order();
    r.inputs["h_energy"] = triples[t].h->energy();
    Estimate d = mean_stderr(diff[t]);
    Estimate a = mean_stderr(lhs[t]), b = mean_stderr(rhs[t]);
    r.lhs = std::abs(d.mean);
    r.lhs_se = d.stderr_;
    r.rhs = 0.0;
    r.seeds = {cfg.seed};
    r.note = "paired |E[DvF G] - E[F Dv*G]|; E[DvF G] = " + std::to_string(a.mean) + ", E[F Dv*G] = " +
             std::to_string(b.mean);
    r.decide();
    out.push_back(std::move(r));
  }
  return out;
}

double malliavin_norm(const CylinderFunction& F, const BrownianPath& path, double a, double b) {
  if (b < 0.0) b = path.tau.back();
  PathPoints x;
  std::vector<std::size_t> idx;
  for (double t : F.times()) {
    idx.push_back(path_index(path, t));
    x.push_back(path.x[idx.back()]);
  }
  const std::size_t k = F.order();
  std::vector<SmallVec> g(k);
  for (std::size_t j = 0; j < k; ++j) g[j] = path.e[idx[j]].transpose() * F.partial(j, x);
  double s = 0.0, lo = 0.0;
  SmallVec tail = SmallVec::Zero(path.dim);
  for (std::size_t j = 0; j < k; ++j) tail += g[j];
  for (std::size_t j = 0; j < k; ++j) {
    const double hi = F.times()[j];
    const double len = std::max(0.0, std::min(hi, b) - std::max(lo, a));
    s += tail.squaredNorm() * len;
    tail -= g[j];
    lo = hi;
  }
  return s;
}

Estimate ou_quadratic_form(const CylinderFunction& F, double tau1, double tau2, const PathConfig& cfg,
                           const FlowSolution& flow) {
  cfg.validate(flow);
  if (tau2 < tau1) throw ConfigError("OU window must satisfy tau1 <= tau2");
  GeometrySampler geo = path_sampler(cfg, flow);
  std::vector<double> v(cfg.N);
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) { v[i] = malliavin_norm(F, p, tau1, tau2); });
  return mean_stderr(v);
}

}  // namespace grflow
