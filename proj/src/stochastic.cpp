#include "grflow/stochastic.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace grflow {

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

double keyed_normal(std::uint64_t seed, std::uint64_t path, std::uint32_t level, std::uint32_t index,
                    std::uint32_t comp) {
  PhiloxCounter ctr{static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32) ^ (comp << 24), level,
                    index};
  PhiloxKey key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  PhiloxCounter w = philox4x32(ctr, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::MatrixXd brownian_values(std::uint64_t seed, std::uint64_t path, int dim, int K, double horizon) {
  if (K < 1 || (K & (K - 1)) != 0) throw ConfigError("step count must be a power of two");
  const double dtau = horizon / K;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(K + 1, dim);
  for (int c = 0; c < dim; ++c) {
    W(K, c) = std::sqrt(kBrownianVariance * horizon) * keyed_normal(seed, path, 0, 0, c);
    int len = K;
    for (std::uint32_t level = 1; len > 1; ++level, len /= 2) {
      const int half = len / 2;
      const double sd = std::sqrt(kBrownianVariance * len * dtau / 4.0);
      for (int j = 0; j * len < K; ++j) {
        const int a = j * len;
        W(a + half, c) = 0.5 * (W(a, c) + W(a + len, c)) + sd * keyed_normal(seed, path, level, j, c);
      }
    }
  }
  return W;
}

double PathConfig::span(const FlowSolution& flow) const {
  return horizon > 0.0 ? horizon : T_prime - flow.t_begin();
}

void PathConfig::validate(const FlowSolution& flow) const {
  if (K < 16) throw ConfigError("path step count must be at least 16");
  if (K & (K - 1)) throw ConfigError("path step count must be a power of two");
  const double tol = 1e-12 * std::max(1.0, std::abs(flow.t_end()));
  if (T_prime > flow.t_end() + tol || T_prime - span(flow) < flow.t_begin() - tol || span(flow) <= 0.0)
    throw ConfigError("path time range is not covered by the flow");
}

GeometrySampler path_sampler(const PathConfig& cfg, const FlowSolution& flow) {
  cfg.validate(flow);
  std::vector<double> times;
  const double span = cfg.span(flow);
  for (int k = 0; k <= cfg.K; ++k) times.push_back(cfg.T_prime - span * k / cfg.K);
  return GeometrySampler(flow, std::move(times));
}

namespace {

struct StepSlope {
  SmallVec dx;
  SmallMat de;
};

StepSlope slope(const SmallMat& e, const PointGeometry& pg, const SmallVec& dW, double dtau, TwistSign sign) {
  FrameVectorFields f = frame_vector_fields(e, pg, sign);
  StepSlope s;
  s.dx = f.Ex * dW;
  // d_tau^* = -d_t^* on the frame part.
  s.de = -dtau * f.dt_frame;
  for (int i = 0; i < pg.dim; ++i) s.de += dW[i] * f.Ee[i];
  return s;
}

// Newton-Schulz polishing of the polar factor; falls back to the eigen route.
SmallMat retract(const SmallMat& e, const SmallMat& g) {
  SmallMat cur = e;
  const int n = static_cast<int>(e.cols());
  const SmallMat id = SmallMat::Identity(n, n);
  for (int it = 0; it < 8; ++it) {
    SmallMat m = cur.transpose() * g * cur;
    const double d = (m - id).cwiseAbs().maxCoeff();
    if (d < 1e-15) return cur;
    if (d > 0.2) return orthonormalize(e, g);
    cur = cur * (1.5 * id - 0.5 * m);
  }
  return cur;
}

}  // namespace

BrownianPath sample_path(const PathConfig& cfg, const GeometrySampler& geo, std::size_t path_index) {
  const int n = geo.dim();
  const double span = cfg.T_prime - geo.times().front();
  const double full = cfg.horizon > 0.0 ? cfg.horizon : span;
  const double dtau = full / cfg.K;
  Eigen::MatrixXd W = brownian_values(cfg.seed, path_index, n, cfg.K, full);

  BrownianPath p;
  p.dim = n;
  p.tau.resize(cfg.K + 1);
  p.x.resize(cfg.K + 1);
  p.e.resize(cfg.K + 1);
  p.S.resize(cfg.K + 1);
  p.dW.resize(cfg.K);
  p.drift.resize(cfg.K);

  std::array<double, 3> x = cfg.x0;
  PointGeometry pg = geo.at(x, cfg.T_prime);
  SmallMat e = orthonormalize(SmallMat::Identity(n, n), pg.g);
  const SmallMat e0 = e;
  p.tau[0] = 0.0;
  p.x[0] = x;
  p.e[0] = e;
  p.S[0] = SmallMat::Identity(n, n);
  for (int k = 0; k < cfg.K; ++k) {
    const double t1 = cfg.T_prime - (k + 1) * dtau;
    SmallVec dW = (W.row(k + 1) - W.row(k)).transpose();
    StepSlope k1 = slope(e, pg, dW, dtau, cfg.sign);
    std::array<double, 3> xp = x;
    for (int a = 0; a < n; ++a) xp[a] += k1.dx[a];
    SmallMat ep = e + k1.de;
    PointGeometry pp = geo.at(xp, t1);
    StepSlope k2 = slope(ep, pp, dW, dtau, cfg.sign);
    for (int a = 0; a < n; ++a) x[a] += 0.5 * (k1.dx[a] + k2.dx[a]);
    e += 0.5 * (k1.de + k2.de);
    pg = geo.at(x, t1);
    p.drift[k] = orthonormality_defect(e, pg.g);
    e = retract(e, pg.g);
    p.tau[k + 1] = (k + 1) * dtau;
    p.x[k + 1] = x;
    p.e[k + 1] = e;
    p.S[k + 1] = e0 * e.inverse();
    p.dW[k] = dW;
  }
  return p;
}

SmallMat transport(const BrownianPath& path, std::size_t k) { return path.S.at(k); }

double transport_defect(const BrownianPath& path, const GeometrySampler& geo, double T_prime, std::size_t k) {
  SmallMat g0 = geo.at(path.x[0], T_prime).g;
  SmallMat gk = geo.at(path.x[k], T_prime - path.tau[k]).g;
  SmallMat S = path.S[k];
  return (S.transpose() * g0 * S - gk).cwiseAbs().maxCoeff();
}

SmallMat defect_endomorphism(const PointGeometry& pg) { return -(pg.ginv * pg.defect.transpose()); }

void for_each_path(const PathConfig& cfg, const GeometrySampler& geo,
                   const std::function<void(std::size_t, const BrownianPath&)>& fn) {
  parallel_for(cfg.N, [&](std::size_t i) { fn(i, sample_path(cfg, geo, i)); });
}

VectorEstimate feynman_kac(const VectorFn& Z, const EndomorphismFn& A, const PathConfig& cfg,
                           const GeometrySampler& geo) {
  const int n = geo.dim();
  std::vector<std::vector<double>> vals(n, std::vector<double>(cfg.N));
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    const std::size_t K = p.steps();
    SmallMat R = SmallMat::Identity(n, n);
    if (A) {
      auto M = [&](std::size_t k) {
        PointGeometry pg = geo.at(p.x[k], cfg.T_prime - p.tau[k]);
        return SmallMat(p.S[k] * A(p.x[k], pg) * p.S[k].inverse());
      };
      SmallMat Mk = M(0);
      for (std::size_t k = 0; k < K; ++k) {
        SmallMat Mn = M(k + 1);
        const double h = p.tau[k + 1] - p.tau[k];
        Eigen::MatrixXd G = 0.5 * h * (Mk + Mn);
        R = R * SmallMat(G.exp());
        Mk = Mn;
      }
    }
    PointGeometry pg = geo.at(p.x[K], cfg.T_prime - p.tau[K]);
    SmallVec v = R * p.S[K] * Z(p.x[K], pg);
    for (int c = 0; c < n; ++c) vals[c][i] = v[c];
  });
  VectorEstimate out;
  out.mean = SmallVec::Zero(n);
  out.stderr_ = SmallVec::Zero(n);
  for (int c = 0; c < n; ++c) {
    Estimate e = mean_stderr(vals[c]);
    out.mean[c] = e.mean;
    out.stderr_[c] = e.stderr_;
  }
  return out;
}

std::vector<double> terminal_values(const ScalarFn& f, const PathConfig& cfg, const GeometrySampler& geo) {
  std::vector<double> v(cfg.N);
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) { v[i] = f(p.x.back()); });
  return v;
}

TrigInterpolant::TrigInterpolant(const PeriodicGrid& grid, const Field& f, double rel_cut) : dim_(grid.dim) {
  using cd = std::complex<double>;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int a = 0; a < 3; ++a) {
    n_[a] = a < dim_ ? grid.n[a] : 1;
    k0_[a] = two_pi / grid.L[a];
  }
  const std::size_t total = grid.size();
  std::vector<cd> c(f.component(0), f.component(0) + total);
  // Separable forward DFT, axis by axis (index = (i*n1 + j)*n2 + k).
  for (int a = 0; a < dim_; ++a) {
    const int N = n_[a];
    std::vector<cd> tw(N);
    for (int q = 0; q < N; ++q) tw[q] = std::polar(1.0, -two_pi * q / N);
    std::vector<cd> line(N), out(N);
    const std::size_t stride = grid.stride(a);
    for (std::size_t base = 0; base < total; ++base) {
      auto ijk = grid.unravel(base);
      if (ijk[a] != 0) continue;
      for (int q = 0; q < N; ++q) line[q] = c[base + q * stride];
      for (int m = 0; m < N; ++m) {
        cd s = 0.0;
        for (int q = 0; q < N; ++q) s += line[q] * tw[(static_cast<long>(m) * q) % N];
        out[m] = s / static_cast<double>(N);
      }
      for (int q = 0; q < N; ++q) c[base + q * stride] = out[q];
    }
  }
  double big = 0.0;
  for (const cd& z : c) big = std::max(big, std::abs(z));
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (std::abs(c[idx]) <= rel_cut * big) continue;
    auto ijk = grid.unravel(idx);
    std::array<int, 3> w{0, 0, 0};
    for (int a = 0; a < dim_; ++a) w[a] = ijk[a] <= n_[a] / 2 ? ijk[a] : ijk[a] - n_[a];
    wave_.push_back(w);
    coef_.push_back(c[idx]);
  }
}

double TrigInterpolant::value(const std::array<double, 3>& x) const {
  double v = 0.0;
  jet(x, v, nullptr, nullptr);
  return v;
}

void TrigInterpolant::jet(const std::array<double, 3>& x, double& v, SmallVec* grad, SmallMat* hess) const {
  using cd = std::complex<double>;
  cd val = 0.0;
  std::array<cd, 3> gr{0.0, 0.0, 0.0};
  std::array<cd, 9> hs{};
  for (std::size_t m = 0; m < coef_.size(); ++m) {
    double phase = 0.0;
    double k[3] = {0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      k[a] = wave_[m][a] * k0_[a];
      phase += k[a] * x[a];
    }
    const cd term = coef_[m] * std::polar(1.0, phase);
    val += term;
    if (grad)
      for (int a = 0; a < dim_; ++a) gr[a] += cd(0.0, k[a]) * term;
    if (hess)
      for (int a = 0; a < dim_; ++a)
        for (int b = 0; b < dim_; ++b) hs[a * 3 + b] -= k[a] * k[b] * term;
  }
  v = val.real();
  if (grad) {
    grad->resize(dim_);
    for (int a = 0; a < dim_; ++a) (*grad)[a] = gr[a].real();
  }
  if (hess) {
    hess->resize(dim_, dim_);
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) (*hess)(a, b) = hs[a * 3 + b].real();
  }
}

WeakOrder weak_order(const ScalarFn& f, PathConfig cfg, const FlowSolution& flow, const std::vector<int>& K) {
  if (K.size() < 3) throw ConfigError("weak order needs at least three step counts");
  WeakOrder w;
  w.K = K;
  std::vector<std::vector<double>> v;
  for (int k : K) {
    cfg.K = k;
    GeometrySampler geo = path_sampler(cfg, flow);
    v.push_back(terminal_values(f, cfg, geo));
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    std::vector<double> d(cfg.N);
    for (std::size_t p = 0; p < cfg.N; ++p) d[p] = v[i][p] - v[i + 1][p];
    w.diff.push_back(mean_stderr(d));
  }
  for (std::size_t i = 0; i + 1 < w.diff.size(); ++i) w.ratio.push_back(w.diff[i].mean / w.diff[i + 1].mean);
  const Estimate& a = w.diff[w.diff.size() - 2];
  const Estimate& b = w.diff.back();
  w.order = std::log2(std::abs(a.mean / b.mean));
  w.order_se = std::hypot(a.stderr_ / a.mean, b.stderr_ / b.mean) / std::numbers::ln2;
  return w;
}

Chi2Test two_time_chi2(const FlowSolution& flow, const PathConfig& cfg, double tau1, double tau2, int bins,
                       const HeatOptions& opts) {
  const PeriodicGrid& grid = flow.space()->grid();
  if (grid.dim != 1) throw ConfigError("two-time histogram test runs on one-dimensional grids");
  const int n = grid.n[0];
  if (bins < 2 || n % bins != 0) throw ConfigError("bins must divide the node count");
  if (!(0.0 < tau1 && tau1 < tau2 && tau2 <= cfg.T_prime - flow.t_begin()))
    throw ConfigError("need 0 < tau1 < tau2 within the flow interval");
  const std::size_t x0 = grid.nearest(cfg.x0.data());
  if (std::abs(grid.coords(x0)[0] - cfg.x0[0]) > 1e-12 * grid.L[0]) throw ConfigError("x0 must be a grid node");
  const int per = n / bins;
  auto bin_of = [&](std::size_t node) { return static_cast<int>(node) / per; };

  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(bins, bins);
  KernelMeasure k1 = heat_kernel(cfg.x0, cfg.T_prime, cfg.T_prime - tau1, flow, opts);
  std::vector<Eigen::VectorXd> rows(n);
  parallel_for(n, [&](std::size_t y) {
    KernelMeasure k2 = heat_kernel(grid.coords(y), cfg.T_prime - tau1, cfg.T_prime - tau2, flow, opts);
    rows[y] = Eigen::VectorXd::Zero(bins);
    for (std::size_t z = 0; z < k2.weights.nodes(); ++z) rows[y][bin_of(z)] += k2.weights.at(z) / k2.mass;
  });
  for (int y = 0; y < n; ++y) expected.row(bin_of(y)) += k1.weights.at(y) / k1.mass * rows[y].transpose();

  PathConfig c = cfg;
  c.horizon = tau2;
  const double dtau = c.dtau(flow);
  const double q = tau1 / dtau;
  if (std::abs(q - std::lround(q)) > 1e-9 * std::max(1.0, q)) throw ConfigError("tau1 is not on the path grid");
  const std::size_t m1 = static_cast<std::size_t>(std::lround(q));
  GeometrySampler geo = path_sampler(c, flow);
  std::vector<int> cell(c.N);
  for_each_path(c, geo, [&](std::size_t i, const BrownianPath& p) {
    cell[i] = bin_of(grid.nearest(p.x[m1].data())) * bins + bin_of(grid.nearest(p.x.back().data()));
  });
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(bins, bins);
  for (int id : cell) count(id / bins, id % bins) += 1.0;

  Chi2Test t;
  t.bins = bins;
  t.N = c.N;
  t.expected_mass = expected.sum();
  // Cells expecting fewer than 5 counts are pooled into one.
  int used = 0;
  double pool_obs = 0.0, pool_exp = 0.0;
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b) {
      const double e = expected(a, b) / t.expected_mass * c.N;
      if (e < 5.0) {
        pool_obs += count(a, b);
        pool_exp += e;
        continue;
      }
      t.statistic += (count(a, b) - e) * (count(a, b) - e) / e;
      ++used;
    }
  if (pool_exp > 0.0) {
    t.statistic += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
    ++used;
  }
  t.dof = used - 1;
  if (t.dof < 1) throw ConfigError("too few populated cells for a chi-square test");
  t.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(t.dof), t.statistic));
  return t;
}

}  // namespace grflow
