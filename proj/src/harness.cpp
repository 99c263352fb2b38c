#include "grflow/harness.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <memory>

namespace grflow {

namespace {

struct Spec {
  std::string id;
  nlohmann::ordered_json inputs;
  std::string note;
};

// Writes one (lhs, rhs) pair per spec for a sampled path.
using PathEval = std::function<void(const BrownianPath&, const GeometrySampler&, double* lhs, double* rhs)>;
using EvalFactory = std::function<PathEval(const PathConfig&)>;

struct Samples {
  std::vector<std::vector<double>> lhs, rhs;
};

Samples sample_battery(std::size_t n, const EvalFactory& make, const PathConfig& cfg, const FlowSolution& flow) {
  GeometrySampler geo = path_sampler(cfg, flow);
  PathEval ev = make(cfg);
  Samples s;
  s.lhs.assign(n, std::vector<double>(cfg.N));
  s.rhs.assign(n, std::vector<double>(cfg.N));
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    std::vector<double> l(n), r(n);
    ev(p, geo, l.data(), r.data());
    for (std::size_t q = 0; q < n; ++q) {
      s.lhs[q][i] = l[q];
      s.rhs[q][i] = r[q];
    }
  });
  return s;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

// Paired estimates: lhs_se is the stderr of the per-path difference.
std::vector<VerificationReport> run_battery(const std::vector<Spec>& specs, const EvalFactory& make,
                                            const BatteryConfig& bc, const FlowSolution& flow) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = specs.size();
  Samples fine = sample_battery(n, make, bc.paths, flow);
  Samples coarse;
  if (bc.richardson) {
    PathConfig c = bc.paths;
    c.K /= 2;
    coarse = sample_battery(n, make, c, flow);
  }
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<VerificationReport> out;
  for (std::size_t q = 0; q < n; ++q) {
    VerificationReport r;
    r.id = specs[q].id;
    r.inputs = specs[q].inputs;
    r.note = specs[q].note;
    r.lhs = mean_stderr(fine.lhs[q]).mean;
    r.rhs = mean_stderr(fine.rhs[q]).mean;
    Estimate d = mean_stderr(difference(fine.lhs[q], fine.rhs[q]));
    r.lhs_se = d.stderr_;
    r.rhs_se = 0.0;
    r.margin = bc.margin_floor;
    if (bc.richardson) r.margin += std::abs(d.mean - mean_stderr(difference(coarse.lhs[q], coarse.rhs[q])).mean);
    r.seeds = {bc.paths.seed};
    r.runtime_s = runtime;
    r.decide();
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::ordered_json base_inputs(const CylinderFunction& F, const BatteryConfig& bc, const FlowSolution& flow) {
  nlohmann::ordered_json j;
  j["family"] = flow.family();
  j["x0"] = bc.paths.x0;
  j["T_prime"] = bc.paths.T_prime;
  j["K"] = bc.paths.K;
  j["N"] = bc.paths.N;
  j["seed"] = bc.paths.seed;
  j["cylinder"] = cylinder_digest(F);
  j["times"] = F.times();
  return j;
}

nlohmann::ordered_json window_inputs(nlohmann::ordered_json j, double sigma, const Window& w) {
  j["sigma"] = sigma;
  j["tau1"] = w.tau1;
  j["tau2"] = w.tau2;
  return j;
}

std::vector<MartingaleState> all_states(const MartingalePath& mp, std::size_t K, bool hessian) {
  std::vector<MartingaleState> st;
  st.reserve(K + 1);
  for (std::size_t m = 0; m <= K; ++m) st.push_back(mp.state(m, hessian));
  return st;
}

SmallVec zero_vec(int n) { return SmallVec::Zero(n); }

// nabla_sigma F_tau; zero before sigma.
SmallVec sigma_gradient(const std::vector<MartingaleState>& st, std::size_t m, std::size_t ms, double sigma, int n) {
  return m < ms ? zero_vec(n) : parallel_gradient(st[m], sigma);
}

// Sum of slot gradients strictly after tau (the value on the following step).
SmallVec strict_gradient(const MartingaleState& s, double tau, int n) {
  SmallVec out = zero_vec(n);
  for (std::size_t a = 0; a < s.slot_tau.size(); ++a)
    if (s.slot_tau[a] > tau + 1e-12 * std::max(1.0, tau)) out += s.grad[a];
  return out;
}

// int_a^b |nabla_tau nabla_sigma F_tau|^2 dtau by trapezoid with one-sided limits.
double hessian_integral(const std::vector<MartingaleState>& st, std::size_t a, std::size_t b, double sigma,
                        double dtau) {
  double s = 0.0;
  for (std::size_t m = a; m < b; ++m)
    s += 0.5 * dtau *
         (tau_hessian(st[m], sigma, Limit::right).squaredNorm() + tau_hessian(st[m + 1], sigma, Limit::left).squaredNorm());
  return s;
}

// int_0^{T'} |nabla_tau nabla_sigma F_tau|^2 dsigma at the state's time, exact
// for the piecewise constant dependence on sigma. With a weight G the
// integrand is G |nabla_tau nabla_sigma log G|^2.
double sigma_integral(const MartingaleState& s, Limit side, bool log_form) {
  double total = 0.0, lo = 0.0;
  const SmallVec gt = log_form ? tau_gradient(s, side) : SmallVec();
  for (std::size_t a = 0; a < s.slot_tau.size(); ++a) {
    const double t = s.slot_tau[a];
    if (t <= lo && a > 0) continue;
    const double len = t - lo;
    SmallMat H = tau_hessian(s, t, side);
    if (log_form) {
      const SmallVec gs = parallel_gradient(s, t);
      H = H / s.value - gt * gs.transpose() / (s.value * s.value);
      total += len * s.value * H.squaredNorm();
    } else {
      total += len * H.squaredNorm();
    }
    lo = t;
  }
  return total;
}

double tau_double_integral(const std::vector<MartingaleState>& st, double dtau, bool log_form) {
  double s = 0.0;
  for (std::size_t m = 0; m + 1 < st.size(); ++m)
    s += 0.5 * dtau * (sigma_integral(st[m], Limit::right, log_form) + sigma_integral(st[m + 1], Limit::left, log_form));
  return s;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::size_t index_of(const BrownianPath& p, double tau) { return path_index(p, tau); }

const char* kAveraged = "averaged form (law of total expectation)";

}  // namespace

std::string cylinder_digest(const CylinderFunction& F) {
  std::string s;
  for (double t : F.times()) s += std::to_string(t) + ";";
  for (std::size_t r = 0; r < F.terms(); ++r) {
    s += std::to_string(F.coef(r)) + ":";
    for (std::size_t j = 0; j < F.order(); ++j) {
      const auto& d = F.sample(r, j).data();
      s.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    }
  }
  return hex64(fnv1a(s));
}

std::vector<VerificationReport> verify_bochner_path(const CylinderFunction& F, double sigma,
                                                    const std::vector<Window>& windows, const BatteryConfig& bc,
                                                    const FlowSolution& flow) {
  const char* events[3] = {"all", "up", "down"};
  std::vector<Spec> specs;
  const nlohmann::ordered_json base = base_inputs(F, bc, flow);
  for (const Window& w : windows) {
    if (w.tau2 < w.tau1) throw ConfigError("window must satisfy tau1 <= tau2");
    nlohmann::ordered_json in = window_inputs(base, sigma, w);
    specs.push_back({"bochner/quadratic", in, "integrated form, expectation"});
    specs.push_back({"bochner/weak", in, "integrated form, expectation"});
    nlohmann::ordered_json lin = in;
    lin["norm_eps"] = bc.norm_eps;
    specs.push_back({"bochner/linear", lin, "Ito term subtracted pathwise, expectation"});
    for (const char* e : events) {
      nlohmann::ordered_json ev = in;
      ev["event"] = e;
      specs.push_back({std::string("bochner/submartingale"), ev, "E[(Y_tau2 - Y_tau1) 1_A] >= 0 for A in Sigma_tau1"});
    }
  }
  const double eps2 = bc.norm_eps * bc.norm_eps;
  EvalFactory make = [&](const PathConfig& cfg) -> PathEval {
    auto mf = std::make_shared<MartingaleField>(F, flow, cfg, bc.heat);
    return [mf, sigma, windows, eps2](const BrownianPath& p, const GeometrySampler& geo, double* L, double* R) {
      const int n = p.dim;
      const std::size_t K = p.steps(), ms = index_of(p, sigma);
      MartingalePath mp(*mf, p, &geo);
      std::vector<MartingaleState> st = all_states(mp, K, true);
      auto g = [&](std::size_t m) { return sigma_gradient(st, m, ms, sigma, n); };
      auto Y = [&](std::size_t m) { return m < ms ? 0.0 : std::sqrt(g(m).squaredNorm() + eps2); };
      std::size_t q = 0;
      for (const Window& w : windows) {
        const std::size_t a = index_of(p, w.tau1), b = index_of(p, w.tau2), a1 = std::min(std::max(a, ms), b);
        const double start = g(a1).squaredNorm(), end = g(b).squaredNorm();
        const double hint = b > a1 ? hessian_integral(st, a1, b, sigma, mf->dtau()) : 0.0;
        L[q] = start + 2.0 * hint;
        R[q++] = end;
        L[q] = start;
        R[q++] = end;
        double ito = 0.0;
        for (std::size_t m = a1; m < b; ++m) {
          const SmallVec gm = g(m);
          ito += (tau_hessian(st[m], sigma, Limit::right) * gm / std::sqrt(gm.squaredNorm() + eps2)).dot(p.dW[m]);
        }
        L[q] = Y(a1) + ito;
        R[q++] = Y(b);
        const bool up = st[a].value >= st[0].value;
        const double ya = a < ms ? 0.0 : Y(a), yb = Y(b);
        for (int e = 0; e < 3; ++e) {
          const double ind = e == 0 ? 1.0 : ((e == 1) == up ? 1.0 : 0.0);
          L[q] = ind * ya;
          R[q++] = ind * yb;
        }
      }
    };
  };
  return run_battery(specs, make, bc, flow);
}

std::vector<VerificationReport> verify_gradient_estimates(const CylinderFunction& F, double sigma,
                                                          const std::vector<Window>& windows,
                                                          const BatteryConfig& bc, const FlowSolution& flow) {
  std::vector<Spec> specs;
  const nlohmann::ordered_json base = base_inputs(F, bc, flow);
  std::vector<double> qv_times;
  for (const Window& w : windows) {
    if (w.tau2 < w.tau1) throw ConfigError("window must satisfy tau1 <= tau2");
    nlohmann::ordered_json in = window_inputs(base, sigma, w);
    specs.push_back({"grad/norm", in, kAveraged});
    specs.push_back({"grad/square", in, kAveraged});
    for (double t : {w.tau1, w.tau2})
      if (std::find(qv_times.begin(), qv_times.end(), t) == qv_times.end()) qv_times.push_back(t);
  }
  specs.push_back({"grad/start", base, "lhs by centered differences of the semigroup value"});
  for (double t : qv_times) {
    nlohmann::ordered_json in = base;
    in["tau"] = t;
    specs.push_back({"grad/qv", in, "right limits in tau"});
  }
  EvalFactory make = [&](const PathConfig& cfg) -> PathEval {
    auto mf = std::make_shared<MartingaleField>(F, flow, cfg, bc.heat);
    GeometrySampler geo0 = path_sampler(cfg, flow);
    const PointGeometry pg = geo0.at(cfg.x0, cfg.T_prime);
    const int n = pg.dim;
    const double h = 1e-4;
    SmallVec du(n);
    for (int i = 0; i < n; ++i) {
      std::array<double, 3> xp = cfg.x0, xm = cfg.x0;
      xp[i] += h;
      xm[i] -= h;
      du[i] = (mf->start_value(xp) - mf->start_value(xm)) / (2 * h);
    }
    const double start = du.dot(pg.ginv * du);
    return [mf, sigma, windows, qv_times, start](const BrownianPath& p, const GeometrySampler& geo, double* L,
                                                  double* R) {
      const int n = p.dim;
      const std::size_t K = p.steps(), ms = index_of(p, sigma);
      MartingalePath mp(*mf, p, &geo);
      auto g = [&](std::size_t m) {
        return m < ms ? zero_vec(n) : parallel_gradient(mp.state(m), sigma);
      };
      std::size_t q = 0;
      for (const Window& w : windows) {
        const std::size_t a = index_of(p, w.tau1), b = index_of(p, w.tau2);
        const double ga = g(a).norm(), gb = g(b).norm();
        L[q] = ga;
        R[q++] = gb;
        L[q] = ga * ga;
        R[q++] = gb * gb;
      }
      const MartingaleState term = mp.state(K);
      L[q] = start;
      R[q++] = parallel_gradient(term, 0.0).squaredNorm();
      for (double t : qv_times) {
        const std::size_t m = index_of(p, t);
        L[q] = 2.0 * tau_gradient(mp.state(m), Limit::right).squaredNorm();
        R[q++] = 2.0 * strict_gradient(term, t, n).squaredNorm();
      }
    };
  };
  return run_battery(specs, make, bc, flow);
}

VerificationReport verify_poincare_path(const CylinderFunction& F, double tau1, double tau2, const BatteryConfig& bc,
                                        const FlowSolution& flow) {
  if (tau2 < tau1) throw ConfigError("window must satisfy tau1 <= tau2");
  nlohmann::ordered_json in = base_inputs(F, bc, flow);
  in["tau1"] = tau1;
  in["tau2"] = tau2;
  EvalFactory make = [&](const PathConfig& cfg) -> PathEval {
    auto mf = std::make_shared<MartingaleField>(F, flow, cfg, bc.heat);
    return [mf, &F, tau1, tau2](const BrownianPath& p, const GeometrySampler& geo, double* L, double* R) {
      MartingalePath mp(*mf, p, &geo);
      const double d = mp.state(index_of(p, tau2)).value - mp.state(index_of(p, tau1)).value;
      L[0] = d * d;
      R[0] = 2.0 * malliavin_norm(F, p, tau1, tau2);
    };
  };
  return run_battery({{"poincare", in, "E[F L F] as the Malliavin energy on the window"}}, make, bc, flow).front();
}

VerificationReport verify_logsob_path(const CylinderFunction& F, double tau1, double tau2, const BatteryConfig& bc,
                                      const FlowSolution& flow) {
  if (tau2 < tau1) throw ConfigError("window must satisfy tau1 <= tau2");
  nlohmann::ordered_json in = base_inputs(F, bc, flow);
  in["tau1"] = tau1;
  in["tau2"] = tau2;
  const CylinderFunction G = F.square();
  EvalFactory make = [&](const PathConfig& cfg) -> PathEval {
    auto mf = std::make_shared<MartingaleField>(G, flow, cfg, bc.heat);
    return [mf, &F, tau1, tau2](const BrownianPath& p, const GeometrySampler& geo, double* L, double* R) {
      MartingalePath mp(*mf, p, &geo);
      L[0] = xlogx(mp.state(index_of(p, tau2)).value) - xlogx(mp.state(index_of(p, tau1)).value);
      R[0] = 4.0 * malliavin_norm(F, p, tau1, tau2);
    };
  };
  return run_battery({{"logsob", in, "G the martingale of F^2"}}, make, bc, flow).front();
}

std::vector<VerificationReport> verify_hessian_variants(const CylinderFunction& F, double sigma,
                                                        const BatteryConfig& bc, const FlowSolution& flow) {
  nlohmann::ordered_json in = base_inputs(F, bc, flow);
  in["sigma"] = sigma;
  std::vector<Spec> specs{{"hessian/bochner", in, "integrated quadratic Bochner estimate"},
                          {"hessian/poincare", base_inputs(F, bc, flow), "Poincare Hessian estimate"},
                          {"hessian/logsob", base_inputs(F, bc, flow), "log-Sobolev Hessian estimate"}};
  const CylinderFunction G = F.square();
  EvalFactory make = [&](const PathConfig& cfg) -> PathEval {
    auto mf = std::make_shared<MartingaleField>(F, flow, cfg, bc.heat);
    auto mg = std::make_shared<MartingaleField>(G, flow, cfg, bc.heat);
    return [mf, mg, &F, sigma](const BrownianPath& p, const GeometrySampler& geo, double* L, double* R) {
      const int n = p.dim;
      const std::size_t K = p.steps(), ms = index_of(p, sigma);
      const double dtau = mf->dtau();
      MartingalePath mp(*mf, p, &geo), gp(*mg, p, &geo);
      std::vector<MartingaleState> st = all_states(mp, K, true);
      const double energy = malliavin_norm(F, p);
      L[0] = sigma_gradient(st, ms, ms, sigma, n).squaredNorm() + 2.0 * hessian_integral(st, ms, K, sigma, dtau);
      R[0] = sigma_gradient(st, K, ms, sigma, n).squaredNorm();
      const double d = st[K].value - st[0].value;
      L[1] = d * d + 4.0 * tau_double_integral(st, dtau, false);
      R[1] = 2.0 * energy;
      std::vector<MartingaleState> sg = all_states(gp, K, true);
      double gmin = sg[0].value;
      for (const auto& s : sg) gmin = std::min(gmin, s.value);
      if (gmin <= 1e-12) {
        L[2] = R[2] = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      L[2] = xlogx(sg[K].value) - xlogx(sg[0].value) + 2.0 * tau_double_integral(sg, dtau, true);
      R[2] = 4.0 * energy;
    };
  };
  std::vector<VerificationReport> out = run_battery(specs, make, bc, flow);
  if (!std::isfinite(out[2].lhs))
    throw DomainError("log-Sobolev Hessian estimate needs F^2 bounded away from zero along the paths");
  return out;
}

nlohmann::ordered_json DefectReport::to_json() const {
  auto mat = [](const SmallMat& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (int i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (int k = 0; k < m.cols(); ++k) row[k] = m(i, k);
      j.push_back(row);
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["id"] = "characterize";
  j["inputs"] = inputs;
  j["estimate"] = mat(estimate);
  j["stderr"] = mat(stderr_);
  j["margin"] = mat(margin);
  j["exact"] = mat(exact);
  j["rel_error"] = rel_error;
  j["abs_error"] = abs_error;
  j["verdict"] = verdict();
  nlohmann::ordered_json pr = nlohmann::ordered_json::array();
  for (const auto& r : probes) pr.push_back(r.to_json());
  j["probes"] = pr;
  return j;
}

namespace {

struct ProbeRun {
  // [b][a] per-path slope samples, and the weak Bochner sides at eps0.
  std::vector<std::vector<std::vector<double>>> slope;
  std::vector<std::vector<double>> q1_lhs, q1_rhs, q2_lhs, q2_rhs;
};

ProbeRun probe_run(const FlowSolution& family, const PathConfig& cfg, double eps0, const HeatOptions& heat) {
  GeometrySampler geo = path_sampler(cfg, family);
  const PointGeometry pg = geo.at(cfg.x0, cfg.T_prime);
  const int n = pg.dim;
  const SmallMat e0 = sample_path(cfg, geo, 0).e[0];
  const PeriodicGrid& grid = family.space()->grid();
  const std::array<double, 3> x0 = cfg.x0;
  const double eps[3] = {eps0 / 4, eps0 / 2, eps0};

  // Least-squares weights of the slope in Y = s eps + c eps^2.
  Eigen::Matrix<double, 3, 2> X;
  for (int k = 0; k < 3; ++k) X.row(k) << eps[k], eps[k] * eps[k];
  const Eigen::Matrix<double, 2, 3> P = (X.transpose() * X).inverse() * X.transpose();

  std::vector<std::vector<std::unique_ptr<MartingaleField>>> fields(n);
  for (int b = 0; b < n; ++b) {
    const SmallVec w = pg.g * e0.col(b);
    ScalarFn phi = [w, x0, n](const std::array<double, 3>& y) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += w[a] * std::sin(y[a] - x0[a]);
      return s;
    };
    for (int k = 0; k < 3; ++k)
      fields[b].push_back(std::make_unique<MartingaleField>(
          CylinderFunction({eps[k]}, {CylinderTerm{1.0, {phi}}}, grid), family, cfg, heat));
  }

  ProbeRun out;
  out.slope.assign(n, std::vector<std::vector<double>>(n, std::vector<double>(cfg.N)));
  out.q1_lhs.assign(n, std::vector<double>(cfg.N));
  out.q1_rhs = out.q2_lhs = out.q2_rhs = out.q1_lhs;
  for_each_path(cfg, geo, [&](std::size_t i, const BrownianPath& p) {
    for (int b = 0; b < n; ++b) {
      SmallVec v = SmallVec::Zero(n);
      v[b] = 1.0;
      std::vector<SmallVec> M(3);
      for (int k = 0; k < 3; ++k) {
        MartingalePath mp(*fields[b][k], p, &geo);
        const SmallVec start = parallel_gradient(mp.state(0), 0.0);
        const SmallVec end = parallel_gradient(mp.state(index_of(p, eps[k])), 0.0);
        M[k] = end - start;
        if (k == 2) {
          out.q1_lhs[b][i] = start.squaredNorm();
          out.q1_rhs[b][i] = end.squaredNorm();
          out.q2_lhs[b][i] = (2.0 * v - start).squaredNorm();
          out.q2_rhs[b][i] = (2.0 * v - end).squaredNorm();
        }
      }
      for (int a = 0; a < n; ++a) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += P(0, k) * M[k][a];
        out.slope[b][a][i] = s;
      }
    }
  });
  return out;
}

}  // namespace

DefectReport characterize(const FlowSolution& family, const CharacterizeConfig& cc) {
  if (cc.eps0 <= 0.0) throw ConfigError("probe horizon must be positive");
  PathConfig cfg = cc.paths;
  cfg.horizon = cc.eps0;
  cfg.validate(family);
  if (cc.richardson && cfg.K < 64) throw ConfigError("Richardson margin needs K >= 64");
  const auto t0 = std::chrono::steady_clock::now();

  ProbeRun fine = probe_run(family, cfg, cc.eps0, cc.heat);
  const int n = static_cast<int>(fine.slope.size());
  ProbeRun coarse;
  if (cc.richardson) {
    PathConfig c = cfg;
    c.K /= 4;
    coarse = probe_run(family, c, cc.eps0, cc.heat);
  }

  DefectReport rep;
  rep.estimate = rep.stderr_ = rep.margin = SmallMat::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      Estimate e = mean_stderr(fine.slope[b][a]);
      rep.estimate(b, a) = e.mean;
      rep.stderr_(b, a) = e.stderr_;
      if (cc.richardson) rep.margin(b, a) = std::abs(e.mean - mean_stderr(coarse.slope[b][a]).mean) / 3.0;
    }

  GeometrySampler geo = path_sampler(cfg, family);
  const SmallMat e0 = sample_path(cfg, geo, 0).e[0];
  const Field D = family.defect_at(cfg.T_prime);
  SmallMat Dx(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Field c = Field::scalar(D.nodes());
      for (std::size_t k = 0; k < D.nodes(); ++k) c.at(k) = D.at(k, i, j);
      Dx(i, j) = TrigInterpolant(family.space()->grid(), c).value(cfg.x0);
    }
  rep.exact = e0.transpose() * Dx * e0;
  const double en = rep.exact.norm();
  rep.abs_error = (rep.estimate - rep.exact).norm();
  rep.rel_error = en > 0.0 ? rep.abs_error / en : std::numeric_limits<double>::infinity();
  rep.is_grf = true;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a)
      if (std::abs(rep.estimate(b, a)) > 3.0 * rep.stderr_(b, a) + rep.margin(b, a)) rep.is_grf = false;

  rep.inputs["family"] = family.family();
  rep.inputs["x0"] = cfg.x0;
  rep.inputs["T_prime"] = cfg.T_prime;
  rep.inputs["eps0"] = cc.eps0;
  rep.inputs["K"] = cfg.K;
  rep.inputs["N"] = cfg.N;
  rep.inputs["seed"] = cfg.seed;
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (int b = 0; b < n; ++b) {
    nlohmann::ordered_json in = rep.inputs;
    in["direction"] = b;
    auto probe = [&](const std::string& id, const std::vector<double>& l, const std::vector<double>& r) {
      VerificationReport v;
      v.id = id;
      v.inputs = in;
      v.lhs = mean_stderr(l).mean;
      v.rhs = mean_stderr(r).mean;
      v.lhs_se = mean_stderr(difference(l, r)).stderr_;
      v.seeds = {cfg.seed};
      v.runtime_s = runtime;
      v.note = "weak Bochner probe at eps0, sigma = 0";
      v.decide();
      rep.probes.push_back(v);
    };
    probe("characterize/one-point", fine.q1_lhs[b], fine.q1_rhs[b]);
    probe("characterize/two-point", fine.q2_lhs[b], fine.q2_rhs[b]);
  }
  return rep;
}

ScalarFn frame_probe(const FlowSolution& flow, const PathConfig& cfg, int b, double scale) {
  GeometrySampler geo = path_sampler(cfg, flow);
  const PointGeometry pg = geo.at(cfg.x0, cfg.T_prime);
  if (b < 0 || b >= pg.dim) throw ConfigError("probe direction out of range");
  if (!(scale > 0.0)) throw ConfigError("probe scale must be positive");
  const SmallVec w = pg.g * sample_path(cfg, geo, 0).e[0].col(b);
  const std::array<double, 3> x0 = cfg.x0;
  const int n = pg.dim;
  return [w, x0, n, scale](const std::array<double, 3>& y) {
    double v = 0.0;
    for (int a = 0; a < n; ++a) v += w[a] * scale * std::sin((y[a] - x0[a]) / scale);
    return v;
  };
}

}  // namespace grflow
