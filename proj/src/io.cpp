#include "grflow/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "grflow/catalog.hpp"

namespace grflow {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr char kFieldMagic[4] = {'G', 'R', 'F', 'F'};
constexpr char kPathMagic[4] = {'G', 'R', 'F', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("truncated binary file");
  return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ConfigError("truncated binary file");
}

void check_magic(std::istream& in, const char* magic) {
  char m[4];
  in.read(m, 4);
  if (!in || std::memcmp(m, magic, 4) != 0) throw ConfigError("unrecognized binary header");
  if (get<std::uint32_t>(in) != kVersion) throw ConfigError("unsupported binary format version");
}

SmallMat matrix_of(const json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError("matrix must have one row per dimension");
  SmallMat m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) throw ConfigError("matrix rows must be square");
    for (int k = 0; k < n; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

DiffMode diff_mode(const std::string& s) {
  if (s == "fd4") return DiffMode::fd4;
  if (s == "spectral") return DiffMode::spectral;
  throw ConfigError("unknown derivative mode " + s);
}

Field catalog_field(const json& j, const Space& space, int rank, Symmetry sym) {
  const std::string kind = j.value("kind", "zero");
  const int n = space.dim();
  if (kind == "identity") return identity_metric(space);
  if (kind == "zero") {
    Field f(n, rank, space.nodes(), sym);
    return f;
  }
  if (kind == "constant") return constant_tensor(space, matrix_of(j.at("matrix"), n), sym);
  if (kind == "conformal") return conformal_metric(space, j.value("amp", 0.0), j.value("k", 1), j.value("axis", 0));
  if (kind == "mode")
    return mode_two_form(space, j.value("amp", 0.0), j.value("i", 0), j.value("j", 1), j.value("k", 1),
                         j.value("axis", 0));
  if (kind == "volume") return volume_three_form(space, j.value("c", 0.0));
  if (kind == "cartan") return cartan_three_form(space, j.value("kappa", 0.0));
  if (kind == "file") {
    Field f = read_field(j.at("path").get<std::string>(), space.grid());
    if (f.dim() != n || f.rank() != rank) throw ConfigError("field file has the wrong shape");
    f.set_symmetry(sym);
    return f;
  }
  throw ConfigError("unknown field kind " + kind);
}

}  // namespace

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

GeometrySlice build_slice(const json& geo) {
  const std::string backend = geo.value("backend", "torus");
  if (backend == "su2") return su2_slice(geo.value("lambda", 1.0), geo.value("kappa", 1.0), geo.value("scale", 1.0));
  if (backend != "torus") throw ConfigError("unknown backend " + backend);
  SpacePtr space = torus_space(geo.value("dim", 3), geo.value("nodes", 8), geo.value("length", 2 * std::numbers::pi),
                               diff_mode(geo.value("diff", "fd4")));
  Field g = catalog_field(geo.value("metric", json{{"kind", "identity"}}), *space, 2, Symmetry::symmetric);
  Field b = catalog_field(geo.value("b", json{{"kind", "zero"}}), *space, 2, Symmetry::antisymmetric);
  Field H = catalog_field(geo.value("H0", json{{"kind", "volume"}, {"c", 0.0}}), *space, 3, Symmetry::antisymmetric);
  return make_slice(std::move(space), std::move(g), std::move(b), std::move(H));
}

FlowSolution build_family(const json& cfg) {
  GeometrySlice slice = build_slice(cfg.at("geometry"));
  const json flow = cfg.value("flow", json::object());
  const std::string kind = flow.value("kind", "run");
  FlowSolution sol = [&] {
    if (kind == "static") return static_family(slice, flow.value("T", 1.0), flow.value("intervals", 8));
    if (kind != "run") throw ConfigError("unknown flow kind " + kind);
    FlowOptions o;
    o.T = flow.value("T", o.T);
    o.dt = flow.value("dt", o.dt);
    o.output_every = flow.value("output_every", o.output_every);
    return run_flow(slice, o);
  }();
  if (!cfg.contains("perturb")) return sol;
  const json& p = cfg["perturb"];
  const std::string mode = p.at("mode").get<std::string>();
  const double eps = p.at("eps").get<double>();
  if (mode == "conformal_drift") return perturb_family(sol, eps, PerturbMode::conformal_drift);
  if (mode != "b_drift") throw ConfigError("unknown perturbation " + mode);
  Field beta = constant_tensor(*sol.space(), matrix_of(p.at("beta"), sol.space()->dim()), Symmetry::antisymmetric);
  return perturb_family(sol, eps, PerturbMode::b_drift, &beta);
}

PathConfig build_path_config(const json& j) {
  PathConfig c;
  if (j.contains("x0")) {
    const auto& x = j["x0"];
    if (!x.is_array() || x.size() > 3) throw ConfigError("x0 must be an array of at most 3 numbers");
    for (std::size_t a = 0; a < x.size(); ++a) c.x0[a] = x[a].get<double>();
  }
  c.T_prime = j.value("T_prime", c.T_prime);
  c.horizon = j.value("horizon", c.horizon);
  c.K = j.value("K", c.K);
  c.N = j.value("N", c.N);
  c.seed = j.value("seed", c.seed);
  if (j.value("sign", "plus") == "minus") c.sign = TwistSign::minus;
  return c;
}

HeatOptions build_heat_options(const json& j) {
  HeatOptions o;
  o.cfl = j.value("cfl", o.cfl);
  o.max_dt = j.value("max_dt", o.max_dt);
  return o;
}

ScalarFn build_factor(const json& f, const FlowSolution& flow, const PathConfig& cfg) {
  const std::string kind = f.value("kind", "const");
  if (kind == "const") {
    const double c = f.value("value", 1.0);
    return [c](const std::array<double, 3>&) { return c; };
  }
  if (kind == "fourier") {
    const PeriodicGrid& grid = flow.space()->grid();
    std::array<double, 3> w{0, 0, 0};
    const auto k = f.at("k");
    for (std::size_t a = 0; a < k.size() && a < 3; ++a) w[a] = 2 * std::numbers::pi * k[a].get<double>() / grid.L[a];
    const double amp = f.value("amp", 1.0), phase = f.value("phase", 0.0);
    return [w, amp, phase](const std::array<double, 3>& x) {
      return amp * std::cos(w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + phase);
    };
  }
  if (kind == "probe") return frame_probe(flow, cfg, f.value("direction", 0), f.value("scale", 1.0));
  throw ConfigError("unknown factor kind " + kind);
}

CylinderFunction build_cylinder(const json& cyl, const FlowSolution& flow, const PathConfig& cfg) {
  std::vector<double> times = cyl.at("times").get<std::vector<double>>();
  std::vector<CylinderTerm> terms;
  for (const auto& t : cyl.at("terms")) {
    CylinderTerm term;
    term.coef = t.value("coef", 1.0);
    for (const auto& f : t.at("factors")) term.factors.push_back(build_factor(f, flow, cfg));
    terms.push_back(std::move(term));
  }
  return CylinderFunction(std::move(times), std::move(terms), flow.space()->grid());
}

void write_field(const std::filesystem::path& file, const Field& f, const PeriodicGrid& grid) {
  if (f.nodes() != grid.size()) throw ConfigError("field does not live on this grid");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.write(kFieldMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::int32_t>(f.dim()));
  put(out, static_cast<std::int32_t>(f.rank()));
  put(out, static_cast<std::uint64_t>(f.nodes()));
  for (int a = 0; a < 3; ++a) put(out, static_cast<std::int32_t>(grid.n[a]));
  put_doubles(out, f.data().data(), f.data().size());
}

Field read_field(const std::filesystem::path& file, const PeriodicGrid& grid) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  check_magic(in, kFieldMagic);
  const int dim = get<std::int32_t>(in);
  const int rank = get<std::int32_t>(in);
  const auto nodes = get<std::uint64_t>(in);
  for (int a = 0; a < 3; ++a)
    if (get<std::int32_t>(in) != grid.n[a]) throw ConfigError("field resolution does not match the grid");
  if (dim != grid.dim || nodes != grid.size() || rank < 0 || rank > 3) throw ConfigError("field header mismatch");
  Field f(dim, rank, nodes);
  get_doubles(in, f.data().data(), f.data().size());
  return f;
}

void write_path_batch(const std::filesystem::path& file, const PathConfig& cfg, const FlowSolution& flow) {
  cfg.validate(flow);
  GeometrySampler geo = path_sampler(cfg, flow);
  const int n = geo.dim();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.write(kPathMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::int32_t>(n));
  put(out, static_cast<std::int32_t>(cfg.K));
  put(out, static_cast<std::uint64_t>(cfg.N));
  put(out, static_cast<std::uint64_t>(cfg.seed));
  put(out, cfg.T_prime);
  put(out, cfg.dtau(flow));
  put_doubles(out, cfg.x0.data(), 3);
  const std::size_t chunk = 1024;
  std::vector<BrownianPath> buf;
  for (std::size_t start = 0; start < cfg.N; start += chunk) {
    const std::size_t m = std::min(chunk, cfg.N - start);
    buf.assign(m, BrownianPath{});
    parallel_for(m, [&](std::size_t i) { buf[i] = sample_path(cfg, geo, start + i); });
    for (const BrownianPath& p : buf) {
      for (const auto& x : p.x) put_doubles(out, x.data(), 3);
      for (const auto& e : p.e) put_doubles(out, e.data(), n * n);
      for (const auto& w : p.dW) put_doubles(out, w.data(), n);
      for (const auto& S : p.S) put_doubles(out, S.data(), n * n);
    }
  }
  if (!out) throw ConfigError("write failed for " + file.string());
}

PathBatch read_path_batch(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  check_magic(in, kPathMagic);
  PathBatch b;
  b.dim = get<std::int32_t>(in);
  b.K = get<std::int32_t>(in);
  const auto N = get<std::uint64_t>(in);
  b.seed = get<std::uint64_t>(in);
  b.T_prime = get<double>(in);
  b.dtau = get<double>(in);
  get_doubles(in, b.x0.data(), 3);
  const int n = b.dim;
  if (n < 1 || n > 3 || b.K < 1) throw ConfigError("path batch header mismatch");
  b.paths.resize(N);
  for (auto& p : b.paths) {
    p.dim = n;
    p.tau.resize(b.K + 1);
    for (int k = 0; k <= b.K; ++k) p.tau[k] = k * b.dtau;
    p.x.resize(b.K + 1);
    for (auto& x : p.x) get_doubles(in, x.data(), 3);
    p.e.assign(b.K + 1, SmallMat(n, n));
    for (auto& e : p.e) get_doubles(in, e.data(), n * n);
    p.dW.assign(b.K, SmallVec(n));
    for (auto& w : p.dW) get_doubles(in, w.data(), n);
    p.S.assign(b.K + 1, SmallMat(n, n));
    for (auto& S : p.S) get_doubles(in, S.data(), n * n);
  }
  return b;
}

void write_jsonl(std::ostream& out, const ordered_json& record) { out << record.dump() << '\n'; }

void write_reports(std::ostream& out, const std::vector<VerificationReport>& reports) {
  for (const auto& r : reports) write_jsonl(out, r.to_json());
}

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n' << std::setprecision(17);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace grflow
