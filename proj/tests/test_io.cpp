#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "grflow/catalog.hpp"
#include "grflow/io.hpp"

using namespace grflow;
using std::numbers::pi;

namespace {

std::filesystem::path scratch(const std::string& name) {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "grflow_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

json torus_config() {
  return json::parse(R"({
    "geometry": {"backend": "torus", "dim": 3, "nodes": 8, "diff": "spectral",
                 "metric": {"kind": "identity"}, "H0": {"kind": "volume", "c": 1.0}},
    "flow": {"kind": "run", "T": 0.1, "dt": 1e-3, "output_every": 20}
  })");
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("families from configs") {
    FlowSolution a = build_family(torus_config());
    FlowOptions o;
    o.T = 0.1;
    o.dt = 1e-3;
    o.output_every = 20;
    FlowSolution b = run_flow(flat_torus_slice(torus_space(3, 8, 2 * pi, DiffMode::spectral), 1.0), o);
    REQUIRE(a.size() == b.size());
    CHECK(max_diff(a.node(a.size() - 1).g, b.node(b.size() - 1).g) == 0.0);

    json c = torus_config();
    c["perturb"] = {{"mode", "b_drift"}, {"eps", 0.5}, {"beta", {{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}}}};
    FlowSolution p = build_family(c);
    CHECK(p.defect(1).max_abs() > 0.1);

    json su = json::parse(R"({"geometry": {"backend": "su2", "lambda": 1.0, "kappa": 1.0},
                               "flow": {"kind": "static", "T": 1.0, "intervals": 2}})");
    CHECK(build_family(su).size() == 3);

    c = torus_config();
    c["geometry"]["metric"]["kind"] = "sphere";
    CHECK_THROWS_AS(build_family(c), ConfigError);
    c = torus_config();
    c["geometry"]["diff"] = "fd6";
    CHECK_THROWS_AS(build_family(c), ConfigError);
  }

  TEST_CASE("binary fields round trip and reject mismatched grids") {
    SpacePtr sp = torus_space(2, 8, 2 * pi);
    Field g = conformal_metric(*sp, 0.3);
    auto f = scratch("g.bin");
    write_field(f, g, sp->grid());
    Field r = read_field(f, sp->grid());
    CHECK(max_diff(g, r) == 0.0);
    CHECK_THROWS_AS(read_field(f, torus_space(2, 16, 2 * pi)->grid()), ConfigError);

    json geo = {{"backend", "torus"}, {"dim", 2}, {"nodes", 8}, {"metric", {{"kind", "file"}, {"path", f.string()}}}};
    CHECK(max_diff(build_slice(geo).g, g) == 0.0);

    std::ofstream(scratch("junk.bin")) << "not a field";
    CHECK_THROWS_AS(read_field(scratch("junk.bin"), sp->grid()), ConfigError);
  }

  TEST_CASE("path batches round trip") {
    FlowSolution fam = build_family(torus_config());
    PathConfig cfg = build_path_config(json::parse(R"({"x0": [0.4, 1.1, -0.7], "T_prime": 0.1, "K": 16, "N": 5, "seed": 8})"));
    auto f = scratch("paths.bin");
    write_path_batch(f, cfg, fam);
    PathBatch b = read_path_batch(f);
    CHECK(b.K == 16);
    CHECK(b.seed == 8);
    REQUIRE(b.paths.size() == 5);
    GeometrySampler geo = path_sampler(cfg, fam);
    BrownianPath p = sample_path(cfg, geo, 3);
    CHECK(b.paths[3].x == p.x);
    CHECK((b.paths[3].S.back() - p.S.back()).norm() == 0.0);
    CHECK((b.paths[3].dW[7] - p.dW[7]).norm() == 0.0);
    CHECK(b.paths[3].tau.back() == doctest::Approx(p.tau.back()));
  }

  TEST_CASE("cylinder functions from the factor catalog") {
    FlowSolution fam = build_family(torus_config());
    PathConfig cfg;
    cfg.x0 = {0.4, 1.1, -0.7};
    cfg.T_prime = 0.1;
    cfg.K = 16;
    json cyl = json::parse(R"({"times": [0.0, 0.05], "terms": [
      {"coef": 2.0, "factors": [{"kind": "probe", "direction": 1}, {"kind": "const"}]},
      {"coef": -1.0, "factors": [{"kind": "const"}, {"kind": "fourier", "k": [1, 0, 0], "amp": 0.5}]}]})");
    CylinderFunction F = build_cylinder(cyl, fam, cfg);
    CHECK(F.order() == 2);
    PathPoints x{cfg.x0, {0.0, 0.0, 0.0}};
    CHECK(F.value(x) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_THROWS_AS(build_factor(json{{"kind", "bump"}}, fam, cfg), ConfigError);
    CHECK_THROWS_AS(build_factor(json{{"kind", "probe"}, {"direction", 4}}, fam, cfg), ConfigError);
  }

  TEST_CASE("report and series writers") {
    VerificationReport r;
    r.id = "demo";
    r.lhs = 1.0;
    r.rhs = 2.0;
    r.decide();
    std::ostringstream out;
    write_reports(out, {r, r});
    std::istringstream in(out.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      CHECK(json::parse(line)["verdict"] == "PASS");
      CHECK_FALSE(json::parse(line).contains("runtime_s"));
      ++n;
    }
    CHECK(n == 2);

    auto f = scratch("s.csv");
    write_csv(f, {"t", "v"}, {{0.0, 1.0}, {0.5, 0.25}});
    std::ifstream csv(f);
    std::getline(csv, line);
    CHECK(line == "t,v");
    std::getline(csv, line);
    CHECK(line == "0,1");
  }
}
