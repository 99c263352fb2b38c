#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "grflow/harness.hpp"
#include "json.hpp"

namespace grflow {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

json load_json(const std::filesystem::path& file);

// Geometry from a config object. Grids: {"backend": "torus", "dim", "nodes",
// "length", "diff": "fd4"|"spectral", "metric", "b", "H0"} with fields from the
// catalog ({"kind": "identity"|"conformal"|"constant"|"file", ...}); group
// models: {"backend": "su2", "lambda", "kappa", "scale"}.
GeometrySlice build_slice(const json& geometry);

// {"geometry": ..., "flow": {"kind": "run"|"static", "T", "dt", "output_every",
// "intervals"}, "perturb": {"mode": "conformal_drift"|"b_drift", "eps", "beta"}}.
FlowSolution build_family(const json& cfg);

// {"x0", "T_prime", "horizon", "K", "N", "seed"}; --seed overrides.
PathConfig build_path_config(const json& paths);
HeatOptions build_heat_options(const json& heat);

// Factor catalog: {"kind": "const", "value"}, {"kind": "fourier", "k": [..],
// "amp", "phase"} = amp cos(2 pi k.x / L + phase), {"kind": "probe",
// "direction", "scale"} = the frame probe of harness.hpp.
ScalarFn build_factor(const json& factor, const FlowSolution& flow, const PathConfig& cfg);
// {"times": [..], "terms": [{"coef", "factors": [..]}]}.
CylinderFunction build_cylinder(const json& cyl, const FlowSolution& flow, const PathConfig& cfg);

// Flat binary field: "GRFF", u32 version, i32 dim, i32 rank, u64 nodes,
// i32 n[3], then nodes * dim^rank little-endian doubles in Field storage order.
void write_field(const std::filesystem::path& file, const Field& f, const PeriodicGrid& grid);
Field read_field(const std::filesystem::path& file, const PeriodicGrid& grid);

// Path batch: "GRFP", u32 version, i32 dim, i32 K, u64 N, u64 seed, f64 T',
// f64 dtau, f64 x0[3]; per path: x[(K+1) * 3], e[(K+1) * n * n],
// dW[K * n], S[(K+1) * n * n] (column-major matrices).
struct PathBatch {
  int dim = 1;
  int K = 0;
  std::uint64_t seed = 0;
  double T_prime = 0.0;
  double dtau = 0.0;
  std::array<double, 3> x0{0, 0, 0};
  std::vector<BrownianPath> paths;
};
void write_path_batch(const std::filesystem::path& file, const PathConfig& cfg, const FlowSolution& flow);
PathBatch read_path_batch(const std::filesystem::path& file);

void write_jsonl(std::ostream& out, const ordered_json& record);
void write_reports(std::ostream& out, const std::vector<VerificationReport>& reports);

// Comma-separated series with a header row; values printed with 17 digits.
void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace grflow
