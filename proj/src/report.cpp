#include "grflow/report.hpp"

#include <cmath>

#include "grflow/core.hpp"

namespace grflow {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "PASS";
    case Verdict::fail:
      return "FAIL";
    default:
      return "INCONCLUSIVE";
  }
}

double VerificationReport::combined_se() const { return std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se); }

void VerificationReport::decide() {
  if (!std::isfinite(lhs) || !std::isfinite(rhs) || !std::isfinite(combined_se()) || !std::isfinite(margin)) {
    verdict = Verdict::inconclusive;
    return;
  }
  verdict = lhs <= rhs + 3.0 * combined_se() + margin ? Verdict::pass : Verdict::fail;
}

double VerificationReport::slack() const { return rhs + 3.0 * combined_se() + margin - lhs; }

std::string VerificationReport::digest() const { return hex64(fnv1a(id + inputs.dump())); }

nlohmann::ordered_json VerificationReport::to_json(bool with_runtime) const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["inputs"] = inputs;
  j["inputs_digest"] = digest();
  j["lhs"] = lhs;
  j["lhs_stderr"] = lhs_se;
  j["rhs"] = rhs;
  j["rhs_stderr"] = rhs_se;
  j["margin"] = margin;
  j["verdict"] = to_string(verdict);
  j["seeds"] = seeds;
  if (!note.empty()) j["note"] = note;
  if (with_runtime) j["runtime_s"] = runtime_s;
  return j;
}

}  // namespace grflow
