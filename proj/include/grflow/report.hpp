#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace grflow {

enum class Verdict { pass, fail, inconclusive };

std::string to_string(Verdict v);

// One inequality instance LHS <= RHS with statistical and discretization slack.
struct VerificationReport {
  std::string id;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double margin = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::uint64_t> seeds;
  std::string note;
  double runtime_s = 0.0;

  double combined_se() const;
  // PASS iff lhs <= rhs + 3 se + margin, FAIL iff above it, INCONCLUSIVE when
  // any estimate is not finite.
  void decide();
  // Slack rhs + 3 se + margin - lhs (positive means room to spare).
  double slack() const;
  std::string digest() const;
  nlohmann::ordered_json to_json(bool with_runtime = false) const;
};

}  // namespace grflow
