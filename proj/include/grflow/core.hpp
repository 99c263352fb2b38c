#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace grflow {

// Small fixed-capacity types for per-point work along paths (dimension <= 3).
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the flow leaves the space of metrics; carries the time.
class FlowBreakdown : public std::runtime_error {
 public:
  FlowBreakdown(const std::string& what, double t) : std::runtime_error(what), time(t) {}
  double time;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

// Mean and standard error of a sample, reduced with pairwise summation.
Estimate mean_stderr(const std::vector<double>& x);

// Global worker count used by data-parallel loops (OpenMP).
void set_threads(int k);
int threads();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace grflow
