#include "grflow/core.hpp"

#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace grflow {

namespace {
int g_threads = 1;
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

Estimate mean_stderr(const std::vector<double>& x) {
  Estimate e;
  if (x.empty()) return e;
  double n = static_cast<double>(x.size());
  e.mean = pairwise_sum(x) / n;
  if (x.size() < 2) return e;
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - e.mean) * (x[i] - e.mean);
  double var = pairwise_sum(d) / (n - 1.0);
  e.stderr_ = std::sqrt(var / n);
  return e;
}

void set_threads(int k) {
  g_threads = k < 1 ? 1 : k;
#ifdef _OPENMP
  omp_set_num_threads(g_threads);
#endif
}

int threads() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
#ifdef _OPENMP
  if (g_threads > 1) {
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic, 16) num_threads(g_threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace grflow
