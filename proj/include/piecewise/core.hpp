#pragma once

// Shared numerics, error types and small utilities used across the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace piecewise {

/// Raised when a graph, partition or model is structurally invalid.
class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when vector lengths or indices disagree with a graph.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when exact enumeration would exceed the configured state-space cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, unknown labels and similar data problems.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a failed optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Default cap on the number of joint states enumerated by exact routines.
inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Normalizes log-weights in place into probabilities and returns the log normalizer.
inline double normalize_log(std::span<const double> logw, std::span<double> probs) {
  const double lse = log_sum_exp(logw);
  for (std::size_t i = 0; i < logw.size(); ++i) probs[i] = std::exp(logw[i] - lse);
  return lse;
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline void add_scaled(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

/// Index of the first maximal element; ties resolve to the lowest index.
inline int argmax_first(std::span<const double> xs) {
  int best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

/// Runs body(i) for i in [0, n), split into contiguous blocks over `threads` workers.
/// Callers must make body(i) write only to slot i so results do not depend on the split.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t block = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(n, lo + block);
    pool.emplace_back([lo, hi, w, &body, &errors] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace piecewise
