#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dynakernel {

inline constexpr double kPi = 3.14159265358979323846;

enum class errc {
  none = 0,
  domain_error,        // argument outside the supported region
  unsupported_order,   // quadrature/truncation parameter out of range
  truncation_error,    // requested accuracy unreachable at the given truncation
  rootfind_error,      // bracketing or Newton iteration failed
  config_error,        // malformed run configuration
  runaway_error,       // a sampled path exceeded the step cap
};

class kernel_error : public std::runtime_error {
 public:
  kernel_error(errc code, const std::string& what, double hint = 0.0)
      : std::runtime_error(what), code_(code), hint_(hint) {}
  errc code() const { return code_; }
  /// Context-dependent remediation value (e.g. smallest admissible t).
  double hint() const { return hint_; }

 private:
  errc code_;
  double hint_;
};

/// Point in R^n, n in {2,3}. Third coordinate ignored for n=2.
struct Vec {
  int n = 2;
  std::array<double, 3> c{0.0, 0.0, 0.0};

  double operator[](int i) const { return c[static_cast<size_t>(i)]; }
  double& operator[](int i) { return c[static_cast<size_t>(i)]; }
};

inline Vec vec2(double x0, double x1) { return Vec{2, {x0, x1, 0.0}}; }
inline Vec vec3(double x0, double x1, double x2) { return Vec{3, {x0, x1, x2}}; }

inline Vec operator+(const Vec& a, const Vec& b) {
  return Vec{a.n, {a.c[0] + b.c[0], a.c[1] + b.c[1], a.c[2] + b.c[2]}};
}
inline Vec operator-(const Vec& a, const Vec& b) {
  return Vec{a.n, {a.c[0] - b.c[0], a.c[1] - b.c[1], a.c[2] - b.c[2]}};
}
inline Vec operator*(double s, const Vec& a) {
  return Vec{a.n, {s * a.c[0], s * a.c[1], s * a.c[2]}};
}
inline double dot(const Vec& a, const Vec& b) {
  return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline double dist(const Vec& a, const Vec& b) { return norm(a - b); }

/// Unit vector along a; throws for the zero vector.
inline Vec normalized(const Vec& a) {
  double r = norm(a);
  if (r == 0.0) throw kernel_error(errc::domain_error, "cannot normalize zero vector");
  return (1.0 / r) * a;
}

/// Value with a conservative absolute error estimate.
struct SpecialValue {
  double value = 0.0;
  double error = 0.0;
};

/// Kernel evaluation result: value plus truncation/quadrature error bound.
struct KernelValue {
  double value = 0.0;
  double error = 0.0;
};

/// Worker count: hardware concurrency capped by DYNAKERNEL_THREADS (>=1).
inline int thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DYNAKERNEL_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1 && cap < hw) hw = static_cast<int>(cap);
  }
  return hw;
}

/// Runs fn(chunk_index) for chunks 0..n_chunks-1 across worker threads.
/// Chunk decomposition is independent of the worker count, so reductions
/// that combine per-chunk results in chunk order are deterministic.
inline void parallel_chunks(int n_chunks, const std::function<void(int)>& fn) {
  int workers = std::min(thread_count(), n_chunks);
  if (workers <= 1) {
    for (int i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n_chunks; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Shortest round-trip decimal form (17 significant digits).
inline std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace dynakernel
