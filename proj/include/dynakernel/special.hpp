#pragma once

#include <algorithm>
#include <map>

#include "common.hpp"

namespace dynakernel {

inline constexpr double kBesselXMax = 1.0e4;

namespace detail {

inline int miller_start(int lmax, double x) {
  double m = std::max(static_cast<double>(lmax), x);
  return static_cast<int>(m) + 44 + static_cast<int>(10.0 * std::cbrt(std::max(m, 1.0)));
}

/// J_0..J_lmax by downward recurrence, normalized by J_0 + 2*sum J_{2k} = 1.
inline std::vector<double> bessel_j_array(int lmax, double x) {
  if (lmax < 0 || x < 0.0 || x > kBesselXMax || !std::isfinite(x))
    throw kernel_error(errc::domain_error, "bessel_j_array: need 0 <= x <= 1e4, lmax >= 0");
  std::vector<double> out(static_cast<size_t>(lmax) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const int m0 = miller_start(lmax, x);
  double bkp = 0.0, bk = 1e-290;
  double sum = 0.0;
  for (int k = m0; k >= 0; --k) {
    double bkm = (2.0 * (k + 1)) / x * bk - bkp;
    bkp = bk;
    bk = bkm;
    if (k <= lmax) out[static_cast<size_t>(k)] = bk;
    if (k > 0 && (k & 1) == 0) sum += 2.0 * bk;
    if (std::abs(bk) > 1e250) {
      bkp *= 1e-250;
      bk *= 1e-250;
      sum *= 1e-250;
      for (auto& v : out) v *= 1e-250;
    }
  }
  sum += bk;
  for (auto& v : out) v /= sum;
  return out;
}

/// Spherical j_0..j_lmax, downward recurrence normalized against j0 (or j1
/// near zeros of sin).
inline std::vector<double> sph_bessel_array(int lmax, double x) {
  if (lmax < 0 || x < 0.0 || x > kBesselXMax || !std::isfinite(x))
    throw kernel_error(errc::domain_error, "sph_bessel_array: need 0 <= x <= 1e4, lmax >= 0");
  std::vector<double> out(static_cast<size_t>(lmax) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  double j0 = std::sin(x) / x;
  double j1 = j0 / x - std::cos(x) / x;
  if (lmax == 0) {
    out[0] = j0;
    return out;
  }
  const int m0 = miller_start(lmax, x);
  double bkp = 0.0, bk = 1e-290, b0 = 0.0, b1 = 0.0;
  for (int k = m0; k >= 0; --k) {
    double bkm = (2.0 * k + 3.0) / x * bk - bkp;
    bkp = bk;
    bk = bkm;
    if (k <= lmax) out[static_cast<size_t>(k)] = bk;
    if (k == 1) b1 = bk;
    if (k == 0) b0 = bk;
    if (std::abs(bk) > 1e250) {
      bkp *= 1e-250;
      bk *= 1e-250;
      b0 *= 1e-250;
      b1 *= 1e-250;
      for (auto& v : out) v *= 1e-250;
    }
  }
  double scale = std::abs(b0) >= std::abs(b1) ? j0 / b0 : j1 / b1;
  for (auto& v : out) v *= scale;
  out[0] = j0;
  if (lmax >= 1) out[1] = j1;
  return out;
}

inline bool is_half_integer(double nu) {
  double two = 2.0 * nu;
  return std::abs(two - std::round(two)) < 1e-12 && std::abs(nu - std::round(nu)) > 0.25;
}

inline bool is_integer(double nu) { return std::abs(nu - std::round(nu)) < 1e-12; }

}  // namespace detail

/// Bessel J_nu(x) for integer or half-integer nu >= 0, 0 <= x <= 1e4.
inline SpecialValue bessel_j(double nu, double x) {
  if (nu < 0.0) throw kernel_error(errc::domain_error, "bessel_j: nu must be >= 0");
  double v;
  if (detail::is_integer(nu)) {
    int l = static_cast<int>(std::round(nu));
    v = detail::bessel_j_array(l, x)[static_cast<size_t>(l)];
  } else if (detail::is_half_integer(nu)) {
    if (x == 0.0) return {0.0, 0.0};
    int l = static_cast<int>(std::round(nu - 0.5));
    double j = detail::sph_bessel_array(l, x)[static_cast<size_t>(l)];
    v = std::sqrt(2.0 * x / kPi) * j;
  } else {
    throw kernel_error(errc::domain_error, "bessel_j: nu must be integer or half-integer");
  }
  return {v, 1e-14 * (1.0 + std::abs(v))};
}

inline double spherical_bessel_j(int l, double x) {
  return detail::sph_bessel_array(l, x)[static_cast<size_t>(l)];
}

/// d/dx J_nu(x) via J' = (J_{nu-1} - J_{nu+1})/2, J_0' = -J_1.
inline double bessel_j_prime(double nu, double x) {
  if (detail::is_integer(nu)) {
    int l = static_cast<int>(std::round(nu));
    auto a = detail::bessel_j_array(l + 1, x);
    if (l == 0) return -a[1];
    return 0.5 * (a[static_cast<size_t>(l) - 1] - a[static_cast<size_t>(l) + 1]);
  }
  if (!detail::is_half_integer(nu))
    throw kernel_error(errc::domain_error, "bessel_j_prime: nu must be integer or half-integer");
  if (x <= 0.0) throw kernel_error(errc::domain_error, "bessel_j_prime: need x > 0 for half-integer nu");
  int l = static_cast<int>(std::round(nu - 0.5));
  auto j = detail::sph_bessel_array(l + 1, x);
  // J_{l+1/2} = sqrt(2x/pi) j_l; product rule with j_l' = j_{l-1} - (l+1)/x j_l.
  double jl = j[static_cast<size_t>(l)];
  double jp = (l == 0 ? std::cos(x) / x - std::sin(x) / (x * x)
                      : j[static_cast<size_t>(l) - 1] - (l + 1.0) / x * jl);
  return std::sqrt(2.0 * x / kPi) * (jp + 0.5 * jl / x);
}

/// k-th positive zero of J_nu (k >= 1). Zeros are found sequentially by sign
/// scanning (step well below the minimal zero spacing), then bisection and a
/// Newton polish; results are cached per order.
inline double bessel_j_zero(double nu, int k) {
  if (k < 1 || k > 100000) throw kernel_error(errc::domain_error, "bessel_j_zero: need k >= 1");
  if (!(detail::is_integer(nu) || detail::is_half_integer(nu)) || nu < 0.0)
    throw kernel_error(errc::domain_error, "bessel_j_zero: nu must be integer or half-integer >= 0");
  static std::map<int, std::vector<double>> cache;
  static std::mutex mu;
  int key = static_cast<int>(std::round(2.0 * nu));
  std::lock_guard<std::mutex> lock(mu);
  auto& zeros = cache[key];
  auto eval = [nu](double x) { return bessel_j(nu, x).value; };
  while (static_cast<int>(zeros.size()) < k) {
    double a = zeros.empty() ? std::max(nu, 0.5) : zeros.back() + 0.25;
    double fa = eval(a);
    double b = a;
    const double step = 0.5;
    bool bracketed = false;
    for (int i = 0; i < 100000; ++i) {
      b = a + step;
      double fb = eval(b);
      if (fa == 0.0) {
        bracketed = true;
        b = a;
        break;
      }
      if (fa * fb < 0.0) {
        bracketed = true;
        break;
      }
      a = b;
      fa = fb;
      if (b > kBesselXMax)
        throw kernel_error(errc::domain_error, "bessel_j_zero: zero beyond supported range", b);
    }
    if (!bracketed) throw kernel_error(errc::rootfind_error, "bessel_j_zero: no sign change found");
    for (int i = 0; i < 30; ++i) {
      double m = 0.5 * (a + b);
      double fm = eval(m);
      if (fa * fm <= 0.0) {
        b = m;
      } else {
        a = m;
        fa = fm;
      }
    }
    double z = 0.5 * (a + b);
    for (int i = 0; i < 4; ++i) {
      double f = eval(z), fp = bessel_j_prime(nu, z);
      double dz = f / fp;
      double zn = z - dz;
      if (zn < a - 1.0 || zn > b + 1.0) break;
      z = zn;
      if (std::abs(dz) < 1e-15 * z) break;
    }
    if (std::abs(eval(z)) > 1e-10)
      throw kernel_error(errc::rootfind_error, "bessel_j_zero: polish failed", z);
    zeros.push_back(z);
  }
  return zeros[static_cast<size_t>(k) - 1];
}

/// P_0..P_lmax at u (|u| <= 1, tolerating roundoff past the edge).
inline void legendre_p_array(int lmax, double u, std::vector<double>& out) {
  if (std::abs(u) > 1.0 + 1e-12)
    throw kernel_error(errc::domain_error, "legendre_p_array: |u| must be <= 1");
  u = std::clamp(u, -1.0, 1.0);
  out.resize(static_cast<size_t>(lmax) + 1);
  out[0] = 1.0;
  if (lmax >= 1) out[1] = u;
  for (int l = 1; l < lmax; ++l)
    out[static_cast<size_t>(l) + 1] =
        ((2.0 * l + 1.0) * u * out[static_cast<size_t>(l)] - l * out[static_cast<size_t>(l) - 1]) /
        (l + 1.0);
}

inline double legendre_p(int l, double u) {
  if (l < 0) throw kernel_error(errc::domain_error, "legendre_p: l must be >= 0");
  std::vector<double> a;
  legendre_p_array(l, u, a);
  return a[static_cast<size_t>(l)];
}

/// T_0..T_lmax at u: T_l(cos dt) = cos(l dt).
inline void chebyshev_t_array(int lmax, double u, std::vector<double>& out) {
  u = std::clamp(u, -1.0, 1.0);
  out.resize(static_cast<size_t>(lmax) + 1);
  out[0] = 1.0;
  if (lmax >= 1) out[1] = u;
  for (int l = 1; l < lmax; ++l)
    out[static_cast<size_t>(l) + 1] = 2.0 * u * out[static_cast<size_t>(l)] - out[static_cast<size_t>(l) - 1];
}

}  // namespace dynakernel
