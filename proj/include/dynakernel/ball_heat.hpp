#pragma once

#include <tuple>

#include <json.hpp>

#include "ball_laplace.hpp"
#include "halfspace.hpp"
#include "special.hpp"

namespace dynakernel::ball {

struct Truncation {
  int lmax = 40;
  int kmax = 60;
};

/// One radial-angular Dirichlet mode family: lambda = j_{nu,k}^2 with
/// nu = l + n/2 - 1. The angular multiplicity is folded into the pair factor
/// A_l, so each (l,k) appears once.
struct EigenPair {
  int l = 0;
  int k = 1;
  double mu = 0.0;      // j_{nu,k}
  double lambda = 0.0;  // mu^2
  double norm_c = 0.0;  // radial profile R(r) = norm_c * B_l(mu r), unit L2(r^{n-1} dr)
  double flux = 0.0;    // -R'(1)
};

class EigenBasis {
 public:
  int n = 2;
  Truncation trunc;
  std::vector<EigenPair> modes;            // sorted by lambda
  std::vector<std::vector<int>> by_l;      // mode indices per angular degree
  double lambda_max = 0.0;
  double lambda_next_k = 0.0;              // first eigenvalue dropped in k
  double lambda_next_l = 0.0;              // first eigenvalue dropped in l
  int mode_count_weighted = 0;             // including angular multiplicity

  /// Cached construction; bases are immutable and shared.
  static const EigenBasis& dirichlet(int n, Truncation tr = {});

  double t_min() const { return std::log(mode_count_weighted * 1e8) / lambda_max; }
  double tail_estimate(double t) const { return mode_count_weighted * std::exp(-lambda_max * t); }

  /// Crude bound on the dropped spectrum at evaluation radius rho: the k tail
  /// decays by its first dropped eigenvalue, the l tail additionally carries
  /// the rho^l smallness of J_l(mu rho) inside the ball.
  double dropped_tail(double t, double rho) const {
    double lt = std::pow(std::min(rho, 1.0), trunc.lmax + 1) * std::exp(-lambda_next_l * t);
    return mode_count_weighted * (std::exp(-lambda_next_k * t) + lt);
  }

  /// Smallest Kmax whose tail estimate drops below 1e-8 at this t.
  int required_kmax(double t) const {
    double lam_need = std::log(mode_count_weighted * 1e8) / t;
    return static_cast<int>(std::ceil(std::sqrt(std::max(lam_need, 1.0)) / kPi)) + 1;
  }

  void require_time(double t, const char* who) const {
    if (!(t > 0.0)) throw kernel_error(errc::domain_error, std::string(who) + ": t must be > 0");
    if (t < t_min())
      throw kernel_error(errc::truncation_error,
                         std::string(who) + ": truncation insufficient at this t; need Kmax >= " +
                             std::to_string(required_kmax(t)),
                         static_cast<double>(required_kmax(t)));
  }

  double radial(const EigenPair& m, double r) const {
    double z = m.mu * r;
    if (n == 2) return m.norm_c * dynakernel::detail::bessel_j_array(m.l, z)[static_cast<size_t>(m.l)];
    return m.norm_c * dynakernel::detail::sph_bessel_array(m.l, z)[static_cast<size_t>(m.l)];
  }

  double radial_deriv(const EigenPair& m, double r) const {
    double z = m.mu * r;
    size_t l = static_cast<size_t>(m.l);
    if (n == 2) {
      auto a = dynakernel::detail::bessel_j_array(m.l + 1, z);
      double jp = m.l == 0 ? -a[1] : (z > 0.0 ? a[l - 1] - (m.l / z) * a[l] : (m.l == 1 ? 0.5 : 0.0));
      return m.norm_c * m.mu * jp;
    }
    auto a = dynakernel::detail::sph_bessel_array(m.l + 1, z);
    double jp;
    if (z > 0.0)
      jp = m.l == 0 ? -a[1] : a[l - 1] - ((m.l + 1.0) / z) * a[l];
    else
      jp = m.l == 1 ? 1.0 / 3.0 : 0.0;
    return m.norm_c * m.mu * jp;
  }

  std::vector<double> radial_values(double r) const {
    std::vector<double> v(modes.size());
    for (size_t i = 0; i < modes.size(); ++i) v[i] = radial(modes[i], r);
    return v;
  }
  std::vector<double> radial_derivs(double r) const {
    std::vector<double> v(modes.size());
    for (size_t i = 0; i < modes.size(); ++i) v[i] = radial_deriv(modes[i], r);
    return v;
  }

  /// Radial moment q_m = int_0^1 R_m(r) r^{l+n-1} dr (closed form); satisfies
  /// q_m * flux_m = 2 in both dimensions.
  double poisson_moment(const EigenPair& m) const { return 2.0 / m.flux; }

  /// Pair factor A_l(cos angle): n=2 the cos(l dtheta) factor with l=0 halving,
  /// n=3 the addition-theorem factor (2l+1)/(4 pi) P_l.
  void angular_all(double u, std::vector<double>& A) const {
    if (n == 2) {
      chebyshev_t_array(trunc.lmax, u, A);
      A[0] = 1.0 / (2.0 * kPi);
      for (int l = 1; l <= trunc.lmax; ++l) A[static_cast<size_t>(l)] /= kPi;
    } else {
      legendre_p_array(trunc.lmax, u, A);
      for (int l = 0; l <= trunc.lmax; ++l) A[static_cast<size_t>(l)] *= (2.0 * l + 1.0) / (4.0 * kPi);
    }
  }

  /// cos of the angle between x and y; 1 if either sits at the origin (the
  /// pair factor is then only used at l = 0, where it is constant).
  double cos_angle(const Vec& x, const Vec& y) const {
    double rx = norm(x), ry = norm(y);
    if (rx == 0.0 || ry == 0.0) return 1.0;
    return std::clamp(dot(x, y) / (rx * ry), -1.0, 1.0);
  }
};

namespace detail_heat {

inline double lommel_radial_l2(int n, int l, double mu) {
  // int_0^1 B_l(mu r)^2 r^{n-1} dr for B = J (n=2) resp. j (n=3) at a zero of B
  double nu = n == 2 ? l : l + 0.5;
  double jp1 = bessel_j(nu + 1.0, mu).value;
  double base = 0.5 * jp1 * jp1;  // int_0^1 J_nu(mu r)^2 r dr
  if (n == 2) return base;
  return kPi / (2.0 * mu) * base;
}

inline const EigenBasis* build_dirichlet(int n, Truncation tr) {
  if (n != 2 && n != 3) throw kernel_error(errc::domain_error, "dirichlet_eigenbasis: n must be 2 or 3");
  if (tr.lmax < 0 || tr.lmax > 100 || tr.kmax < 1 || tr.kmax > 200)
    throw kernel_error(errc::unsupported_order, "dirichlet_eigenbasis: Lmax <= 100, Kmax <= 200");
  auto* b = new EigenBasis;
  b->n = n;
  b->trunc = tr;
  for (int l = 0; l <= tr.lmax; ++l) {
    double nu = n == 2 ? l : l + 0.5;
    for (int k = 1; k <= tr.kmax; ++k) {
      EigenPair m;
      m.l = l;
      m.k = k;
      m.mu = bessel_j_zero(nu, k);
      m.lambda = m.mu * m.mu;
      double jp1 = bessel_j(nu + 1.0, m.mu).value;
      if (n == 2) {
        m.norm_c = std::sqrt(2.0) / std::abs(jp1);
      } else {
        m.norm_c = 2.0 * std::sqrt(m.mu / kPi) / std::abs(jp1);
      }
      m.flux = std::sqrt(2.0) * m.mu * (jp1 > 0 ? 1.0 : -1.0);
      b->modes.push_back(m);
    }
  }
  std::sort(b->modes.begin(), b->modes.end(), [](const EigenPair& a, const EigenPair& c) {
    if (a.lambda != c.lambda) return a.lambda < c.lambda;
    if (a.l != c.l) return a.l < c.l;
    return a.k < c.k;
  });
  b->by_l.assign(static_cast<size_t>(tr.lmax) + 1, {});
  {
    double nu0 = n == 2 ? 0.0 : 0.5;
    double zk = bessel_j_zero(nu0, tr.kmax + 1);
    double nul = n == 2 ? tr.lmax + 1 : tr.lmax + 1.5;
    double zl = bessel_j_zero(nul, 1);
    b->lambda_next_k = zk * zk;
    b->lambda_next_l = zl * zl;
  }
  b->lambda_max = 0.0;
  b->mode_count_weighted = 0;
  for (size_t i = 0; i < b->modes.size(); ++i) {
    const EigenPair& m = b->modes[i];
    b->by_l[static_cast<size_t>(m.l)].push_back(static_cast<int>(i));
    b->lambda_max = std::max(b->lambda_max, m.lambda);
    int mult = n == 2 ? (m.l == 0 ? 1 : 2) : 2 * m.l + 1;
    b->mode_count_weighted += mult;
  }
  // construction-time verification: boundary zero, closed-form norm vs quadrature
  for (const EigenPair& m : b->modes) {
    double r1 = b->radial(m, 1.0);
    if (std::abs(r1) > 1e-11)
      throw kernel_error(errc::rootfind_error, "dirichlet_eigenbasis: R(1) != 0 at l=" +
                                                   std::to_string(m.l) + " k=" + std::to_string(m.k));
    int panels = static_cast<int>(m.mu / 3.0) + 4;
    Rule1D rule = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(panels, 10));
    double q = 0.0;
    for (size_t i = 0; i < rule.x.size(); ++i) {
      double rr = rule.x[i];
      double R = b->radial(m, rr);
      q += rule.w[i] * R * R * std::pow(rr, n - 1);
    }
    if (std::abs(q - 1.0) > 1e-8)
      throw kernel_error(errc::rootfind_error,
                         "dirichlet_eigenbasis: radial norm check failed at l=" + std::to_string(m.l) +
                             " k=" + std::to_string(m.k),
                         q);
  }
  return b;
}

}  // namespace detail_heat

inline const EigenBasis& EigenBasis::dirichlet(int n, Truncation tr) {
  static std::map<std::tuple<int, int, int>, const EigenBasis*> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(n, tr.lmax, tr.kmax);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, detail_heat::build_dirichlet(n, tr)).first;
  return *it->second;
}

/// Dirichlet heat kernel of the unit ball by eigen-series.
inline KernelValue gamma1(const EigenBasis& b, const Vec& x, const Vec& y, double t) {
  b.require_time(t, "gamma1");
  double rx = norm(x), ry = norm(y);
  if (rx > 1.0 + kBoundaryTol || ry > 1.0 + kBoundaryTol)
    throw kernel_error(errc::domain_error, "gamma1: points must lie in the closed ball");
  if (std::abs(rx - 1.0) <= kBoundaryTol || std::abs(ry - 1.0) <= kBoundaryTol)
    return {0.0, 0.0};
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);
  double s = 0.0;
  // the grouping keeps the sum bitwise symmetric under x <-> y
  for (const EigenPair& m : b.modes)
    s += std::exp(-m.lambda * t) * (b.radial(m, rx) * b.radial(m, ry)) * A[static_cast<size_t>(m.l)];
  return {s, b.dropped_tail(t, std::max(rx, ry)) + 1e-15 * std::abs(s)};
}

/// Boundary-flux kernel E_1 = -d/d(nu_y) Gamma_1, term-wise derivative.
inline KernelValue e1(const EigenBasis& b, const Vec& x, const Vec& y, double t) {
  b.require_time(t, "e1");
  require_boundary(y, "e1");
  double rx = norm(x);
  if (rx > 1.0 + kBoundaryTol) throw kernel_error(errc::domain_error, "e1: x must lie in the closed ball");
  if (std::abs(rx - 1.0) <= kBoundaryTol) return {0.0, 0.0};
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);
  double s = 0.0;
  for (const EigenPair& m : b.modes)
    s += std::exp(-m.lambda * t) * b.radial(m, rx) * m.flux * A[static_cast<size_t>(m.l)];
  return {s, std::sqrt(b.lambda_max) * b.dropped_tail(t, rx) + 1e-15 * std::abs(s)};
}

enum class f1_form {
  series,   // term-wise (1 - e^{-lambda t})/lambda, the literal truncation
  poisson,  // P_1 minus the e^{-lambda t}/lambda series: resums the time-
            // independent part exactly and is spectrally accurate for t
            // above t_min
};

/// Accumulated boundary-flux kernel F_1(x,y,t) = int_0^t E_1(x,y,s) ds,
/// closed-form in time per mode.
inline KernelValue f1(const EigenBasis& b, const Vec& x, const Vec& y, double t,
                      f1_form form = f1_form::poisson) {
  b.require_time(t, "f1");
  require_boundary(y, "f1");
  double rx = norm(x);
  if (rx > 1.0 + kBoundaryTol) throw kernel_error(errc::domain_error, "f1: x must lie in the closed ball");
  bool xb = std::abs(rx - 1.0) <= kBoundaryTol;
  if (xb && form == f1_form::series) return {0.0, 0.0};
  if (form == f1_form::poisson) require_interior(x, "f1");
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);
  double s = 0.0;
  if (form == f1_form::series) {
    for (const EigenPair& m : b.modes)
      s += (1.0 - std::exp(-m.lambda * t)) / m.lambda * b.radial(m, rx) * m.flux *
           A[static_cast<size_t>(m.l)];
    return {s, b.mode_count_weighted * (1.0 / b.lambda_next_k +
                                         std::pow(rx, b.trunc.lmax + 1) / b.lambda_next_l) +
                   1e-15 * std::abs(s)};
  }
  for (const EigenPair& m : b.modes)
    s -= std::exp(-m.lambda * t) / m.lambda * b.radial(m, rx) * m.flux * A[static_cast<size_t>(m.l)];
  s += poisson_ball(x, y);
  return {s, b.dropped_tail(t, rx) / b.lambda_next_k + 1e-15 * std::abs(s)};
}

namespace detail_heat {

/// Per-degree coefficient sums c_l = sum_k w(mode) R_m(rho), so kernels
/// against many directions reduce to sum_l c_l A_l(u).
template <typename W>
inline std::vector<double> coeffs_by_l(const EigenBasis& b, const std::vector<double>& rad, W&& w) {
  std::vector<double> c(b.by_l.size(), 0.0);
  for (size_t l = 0; l < b.by_l.size(); ++l)
    for (int idx : b.by_l[l]) c[l] += w(b.modes[static_cast<size_t>(idx)]) * rad[static_cast<size_t>(idx)];
  return c;
}

/// Q(x,y,t) = sum_m e^{-lambda t}/lambda R_m(|x|) flux_m A_l, the series whose
/// t = 0 limit resums exactly to the Poisson kernel. F_1 = P_1 - Q, and
/// E_1 = -dQ/dt term by term.
inline double q_series(const EigenBasis& b, const std::vector<double>& rad, const std::vector<double>& A,
                       double t) {
  auto c = coeffs_by_l(b, rad, [t](const EigenPair& m) { return std::exp(-m.lambda * t) / m.lambda * m.flux; });
  double acc = 0.0;
  for (size_t l = 0; l < c.size(); ++l) acc += c[l] * A[l];
  return acc;
}

/// rho d/drho of the Poisson kernel at z = rho zhat.
inline double radial_dp1(int n, const Vec& z, const Vec& y) {
  double rho = norm(z);
  if (rho == 0.0) return 0.0;
  double d = dist(z, y);
  double rdot = dot(z, y) / rho;  // zhat . y
  double cn = n == 2 ? 1.0 / (2.0 * kPi) : 1.0 / (4.0 * kPi);
  return rho * cn * (-2.0 * rho * std::pow(d, -n) - n * (1.0 - rho * rho) * (rho - rdot) * std::pow(d, -n - 2));
}

}  // namespace detail_heat

enum class h1_algorithm {
  resummed,    // integrate by parts along the flow; the boundary term resums
               // to K_1 exactly, leaving a spectrally convergent remainder
  quadrature,  // literal graded time quadrature of the E_1 series; nodes with
               // t-s below t_min contribute zero with a documented bound
};

/// Flow-convolved flux kernel H_1(x,y,t) = int_0^t E_1(x e^{-s}, y, t-s) ds.
inline KernelValue h1(const EigenBasis& b, const Vec& x, const Vec& y, double t,
                      h1_algorithm alg = h1_algorithm::resummed,
                      QuadratureSpec spec = QuadratureSpec::graded_panels(40, 8, 0.5, grade_end::right)) {
  b.require_time(t, "h1");
  require_boundary(y, "h1");
  double rx = norm(x);
  if (rx > 1.0 + kBoundaryTol) throw kernel_error(errc::domain_error, "h1: x must lie in the closed ball");
  double tmin = b.t_min();
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);

  if (alg == h1_algorithm::quadrature) {
    auto e1_clamped = [&](double s) {
      double tau = t - s;
      if (tau < tmin) return 0.0;
      std::vector<double> rad = b.radial_values(rx * std::exp(-s));
      auto c = detail_heat::coeffs_by_l(b, rad, [tau](const EigenPair& m) {
        return std::exp(-m.lambda * tau) * m.flux;
      });
      double acc = 0.0;
      for (size_t l = 0; l < c.size(); ++l) acc += c[l] * A[l];
      return acc;
    };
    SpecialValue v = integrate_interval(e1_clamped, 0.0, t, spec);
    double clamp_err = t > tmin ? tmin * std::abs(e1_clamped(t - tmin)) : 0.0;
    return {v.value, v.error + clamp_err};
  }

  // H_1 = K_1(x,y,t) - Q(x,y,t) + int_0^t (rho dQ/drho)(x e^{-s}, y, t-s) ds
  auto rdq = [&](double rho, double tau) {
    std::vector<double> radd = b.radial_derivs(rho);
    auto c = detail_heat::coeffs_by_l(b, radd, [tau](const EigenPair& m) {
      return std::exp(-m.lambda * tau) / m.lambda * m.flux;
    });
    double acc = 0.0;
    for (size_t l = 0; l < c.size(); ++l) acc += c[l] * A[l];
    return rho * acc;
  };
  auto integrand = [&](double s) { return rdq(rx * std::exp(-s), t - s); };
  SpecialValue flow = integrate_interval(integrand, 0.0, t - tmin, spec);
  // trapezoid patch for the clamped window, with the exact tau = 0 endpoint
  double patch = 0.0, patch_err = 0.0;
  if (t > tmin) {
    double rho_end = rx * std::exp(-t);
    double a0 = detail_heat::radial_dp1(b.n, rho_end * (rx > 0 ? normalized(x) : x), y);
    double a1 = rdq(rx * std::exp(-(t - tmin)), tmin);
    patch = 0.5 * tmin * (a0 + a1);
    patch_err = 0.5 * tmin * std::abs(a0 - a1);
  }
  double q0 = detail_heat::q_series(b, b.radial_values(rx), A, t);
  double val = k1(x, y, t) - q0 + flow.value + patch;
  return {val, flow.error + patch_err + b.dropped_tail(t, rx) + 1e-15 * std::abs(val)};
}

/// Caloric corrector phi_1^y(x,t) = int_0^t int_{S} E_1(x,z,t-s) Gamma(z,y,s),
/// so that Gamma_1 = Gamma - corrector.
inline KernelValue corrector_phi1(const EigenBasis& b, const Vec& x, const Vec& y, double t,
                                  QuadratureSpec time_spec = QuadratureSpec::graded_panels(40, 8, 0.5,
                                                                                           grade_end::both),
                                  int sphere_order = 0) {
  b.require_time(t, "corrector_phi1");
  require_interior(x, "corrector_phi1");
  require_interior(y, "corrector_phi1");
  if (sphere_order <= 0) sphere_order = b.n == 2 ? 256 : 24;
  SphereRule S = sphere_rule(b.n, sphere_order);
  std::vector<double> radx = b.radial_values(norm(x));
  std::vector<std::vector<double>> Az(S.p.size());
  for (size_t j = 0; j < S.p.size(); ++j) b.angular_all(b.cos_angle(x, S.p[j]), Az[j]);
  double tmin = b.t_min();
  auto slice = [&](double s) {
    double tau = t - s;
    auto c = detail_heat::coeffs_by_l(b, radx, [tau](const EigenPair& m) {
      return std::exp(-m.lambda * tau) * m.flux;
    });
    double acc = 0.0;
    for (size_t j = 0; j < S.p.size(); ++j) {
      double e1v = 0.0;
      for (size_t l = 0; l < c.size(); ++l) e1v += c[l] * Az[j][l];
      acc += S.w[j] * e1v * halfspace::heat_kernel_free(b.n, S.p[j], y, s);
    }
    return acc;
  };
  SpecialValue v = integrate_interval(slice, 0.0, t - tmin, time_spec);
  double clamp_err = tmin * std::abs(slice(t - tmin));
  return {v.value, v.error + clamp_err};
}

/// Envelope factor h of the two-sided Gamma_1 bound.
inline double bound_h(const Vec& x, const Vec& y, double t) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "bound_h: t must be > 0");
  double ax = 1.0 - norm(x), ay = 1.0 - norm(y), d2 = dot(x - y, x - y);
  auto clamp1 = [](double v) { return std::min(1.0, v); };
  return clamp1(ax * ay / t) + clamp1(ax * d2 / t) * clamp1(ay * d2 / t);
}

/// Envelope factor l of the two-sided E_1 bound (y on the boundary).
inline double bound_l(const Vec& x, const Vec& y, double t) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "bound_l: t must be > 0");
  require_boundary(y, "bound_l");
  double ax = 1.0 - norm(x), d2 = dot(x - y, x - y);
  return ax / t + d2 / t * std::min(1.0, ax * d2 / t);
}

/// Volume integrals of kernel series against data, via product quadrature with
/// shared radial mode tables: sum_m w(m) R_m(|x-arg|) [int R_m A_l f].
struct VolumeProjection {
  const EigenBasis* basis;
  Rule1D rad;          // radial nodes/weights on [0,1], r^{n-1} NOT folded
  SphereRule ang;
  std::vector<std::vector<double>> R;  // [mode][radial node]

  VolumeProjection(const EigenBasis& b, int radial_panels = 40, int radial_order = 8,
                   int sphere_order = 0)
      : basis(&b),
        rad(make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(radial_panels, radial_order))),
        ang(sphere_rule(b.n, sphere_order > 0 ? sphere_order : (b.n == 2 ? 256 : 24))) {
    R.resize(b.modes.size());
    for (size_t i = 0; i < rad.x.size(); ++i) {
      std::vector<double> v = b.radial_values(rad.x[i]);
      for (size_t m = 0; m < v.size(); ++m) {
        if (i == 0) R[m].resize(rad.x.size());
        R[m][i] = v[m];
      }
    }
  }

  /// coefficients F_m = int_{B} R_m(|y|) A_l(cos(x^,y)) f(y) dy for a fixed
  /// reference direction xhat (pass any unit vector when x = 0).
  std::vector<double> project(const Vec& xhat, const std::function<double(const Vec&)>& f) const {
    const EigenBasis& b = *basis;
    size_t nl = b.by_l.size(), nr = rad.x.size(), na = ang.p.size();
    // G[l][i] = sum_j w_j A_l(xhat . omega_j) f(r_i omega_j)
    std::vector<std::vector<double>> G(nl, std::vector<double>(nr, 0.0));
    std::vector<double> A;
    for (size_t j = 0; j < na; ++j) {
      b.angular_all(b.cos_angle(xhat, ang.p[j]), A);
      for (size_t i = 0; i < nr; ++i) {
        double fv = f(rad.x[i] * ang.p[j]) * ang.w[j];
        for (size_t l = 0; l < nl; ++l) G[l][i] += A[l] * fv;
      }
    }
    std::vector<double> F(b.modes.size(), 0.0);
    for (size_t m = 0; m < b.modes.size(); ++m) {
      size_t l = static_cast<size_t>(b.modes[m].l);
      double acc = 0.0;
      for (size_t i = 0; i < nr; ++i)
        acc += rad.w[i] * std::pow(rad.x[i], b.n - 1) * R[m][i] * G[l][i];
      F[m] = acc;
    }
    return F;
  }
};

/// int_{B_1} Gamma_1(x,y,t) dy by honest product quadrature of the series.
inline SpecialValue gamma1_mass(const EigenBasis& b, const Vec& x, double t, int radial_panels = 40,
                                int radial_order = 8, int sphere_order = 0) {
  b.require_time(t, "gamma1_mass");
  require_interior(x, "gamma1_mass");
  VolumeProjection vp(b, radial_panels, radial_order, sphere_order);
  Vec xhat = norm(x) > 0 ? normalized(x) : (b.n == 2 ? vec2(1, 0) : vec3(0, 0, 1));
  std::vector<double> F = vp.project(xhat, [](const Vec&) { return 1.0; });
  std::vector<double> radx = b.radial_values(norm(x));
  double s = 0.0;
  for (size_t m = 0; m < b.modes.size(); ++m)
    s += std::exp(-b.modes[m].lambda * t) * radx[m] * F[m];
  return {s, b.dropped_tail(t, norm(x))};
}

/// int_{\partial B_1} F_1(x,y,t) dsigma_y by sphere quadrature.
inline SpecialValue f1_mass(const EigenBasis& b, const Vec& x, double t, int sphere_order = 0,
                            f1_form form = f1_form::poisson) {
  if (sphere_order <= 0) sphere_order = b.n == 2 ? 256 : 32;
  SphereRule S = sphere_rule(b.n, sphere_order);
  double s = 0.0;
  for (size_t j = 0; j < S.p.size(); ++j) s += S.w[j] * f1(b, x, S.p[j], t, form).value;
  return {s, b.dropped_tail(t, norm(x))};
}

/// Right side of the heat decomposition identity for a test function f:
/// initial volume term + E_1 boundary history term + caloric-defect term.
/// The boundary history is integrated by parts in time so its t-independent
/// part resums to the Poisson kernel; f must be evaluable for s slightly
/// outside [0, t] (the time derivative is taken by central differences).
inline KernelValue decompose_reconstruct(const EigenBasis& b,
                                         const std::function<double(const Vec&, double)>& f,
                                         const std::function<double(const Vec&, double)>& dt_minus_lap_f,
                                         const Vec& x, double t,
                                         QuadratureSpec time_spec = QuadratureSpec::graded_panels(
                                             40, 8, 0.5, grade_end::both),
                                         int sphere_order = 0, int radial_panels = 40) {
  b.require_time(t, "decompose_reconstruct");
  require_interior(x, "decompose_reconstruct");
  if (sphere_order <= 0) sphere_order = b.n == 2 ? 256 : 24;
  double rx = norm(x), tmin = b.t_min();
  Vec xhat = rx > 0 ? normalized(x) : (b.n == 2 ? vec2(1, 0) : vec3(0, 0, 1));
  std::vector<double> radx = b.radial_values(rx);

  VolumeProjection vp(b, radial_panels, 8, sphere_order);
  std::vector<double> F0 = vp.project(xhat, [&](const Vec& y) { return f(y, 0.0); });
  double initial = 0.0;
  for (size_t m = 0; m < b.modes.size(); ++m)
    initial += std::exp(-b.modes[m].lambda * t) * radx[m] * F0[m];

  SphereRule S = sphere_rule(b.n, sphere_order);
  std::vector<std::vector<double>> Az(S.p.size());
  std::vector<double> P1v(S.p.size());
  for (size_t j = 0; j < S.p.size(); ++j) {
    b.angular_all(b.cos_angle(x, S.p[j]), Az[j]);
    P1v[j] = poisson_ball(x, S.p[j]);
  }
  const double dlt = 1e-5;
  auto fs = [&](const Vec& y, double s) { return (f(y, s + dlt) - f(y, s - dlt)) / (2.0 * dlt); };
  auto q_at = [&](size_t j, double tau) {
    auto c = detail_heat::coeffs_by_l(b, radx, [tau](const EigenPair& m) {
      return std::exp(-m.lambda * tau) / m.lambda * m.flux;
    });
    double acc = 0.0;
    for (size_t l = 0; l < c.size(); ++l) acc += c[l] * Az[j][l];
    return acc;
  };
  // int_0^t oint E_1(x,y,tau) f(y,t-tau) = oint P_1 f(.,t) - oint Q(t) f(.,0)
  //                                        - int_0^t oint Q(tau) f_s(.,t-tau)
  double bdry_ends = 0.0;
  {
    auto ct = detail_heat::coeffs_by_l(b, radx, [t](const EigenPair& m) {
      return std::exp(-m.lambda * t) / m.lambda * m.flux;
    });
    for (size_t j = 0; j < S.p.size(); ++j) {
      double qt = 0.0;
      for (size_t l = 0; l < ct.size(); ++l) qt += ct[l] * Az[j][l];
      bdry_ends += S.w[j] * (P1v[j] * f(S.p[j], t) - qt * f(S.p[j], 0.0));
    }
  }
  auto bdry_slice = [&](double tau) {
    auto c = detail_heat::coeffs_by_l(b, radx, [tau](const EigenPair& m) {
      return std::exp(-m.lambda * tau) / m.lambda * m.flux;
    });
    double acc = 0.0;
    for (size_t j = 0; j < S.p.size(); ++j) {
      double qv = 0.0;
      for (size_t l = 0; l < c.size(); ++l) qv += c[l] * Az[j][l];
      acc += S.w[j] * qv * fs(S.p[j], t - tau);
    }
    return acc;
  };
  SpecialValue conv = integrate_interval(bdry_slice, tmin, t, time_spec);
  double patch = 0.0, patch_err = 0.0;
  for (size_t j = 0; j < S.p.size(); ++j) {
    double a0 = P1v[j], a1 = q_at(j, tmin);
    double w = S.w[j] * fs(S.p[j], t);
    patch += 0.5 * tmin * (a0 + a1) * w;
    patch_err += 0.5 * tmin * std::abs((a0 - a1) * w);
  }
  SpecialValue bdry{bdry_ends - conv.value - patch, conv.error + patch_err};

  double defect = 0.0, defect_err = 0.0;
  if (dt_minus_lap_f) {
    // tau = t - s; the e^{-lambda tau} layers demand grading toward tau = 0
    auto vol_slice = [&](double tau) {
      std::vector<double> Fs = vp.project(xhat, [&](const Vec& y) { return dt_minus_lap_f(y, t - tau); });
      double acc = 0.0;
      for (size_t m = 0; m < b.modes.size(); ++m)
        acc += std::exp(-b.modes[m].lambda * tau) * radx[m] * Fs[m];
      return acc;
    };
    QuadratureSpec vs = QuadratureSpec::graded_panels(time_spec.panels, time_spec.order, 0.5, grade_end::left);
    SpecialValue d = integrate_interval(vol_slice, tmin, t, vs);
    double a0 = 0.0;  // tau = 0 endpoint: plain projection of the defect at s = t
    {
      std::vector<double> Ft = vp.project(xhat, [&](const Vec& y) { return dt_minus_lap_f(y, t); });
      for (size_t m = 0; m < b.modes.size(); ++m) a0 += radx[m] * Ft[m];
    }
    double a1 = vol_slice(tmin);
    defect = d.value + 0.5 * tmin * (a0 + a1);
    defect_err = d.error + 0.5 * tmin * std::abs(a0 - a1);
  }
  return {initial + bdry.value + defect, bdry.error + defect_err + 2.0 * b.dropped_tail(t, rx)};
}

/// Solution of the heat problem whose boundary trace is frozen at phi_b:
/// u = int_{S} F_1 phi_b dsigma + int_B Gamma_1 phi_i dy.
inline KernelValue dirichlet_dynamical_flat_solution(const EigenBasis& b, const BoundaryFunction& phi_b,
                                                     const std::function<double(const Vec&)>& phi_i,
                                                     const Vec& x, double t, int sphere_order = 0,
                                                     int radial_panels = 40,
                                                     f1_form form = f1_form::poisson) {
  b.require_time(t, "dirichlet_dynamical_flat_solution");
  require_interior(x, "dirichlet_dynamical_flat_solution");
  if (sphere_order <= 0) sphere_order = b.n == 2 ? 256 : 24;
  SphereRule S = sphere_rule(b.n, sphere_order);
  double bpart = 0.0;
  for (size_t j = 0; j < S.p.size(); ++j) bpart += S.w[j] * f1(b, x, S.p[j], t, form).value * phi_b(S.p[j]);
  double vpart = 0.0;
  if (phi_i) {
    VolumeProjection vp(b, radial_panels, 8, sphere_order);
    Vec xhat = norm(x) > 0 ? normalized(x) : (b.n == 2 ? vec2(1, 0) : vec3(0, 0, 1));
    std::vector<double> F = vp.project(xhat, phi_i);
    std::vector<double> radx = b.radial_values(norm(x));
    for (size_t m = 0; m < b.modes.size(); ++m)
      vpart += std::exp(-b.modes[m].lambda * t) * radx[m] * F[m];
  }
  return {bpart + vpart, 2.0 * b.dropped_tail(t, norm(x))};
}

/// JSON eigen-table of the basis (one row per (l,k) family).
inline nlohmann::json eigenbasis_json(const EigenBasis& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EigenPair& m : b.modes) {
    rows.push_back({{"n", b.n},
                    {"l", m.l},
                    {"k", m.k},
                    {"lambda", m.lambda},
                    {"norm-constant", m.norm_c},
                    {"boundary-flux", m.flux}});
  }
  return rows;
}

}  // namespace dynakernel::ball
