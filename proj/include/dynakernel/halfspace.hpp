#pragma once

#include "quadrature.hpp"

namespace dynakernel::halfspace {

/// Fundamental solution of the Laplace equation: -(1/2pi) ln|x| for n=2,
/// 1/(4pi |x|) for n=3 (constant fixed by unit flux through spheres).
inline double phi_laplace(int n, const Vec& x) {
  double r = norm(x);
  if (r == 0.0) throw kernel_error(errc::domain_error, "phi_laplace: singular at x = 0");
  if (n == 2) return -std::log(r) / (2.0 * kPi);
  if (n == 3) return 1.0 / (4.0 * kPi * r);
  throw kernel_error(errc::domain_error, "phi_laplace: n must be 2 or 3");
}

/// x* = (x', -x_n), the reflection through the boundary hyperplane.
inline Vec reflect(const Vec& x) {
  Vec r = x;
  r[r.n - 1] = -r[r.n - 1];
  return r;
}

inline void require_upper(const Vec& x, const char* who, bool strict = true) {
  double xn = x[x.n - 1];
  if (xn < 0.0 || (strict && xn == 0.0))
    throw kernel_error(errc::domain_error, std::string(who) + ": point must lie in the upper half-space");
}

/// Dirichlet Green's function of the upper half-space.
inline double green_laplace(const Vec& x, const Vec& y) {
  require_upper(x, "green_laplace");
  require_upper(y, "green_laplace");
  if (dist(x, y) == 0.0) throw kernel_error(errc::domain_error, "green_laplace: singular at x = y");
  return phi_laplace(x.n, y - x) - phi_laplace(x.n, y - reflect(x));
}

/// Poisson kernel c_n x_n / |x-y|^n on the boundary plane, unit mass in y.
inline double poisson(const Vec& x, const Vec& y) {
  require_upper(x, "poisson");
  if (std::abs(y[y.n - 1]) > 1e-12)
    throw kernel_error(errc::domain_error, "poisson: y must lie on the boundary plane");
  double cn = x.n == 2 ? 1.0 / kPi : 1.0 / (2.0 * kPi);
  double d = dist(x, y);
  if (d == 0.0) throw kernel_error(errc::domain_error, "poisson: singular at x = y");
  return cn * x[x.n - 1] / std::pow(d, x.n);
}

/// Kernel of the dynamical boundary problem: the Poisson kernel evaluated on
/// the upward-drifting path, K_+(x,y,t) = P_+(x + t e_n, y).
inline double k_plus(const Vec& x, const Vec& y, double t) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "k_plus: t must be > 0");
  require_upper(x, "k_plus", false);
  Vec z = x;
  z[z.n - 1] += t;
  return poisson(z, y);
}

/// Free-space heat kernel (4 pi t)^{-n/2} exp(-|x-y|^2 / 4t).
inline double heat_kernel_free(int n, const Vec& x, const Vec& y, double t) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "heat_kernel_free: t must be > 0");
  if (n != 2 && n != 3) throw kernel_error(errc::domain_error, "heat_kernel_free: n must be 2 or 3");
  double q = dot(x - y, x - y) / (4.0 * t);
  if (q > 745.0) return 0.0;
  return std::exp(-q) / std::pow(4.0 * kPi * t, 0.5 * n);
}

/// Dirichlet heat kernel of the half-space by the reflection principle.
inline double gamma_plus(const Vec& x, const Vec& y, double t) {
  require_upper(x, "gamma_plus", false);
  require_upper(y, "gamma_plus", false);
  return heat_kernel_free(x.n, x, y, t) - heat_kernel_free(x.n, x, reflect(y), t);
}

enum class heat_form { image, difference };

namespace detail {

// d/dz_n Gamma(z, w, tau) = -(z_n - w_n)/(2 tau) Gamma(z, w, tau)
inline double dn_gamma(const Vec& z, const Vec& w, double tau) {
  return -(z[z.n - 1] - w[w.n - 1]) / (2.0 * tau) * heat_kernel_free(z.n, z, w, tau);
}

}  // namespace detail

/// Green's function of the heat equation with dynamical boundary condition on
/// the upper half-space. Both forms integrate the same Gaussian expression;
/// `difference` assembles it from normal derivatives of Gamma_+ acting on both
/// arguments, `image` from the single reflected-source derivative.
inline KernelValue g_plus_heat(const Vec& x, const Vec& y, double t,
                               QuadratureSpec spec = QuadratureSpec::uniform_panels(20, 8),
                               heat_form form = heat_form::image) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "g_plus_heat: t must be > 0");
  require_upper(x, "g_plus_heat", false);
  require_upper(y, "g_plus_heat", false);
  int nd = x.n;
  auto integrand = [&](double s) {
    Vec z = x;
    z[nd - 1] += s;
    double tau = t - s;
    if (tau <= 0.0) return 0.0;
    if (form == heat_form::image) return -2.0 * detail::dn_gamma(z, reflect(y), tau);
    double dxn = detail::dn_gamma(z, y, tau) - detail::dn_gamma(z, reflect(y), tau);
    double dyn = -detail::dn_gamma(z, y, tau) + (y[nd - 1] + z[nd - 1]) / (2.0 * tau) *
                                                    heat_kernel_free(nd, z, reflect(y), tau);
    return dxn + dyn;
  };
  SpecialValue tail = integrate_interval(integrand, 0.0, t, spec);
  return {gamma_plus(x, y, t) + tail.value, tail.error};
}

struct HeatMass {
  double boundary = 0.0;
  double volume = 0.0;
  double tail_bound = 0.0;
  double total() const { return boundary + volume; }
};

/// Truncated-domain mass identity for g_plus_heat: integral of the literal
/// boundary trace over the plane plus the volume integral over the half-space.
/// The truncation radius covers the drifted Gaussian cores out to z_sigma
/// standard deviations; the discarded mass bound is reported in tail_bound.
inline HeatMass g_plus_heat_mass(const Vec& x, double t, int nodes_per_dim = 96,
                                 QuadratureSpec s_spec = QuadratureSpec::uniform_panels(20, 8),
                                 double z_sigma = 8.0) {
  require_upper(x, "g_plus_heat_mass", false);
  int nd = x.n;
  double spread = z_sigma * std::sqrt(2.0 * t) + t;
  int panels = std::max(4, nodes_per_dim / 8);
  Rule1D tan1 = make_rule(x[0] - spread, x[0] + spread, QuadratureSpec::uniform_panels(panels, 8));
  Rule1D tan2;
  if (nd == 3)
    tan2 = make_rule(x[1] - spread, x[1] + spread, QuadratureSpec::uniform_panels(panels, 8));
  Rule1D vert = make_rule(0.0, x[nd - 1] + spread,
                          QuadratureSpec::uniform_panels(panels, 8));
  HeatMass m;
  auto eval = [&](const Vec& y) { return g_plus_heat(x, y, t, s_spec).value; };
  if (nd == 2) {
    for (size_t i = 0; i < tan1.x.size(); ++i) {
      m.boundary += tan1.w[i] * eval(vec2(tan1.x[i], 0.0));
      for (size_t j = 0; j < vert.x.size(); ++j)
        m.volume += tan1.w[i] * vert.w[j] * eval(vec2(tan1.x[i], vert.x[j]));
    }
  } else {
    for (size_t i = 0; i < tan1.x.size(); ++i)
      for (size_t k = 0; k < tan2.x.size(); ++k) {
        m.boundary += tan1.w[i] * tan2.w[k] * eval(vec3(tan1.x[i], tan2.x[k], 0.0));
        for (size_t j = 0; j < vert.x.size(); ++j)
          m.volume += tan1.w[i] * tan2.w[k] * vert.w[j] * eval(vec3(tan1.x[i], tan2.x[k], vert.x[j]));
      }
  }
  m.tail_bound = 4.0 * nd * std::erfc(z_sigma / std::sqrt(2.0));
  return m;
}

}  // namespace dynakernel::halfspace
