#pragma once

#include "quadrature.hpp"

namespace dynakernel::ball {

inline constexpr double kBoundaryTol = 1e-12;

inline bool is_boundary(const Vec& x) { return std::abs(norm(x) - 1.0) <= kBoundaryTol; }
inline bool is_interior(const Vec& x) { return norm(x) < 1.0 - kBoundaryTol; }

inline void require_interior(const Vec& x, const char* who) {
  if (!is_interior(x)) throw kernel_error(errc::domain_error, std::string(who) + ": point must be interior");
}
inline void require_boundary(const Vec& y, const char* who) {
  if (!is_boundary(y)) throw kernel_error(errc::domain_error, std::string(who) + ": point must lie on the unit sphere");
}

/// x~ = x/|x|^2, the inverse point across the unit sphere.
inline Vec inversion(const Vec& x) {
  double r2 = dot(x, x);
  if (r2 == 0.0) throw kernel_error(errc::domain_error, "inversion: undefined at the origin");
  return (1.0 / r2) * x;
}

namespace detail {

inline double phi_n(int n, double r) {
  if (r <= 0.0) throw kernel_error(errc::domain_error, "green_ball: singular evaluation");
  return n == 2 ? -std::log(r) / (2.0 * kPi) : 1.0 / (4.0 * kPi * r);
}

}  // namespace detail

/// Dirichlet Green's function of the unit ball,
/// G_1(x,y) = Phi(y-x) - Phi(|x|(y-x~)); the image factor is assembled as
/// |x| y - x/|x| so the origin limit needs no special inversion handling.
inline double green_ball(const Vec& x, const Vec& y) {
  int n = x.n;
  require_interior(x, "green_ball");
  if (norm(y) > 1.0 + kBoundaryTol)
    throw kernel_error(errc::domain_error, "green_ball: y must lie in the closed ball");
  double r = norm(x);
  double direct = detail::phi_n(n, dist(x, y));
  if (r == 0.0) return direct - detail::phi_n(n, 1.0);
  Vec image = r * y - (1.0 / r) * x;
  return direct - detail::phi_n(n, norm(image));
}

/// Poisson kernel of the unit ball, c_n (1-|x|^2)/|x-y|^n with unit sphere mass.
inline double poisson_ball(const Vec& x, const Vec& y) {
  int n = x.n;
  require_interior(x, "poisson_ball");
  require_boundary(y, "poisson_ball");
  double cn = n == 2 ? 1.0 / (2.0 * kPi) : 1.0 / (4.0 * kPi);
  double d = dist(x, y);
  if (d == 0.0) throw kernel_error(errc::domain_error, "poisson_ball: singular at x = y");
  return cn * (1.0 - dot(x, x)) / std::pow(d, n);
}

/// Poisson kernel along the contracting flow: K_1(x,y,t) = P_1(x e^{-t}, y).
inline double k1(const Vec& x, const Vec& y, double t) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "k1: t must be > 0");
  if (norm(x) > 1.0 + kBoundaryTol)
    throw kernel_error(errc::domain_error, "k1: x must lie in the closed ball");
  return poisson_ball(std::exp(-t) * x, y);
}

/// Green's function along the contracting flow: J_1(x,y,t) = G_1(x e^{-t}, y).
inline double j1(const Vec& x, const Vec& y, double t) {
  if (t < 0.0) throw kernel_error(errc::domain_error, "j1: t must be >= 0");
  if (norm(x) > 1.0 + kBoundaryTol)
    throw kernel_error(errc::domain_error, "j1: x must lie in the closed ball");
  return green_ball(std::exp(-t) * x, y);
}

enum class smoothness { continuous, smooth };

/// Scalar data on the unit sphere.
struct BoundaryFunction {
  std::function<double(const Vec&)> f;
  smoothness tag = smoothness::smooth;
  double operator()(const Vec& y) const { return f(y); }
  static BoundaryFunction constant(double c) {
    return {[c](const Vec&) { return c; }, smoothness::smooth};
  }
};

/// C^2 interior data with its (negative) Laplacian supplied analytically.
struct InteriorFunctionC2 {
  std::function<double(const Vec&)> f;
  std::function<double(const Vec&)> neg_laplacian;
};

/// Harmonic extension of boundary data by Poisson-kernel quadrature.
inline KernelValue harmonic_extension(const BoundaryFunction& phi_b, const Vec& x, int sphere_order = 0) {
  require_interior(x, "harmonic_extension");
  if (sphere_order <= 0) sphere_order = x.n == 2 ? 256 : 32;
  auto value_at = [&](int order) {
    SphereRule s = sphere_rule(x.n, order);
    return apply_sphere(s, [&](const Vec& y) { return poisson_ball(x, y) * phi_b(y); });
  };
  double coarse = value_at(sphere_order);
  double fine = value_at(2 * sphere_order);
  return {fine, std::abs(fine - coarse) + 4e-16 * std::abs(fine)};
}

/// Solution of the dynamical-boundary Laplace problem with data phi_b:
/// u(x,t) = integral of K_1(x,y,t) phi_b(y) over the sphere.
inline KernelValue laplace_dynamical_solution(const BoundaryFunction& phi_b, const Vec& x, double t,
                                              int sphere_order = 0) {
  if (!(t > 0.0)) throw kernel_error(errc::domain_error, "laplace_dynamical_solution: t must be > 0");
  if (norm(x) > 1.0 + kBoundaryTol)
    throw kernel_error(errc::domain_error, "laplace_dynamical_solution: x must lie in the closed ball");
  return harmonic_extension(phi_b, std::exp(-t) * x, sphere_order);
}

/// Interior-data solution w(x,t) = integral of J_1(x,y,t)(-Delta phi_i)(y) dy.
/// The polar rule about the flow point absorbs the Green-function singularity.
inline KernelValue laplace_dynamical_interior_solution(const InteriorFunctionC2& phi_i, const Vec& x,
                                                       double t, int radial_panels = 24,
                                                       int radial_order = 8, int sphere_order = 0) {
  if (t < 0.0) throw kernel_error(errc::domain_error, "laplace_dynamical_interior_solution: t must be >= 0");
  if (!phi_i.neg_laplacian)
    throw kernel_error(errc::config_error, "laplace_dynamical_interior_solution: -Delta phi_i must be supplied");
  if (sphere_order <= 0) sphere_order = x.n == 2 ? 96 : 24;
  Vec c = std::exp(-t) * x;
  auto value_at = [&](int rp, int so) {
    BallRule b = ball_rule_about(c, rp, radial_order, so);
    return apply_ball(b, [&](const Vec& y) { return green_ball(c, y) * phi_i.neg_laplacian(y); });
  };
  double coarse = value_at(radial_panels, sphere_order);
  double fine = value_at(radial_panels + 8, sphere_order * 2);
  return {fine, std::abs(fine - coarse) + 4e-16 * std::abs(fine)};
}

}  // namespace dynakernel::ball
