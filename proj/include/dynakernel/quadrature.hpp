#pragma once

#include <map>
#include <mutex>

#include "common.hpp"

namespace dynakernel {

enum class quad_kind {
  gauss,    // single Gauss-Legendre panel
  graded,   // geometric panels refined toward one or both endpoints, GL per panel
  uniform,  // equal panels, GL per panel
};

enum class grade_end { left, right, both };

struct QuadratureSpec {
  quad_kind kind = quad_kind::gauss;
  int order = 32;       // GL points (per panel for composite kinds)
  int panels = 40;      // composite kinds only
  double ratio = 0.5;   // geometric grading ratio in (0,1)
  grade_end toward = grade_end::right;

  static QuadratureSpec gauss(int order_ = 32) { return {quad_kind::gauss, order_, 1, 0.5, grade_end::right}; }
  static QuadratureSpec graded_panels(int panels_ = 40, int order_ = 8, double ratio_ = 0.5,
                                      grade_end toward_ = grade_end::right) {
    return {quad_kind::graded, order_, panels_, ratio_, toward_};
  }
  static QuadratureSpec uniform_panels(int panels_, int order_ = 8) {
    return {quad_kind::uniform, order_, panels_, 0.5, grade_end::right};
  }
};

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1]; Newton on the Legendre recurrence.
inline Rule1D gauss_legendre_unit(int order) {
  if (order < 1 || order > 1024)
    throw kernel_error(errc::unsupported_order, "gauss-legendre order must be in [1,1024]");
  static std::map<int, Rule1D> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
  }
  Rule1D r;
  r.x.resize(static_cast<size_t>(order));
  r.w.resize(static_cast<size_t>(order));
  int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    r.x[static_cast<size_t>(i)] = -z;
    r.x[static_cast<size_t>(order - 1 - i)] = z;
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    r.w[static_cast<size_t>(i)] = w;
    r.w[static_cast<size_t>(order - 1 - i)] = w;
  }
  std::lock_guard<std::mutex> lock(mu);
  cache[order] = r;
  return r;
}

inline void append_panel(Rule1D& out, double a, double b, int order) {
  Rule1D u = gauss_legendre_unit(order);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (size_t i = 0; i < u.x.size(); ++i) {
    out.x.push_back(mid + half * u.x[i]);
    out.w.push_back(half * u.w[i]);
  }
}

/// Panel edges for a geometric grading of [a,b] with `panels` panels whose
/// widths shrink by `ratio` toward b.
inline std::vector<double> graded_edges_toward_right(double a, double b, int panels, double ratio) {
  std::vector<double> e(static_cast<size_t>(panels) + 1);
  double total = 0.0, wgt = 1.0;
  for (int i = 0; i < panels; ++i) {
    total += wgt;
    wgt *= ratio;
  }
  e[0] = a;
  double pos = 0.0;
  wgt = 1.0;
  for (int i = 0; i < panels; ++i) {
    pos += wgt;
    wgt *= ratio;
    e[static_cast<size_t>(i) + 1] = a + (b - a) * pos / total;
  }
  e[static_cast<size_t>(panels)] = b;
  return e;
}

}  // namespace detail

/// Nodes and weights for `spec` on [a,b].
inline Rule1D make_rule(double a, double b, const QuadratureSpec& spec) {
  if (!(b > a)) throw kernel_error(errc::domain_error, "make_rule: empty interval");
  if (spec.kind != quad_kind::gauss) {
    if (spec.panels < 1 || spec.panels > 4096)
      throw kernel_error(errc::unsupported_order, "panel count must be in [1,4096]");
    if (spec.kind == quad_kind::graded && !(spec.ratio > 0.0 && spec.ratio < 1.0))
      throw kernel_error(errc::unsupported_order, "grading ratio must be in (0,1)");
  }
  Rule1D out;
  switch (spec.kind) {
    case quad_kind::gauss:
      detail::append_panel(out, a, b, spec.order);
      break;
    case quad_kind::uniform: {
      double h = (b - a) / spec.panels;
      for (int i = 0; i < spec.panels; ++i)
        detail::append_panel(out, a + i * h, a + (i + 1) * h, spec.order);
      break;
    }
    case quad_kind::graded: {
      std::vector<double> e;
      if (spec.toward == grade_end::right) {
        e = detail::graded_edges_toward_right(a, b, spec.panels, spec.ratio);
      } else if (spec.toward == grade_end::left) {
        auto rev = detail::graded_edges_toward_right(a, b, spec.panels, spec.ratio);
        e.resize(rev.size());
        for (size_t i = 0; i < rev.size(); ++i) e[i] = a + b - rev[rev.size() - 1 - i];
      } else {
        int half = std::max(1, spec.panels / 2);
        double mid = 0.5 * (a + b);
        auto left = detail::graded_edges_toward_right(mid, b, half, spec.ratio);
        e.resize(0);
        for (size_t i = left.size(); i-- > 0;) e.push_back(a + b - left[i]);
        for (size_t i = 1; i < left.size(); ++i) e.push_back(left[i]);
      }
      for (size_t i = 0; i + 1 < e.size(); ++i) detail::append_panel(out, e[i], e[i + 1], spec.order);
      break;
    }
  }
  return out;
}

template <typename F>
double apply_rule(const Rule1D& r, F&& f) {
  double s = 0.0;
  for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

/// Integral of f over [a,b] with an error estimate from order refinement.
template <typename F>
SpecialValue integrate_interval(F&& f, double a, double b, QuadratureSpec spec = {}) {
  double coarse = apply_rule(make_rule(a, b, spec), f);
  QuadratureSpec fine = spec;
  fine.order = std::min(2 * spec.order, 1024);
  double refined = apply_rule(make_rule(a, b, fine), f);
  double err = std::abs(refined - coarse);
  return {refined, std::max(err, 4e-16 * std::abs(refined))};
}

/// Equal-weight periodic trapezoid rule on [0, 2*pi).
inline Rule1D periodic_rule(int m) {
  if (m < 4 || m > 1 << 16)
    throw kernel_error(errc::unsupported_order, "periodic rule size must be in [4,65536]");
  Rule1D r;
  r.x.resize(static_cast<size_t>(m));
  r.w.assign(static_cast<size_t>(m), 2.0 * kPi / m);
  for (int j = 0; j < m; ++j) r.x[static_cast<size_t>(j)] = 2.0 * kPi * j / m;
  return r;
}

struct SphereRule {
  std::vector<Vec> p;      // unit vectors
  std::vector<double> w;   // sums to the sphere measure (2*pi or 4*pi)
};

/// Unit-sphere rule: equispaced angles for n=2; Gauss in the polar cosine
/// times trapezoid in azimuth for n=3 (order nodes polar, 2*order azimuthal).
inline SphereRule sphere_rule(int n, int order) {
  SphereRule s;
  if (n == 2) {
    Rule1D c = periodic_rule(order);
    s.p.resize(c.x.size());
    s.w = c.w;
    for (size_t j = 0; j < c.x.size(); ++j) s.p[j] = vec2(std::cos(c.x[j]), std::sin(c.x[j]));
  } else if (n == 3) {
    Rule1D u = make_rule(-1.0, 1.0, QuadratureSpec::gauss(order));
    Rule1D az = periodic_rule(2 * order);
    s.p.reserve(u.x.size() * az.x.size());
    s.w.reserve(u.x.size() * az.x.size());
    for (size_t i = 0; i < u.x.size(); ++i) {
      double su = std::sqrt(std::max(0.0, 1.0 - u.x[i] * u.x[i]));
      for (size_t j = 0; j < az.x.size(); ++j) {
        s.p.push_back(vec3(su * std::cos(az.x[j]), su * std::sin(az.x[j]), u.x[i]));
        s.w.push_back(u.w[i] * az.w[j]);
      }
    }
  } else {
    throw kernel_error(errc::domain_error, "sphere_rule: n must be 2 or 3");
  }
  return s;
}

struct BallRule {
  std::vector<Vec> p;
  std::vector<double> w;   // includes the volume element
};

/// Product rule on the unit ball: composite radial GL (r^{n-1} folded into the
/// weights) times a sphere rule. Uniform radial panels resolve oscillatory
/// radial profiles.
inline BallRule ball_rule(int n, int radial_panels, int radial_order, int sphere_order) {
  Rule1D rad = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(radial_panels, radial_order));
  SphereRule ang = sphere_rule(n, sphere_order);
  BallRule b;
  b.p.reserve(rad.x.size() * ang.p.size());
  b.w.reserve(rad.x.size() * ang.p.size());
  for (size_t i = 0; i < rad.x.size(); ++i) {
    double r = rad.x[i];
    double jac = rad.w[i] * (n == 2 ? r : r * r);
    for (size_t j = 0; j < ang.p.size(); ++j) {
      b.p.push_back(r * ang.p[j]);
      b.w.push_back(jac * ang.w[j]);
    }
  }
  return b;
}

/// Polar rule about an interior point x: y = x + r*omega with r graded toward
/// the singular origin. Integrates functions with an integrable singularity
/// at y = x over the unit ball.
inline BallRule ball_rule_about(const Vec& x, int radial_panels, int radial_order, int sphere_order) {
  if (norm(x) >= 1.0) throw kernel_error(errc::domain_error, "ball_rule_about: x must be interior");
  SphereRule ang = sphere_rule(x.n, sphere_order);
  BallRule b;
  for (size_t j = 0; j < ang.p.size(); ++j) {
    const Vec& om = ang.p[j];
    double xo = dot(x, om);
    double rho = -xo + std::sqrt(std::max(0.0, 1.0 - dot(x, x) + xo * xo));
    Rule1D rad = make_rule(0.0, rho, QuadratureSpec::graded_panels(radial_panels, radial_order, 0.5,
                                                                   grade_end::left));
    for (size_t i = 0; i < rad.x.size(); ++i) {
      double r = rad.x[i];
      b.p.push_back(x + r * om);
      b.w.push_back(ang.w[j] * rad.w[i] * (x.n == 2 ? r : r * r));
    }
  }
  return b;
}

template <typename F>
double apply_sphere(const SphereRule& s, F&& f) {
  double acc = 0.0;
  for (size_t i = 0; i < s.p.size(); ++i) acc += s.w[i] * f(s.p[i]);
  return acc;
}

template <typename F>
double apply_ball(const BallRule& b, F&& f) {
  double acc = 0.0;
  for (size_t i = 0; i < b.p.size(); ++i) acc += b.w[i] * f(b.p[i]);
  return acc;
}

}  // namespace dynakernel
