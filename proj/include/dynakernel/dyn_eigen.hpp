#pragma once

#include <functional>

#include <json.hpp>

#include "ball_heat.hpp"

namespace dynakernel::wentzell {

using ball::Truncation;

/// One mode family of the dynamical-boundary eigenproblem on the unit ball:
/// -Delta psi = lambda psi in B_1 with d_nu psi = lambda psi on the sphere.
/// Radial profile R(r) = norm_c * B_l(mu r) (B = J for n=2, spherical j for
/// n=3), normalized in the combined inner product int_B fg dx + oint fg dsigma
/// together with an L2-orthonormal angular factor. k = 0 is the constant mode.
struct WentzellPair {
  int l = 0;
  int k = 0;
  double mu = 0.0;      // sqrt(lambda)
  double lambda = 0.0;
  double norm_c = 0.0;
  double bval = 0.0;    // R(1)
  double flux = 0.0;    // R'(1) = lambda * R(1)
};

namespace detail_dyn {

// Boundary eigenrelation with one factor of mu removed: roots of
// w(mu) = B_l'(mu) - mu B_l(mu) carry R'(1) = mu^2 R(1).
inline double eigen_fn(int n, int l, double mu) {
  size_t ul = static_cast<size_t>(l);
  if (n == 2) {
    auto a = dynakernel::detail::bessel_j_array(l + 1, mu);
    double bp = l == 0 ? -a[1] : a[ul - 1] - (l / mu) * a[ul];
    return bp - mu * a[ul];
  }
  auto a = dynakernel::detail::sph_bessel_array(l + 1, mu);
  double bp = l == 0 ? -a[1] : a[ul - 1] - ((l + 1.0) / mu) * a[ul];
  return bp - mu * a[ul];
}

inline double eigen_fn_deriv(int n, int l, double mu) {
  size_t ul = static_cast<size_t>(l);
  double bv, bp, bpp;
  if (n == 2) {
    auto a = dynakernel::detail::bessel_j_array(l + 1, mu);
    bv = a[ul];
    bp = l == 0 ? -a[1] : a[ul - 1] - (l / mu) * a[ul];
    bpp = -bp / mu - (1.0 - l * l / (mu * mu)) * bv;
  } else {
    auto a = dynakernel::detail::sph_bessel_array(l + 1, mu);
    bv = a[ul];
    bp = l == 0 ? -a[1] : a[ul - 1] - ((l + 1.0) / mu) * a[ul];
    bpp = -2.0 * bp / mu - (1.0 - l * (l + 1.0) / (mu * mu)) * bv;
  }
  return bpp - bv - mu * bp;
}

/// Safeguarded Newton on a sign-changing bracket.
inline double wentzell_root(int n, int l, double lo, double hi) {
  double flo = eigen_fn(n, l, lo), fhi = eigen_fn(n, l, hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw kernel_error(errc::rootfind_error,
                       "wentzell_eigenpairs: no sign change for l=" + std::to_string(l) + " on [" +
                           std::to_string(lo) + ", " + std::to_string(hi) + "]",
                       static_cast<double>(l));
  double a = lo, b = hi, fa = flo;
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    double f = eigen_fn(n, l, x);
    if (f == 0.0) return x;
    if ((f > 0.0) == (fa > 0.0)) {
      a = x;
      fa = f;
    } else {
      b = x;
    }
    double df = eigen_fn_deriv(n, l, x);
    double xn = df != 0.0 ? x - f / df : 0.5 * (a + b);
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) < 1e-15 * x) return xn;
    x = xn;
  }
  throw kernel_error(errc::rootfind_error,
                     "wentzell_eigenpairs: root polish failed for l=" + std::to_string(l), x);
}

/// int_0^1 B_l(mu r)^2 r^{n-1} dr at arbitrary mu (Lommel form).
inline double radial_l2(int n, int l, double mu) {
  size_t ul = static_cast<size_t>(l);
  if (n == 2) {
    auto a = dynakernel::detail::bessel_j_array(l + 1, mu);
    double bp = l == 0 ? -a[1] : a[ul - 1] - (l / mu) * a[ul];
    return 0.5 * (bp * bp + (1.0 - l * l / (mu * mu)) * a[ul] * a[ul]);
  }
  auto a = dynakernel::detail::sph_bessel_array(l + 1, mu);
  double bp = l == 0 ? -a[1] : a[ul - 1] - ((l + 1.0) / mu) * a[ul];
  double half = l + 0.5;
  double u = bp + a[ul] / (2.0 * mu);
  return 0.5 * (u * u + (1.0 - half * half / (mu * mu)) * a[ul] * a[ul]);
}

// The stored-pair invariant |R'(1) - lambda R(1)| <= 1e-10 sits below the
// double rounding floor of the root once mu exceeds ~85 (the residual at the
// nearest representable double grows like mu^3 * eps), so the final polish
// and the derived fields run in 80-bit long double.
inline void bessel_pair_ld(int n, int l, long double x, long double& bv, long double& bp) {
  size_t ul = static_cast<size_t>(l);
  int lmax = l + 1;
  std::vector<long double> out(static_cast<size_t>(lmax) + 1, 0.0L);
  if (n == 2) {
    const int m0 = dynakernel::detail::miller_start(lmax, static_cast<double>(x));
    long double bkp = 0.0L, bk = 1e-290L, sum = 0.0L;
    for (int k = m0; k >= 0; --k) {
      long double bkm = (2.0L * (k + 1)) / x * bk - bkp;
      bkp = bk;
      bk = bkm;
      if (k <= lmax) out[static_cast<size_t>(k)] = bk;
      if (k > 0 && (k & 1) == 0) sum += 2.0L * bk;
      if (fabsl(bk) > 1e250L) {
        bkp *= 1e-250L;
        bk *= 1e-250L;
        sum *= 1e-250L;
        for (auto& v : out) v *= 1e-250L;
      }
    }
    sum += bk;
    for (auto& v : out) v /= sum;
    bv = out[ul];
    bp = l == 0 ? -out[1] : out[ul - 1] - static_cast<long double>(l) / x * out[ul];
    return;
  }
  long double j0 = sinl(x) / x;
  long double j1 = j0 / x - cosl(x) / x;
  const int m0 = dynakernel::detail::miller_start(lmax, static_cast<double>(x));
  long double bkp = 0.0L, bk = 1e-290L, b0 = 0.0L, b1 = 0.0L;
  for (int k = m0; k >= 0; --k) {
    long double bkm = (2.0L * k + 3.0L) / x * bk - bkp;
    bkp = bk;
    bk = bkm;
    if (k <= lmax) out[static_cast<size_t>(k)] = bk;
    if (k == 1) b1 = bk;
    if (k == 0) b0 = bk;
    if (fabsl(bk) > 1e250L) {
      bkp *= 1e-250L;
      bk *= 1e-250L;
      b0 *= 1e-250L;
      b1 *= 1e-250L;
      for (auto& v : out) v *= 1e-250L;
    }
  }
  long double scale = fabsl(b0) >= fabsl(b1) ? j0 / b0 : j1 / b1;
  for (auto& v : out) v *= scale;
  out[0] = j0;
  out[1] = j1;
  bv = out[ul];
  bp = l == 0 ? -out[1] : out[ul - 1] - (l + 1.0L) / x * out[ul];
}

struct PolishedRoot {
  long double mu = 0.0L;
  long double bv = 0.0L;
  long double bp = 0.0L;
  long double rad2 = 0.0L;
};

inline PolishedRoot polish_root_ld(int n, int l, double seed) {
  PolishedRoot p;
  p.mu = seed;
  for (int it = 0; it < 6; ++it) {
    bessel_pair_ld(n, l, p.mu, p.bv, p.bp);
    long double w = p.bp - p.mu * p.bv;
    long double bpp =
        n == 2 ? -p.bp / p.mu - (1.0L - static_cast<long double>(l) * l / (p.mu * p.mu)) * p.bv
               : -2.0L * p.bp / p.mu - (1.0L - l * (l + 1.0L) / (p.mu * p.mu)) * p.bv;
    long double dw = bpp - p.bv - p.mu * p.bp;
    long double step = w / dw;
    p.mu -= step;
    if (fabsl(step) < 1e-19L * p.mu) break;
  }
  bessel_pair_ld(n, l, p.mu, p.bv, p.bp);
  if (n == 2) {
    p.rad2 = 0.5L * (p.bp * p.bp +
                     (1.0L - static_cast<long double>(l) * l / (p.mu * p.mu)) * p.bv * p.bv);
  } else {
    long double half = l + 0.5L;
    long double u = p.bp + p.bv / (2.0L * p.mu);
    p.rad2 = 0.5L * (u * u + (1.0L - half * half / (p.mu * p.mu)) * p.bv * p.bv);
  }
  return p;
}

}  // namespace detail_dyn

class WentzellBasis {
 public:
  int n = 2;
  Truncation trunc;
  std::vector<WentzellPair> modes;     // sorted by (lambda, l, k); constant mode first
  std::vector<std::vector<int>> by_l;  // mode indices per angular degree
  double lambda_max = 0.0;
  double lambda_next_k = 0.0;  // lower bound on the first eigenvalue dropped in k
  double lambda_next_l = 0.0;  // first eigenvalue of degree lmax+1
  int mode_count_weighted = 0;

  /// Cached construction; bases are immutable and shared. Root searches per
  /// degree are independent, evaluations afterwards are pure.
  static const WentzellBasis& dynamical(int n, Truncation tr = {});

  double t_min() const { return std::log(mode_count_weighted * 1e8) / lambda_max; }

  double dropped_tail(double t, double rho) const {
    double lt = std::pow(std::min(rho, 1.0), trunc.lmax + 1) * std::exp(-lambda_next_l * t);
    return mode_count_weighted * (std::exp(-lambda_next_k * t) + lt);
  }

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

  double radial(const WentzellPair& m, double r) const {
    if (m.k == 0) return m.norm_c;
    double z = m.mu * r;
    if (n == 2) return m.norm_c * dynakernel::detail::bessel_j_array(m.l, z)[static_cast<size_t>(m.l)];
    return m.norm_c * dynakernel::detail::sph_bessel_array(m.l, z)[static_cast<size_t>(m.l)];
  }

  double radial_deriv(const WentzellPair& m, double r) const {
    if (m.k == 0) return 0.0;
    double z = m.mu * r;
    size_t l = static_cast<size_t>(m.l);
    if (n == 2) {
      auto a = dynakernel::detail::bessel_j_array(m.l + 1, z);
      double bp = m.l == 0 ? -a[1] : (z > 0.0 ? a[l - 1] - (m.l / z) * a[l] : (m.l == 1 ? 0.5 : 0.0));
      return m.norm_c * m.mu * bp;
    }
    auto a = dynakernel::detail::sph_bessel_array(m.l + 1, z);
    double bp;
    if (z > 0.0)
      bp = m.l == 0 ? -a[1] : a[l - 1] - ((m.l + 1.0) / z) * a[l];
    else
      bp = m.l == 1 ? 1.0 / 3.0 : 0.0;
    return m.norm_c * m.mu * bp;
  }

  std::vector<double> radial_values(double r) const {
    std::vector<double> v(modes.size());
    for (size_t i = 0; i < modes.size(); ++i) v[i] = radial(modes[i], r);
    return v;
  }

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

  double cos_angle(const Vec& x, const Vec& y) const {
    double rx = norm(x), ry = norm(y);
    if (rx == 0.0 || ry == 0.0) return 1.0;
    return std::clamp(dot(x, y) / (rx * ry), -1.0, 1.0);
  }
};

namespace detail_dyn {

inline const WentzellBasis* build_dynamical(int n, Truncation tr) {
  if (n != 2 && n != 3) throw kernel_error(errc::domain_error, "wentzell_eigenpairs: n must be 2 or 3");
  if (tr.lmax < 0 || tr.lmax > 100 || tr.kmax < 1 || tr.kmax > 200)
    throw kernel_error(errc::unsupported_order, "wentzell_eigenpairs: Lmax <= 100, Kmax <= 200");
  auto* b = new WentzellBasis;
  b->n = n;
  b->trunc = tr;
  {
    WentzellPair c0;
    c0.norm_c = 1.0 / std::sqrt(1.0 + 1.0 / n);
    c0.bval = c0.norm_c;
    b->modes.push_back(c0);
  }
  for (int l = 0; l <= tr.lmax; ++l) {
    double nu = n == 2 ? l : l + 0.5;
    std::vector<double> zero(static_cast<size_t>(tr.kmax) + 2);
    for (int k = 1; k <= tr.kmax + 1; ++k) zero[static_cast<size_t>(k)] = bessel_j_zero(nu, k);
    std::vector<double> roots;
    if (l >= 1) roots.push_back(wentzell_root(n, l, 1e-2, zero[1]));
    for (int k = 1; static_cast<int>(roots.size()) < tr.kmax; ++k)
      roots.push_back(wentzell_root(n, l, zero[static_cast<size_t>(k)], zero[static_cast<size_t>(k) + 1]));
    for (int k = 1; k <= tr.kmax; ++k) {
      PolishedRoot p = polish_root_ld(n, l, roots[static_cast<size_t>(k) - 1]);
      long double c = 1.0L / sqrtl(p.rad2 + p.bv * p.bv);
      WentzellPair m;
      m.l = l;
      m.k = k;
      m.mu = static_cast<double>(p.mu);
      m.lambda = static_cast<double>(p.mu * p.mu);
      m.norm_c = static_cast<double>(c);
      m.bval = static_cast<double>(c * p.bv);
      m.flux = static_cast<double>(c * p.mu * p.bp);
      b->modes.push_back(m);
    }
  }
  std::sort(b->modes.begin(), b->modes.end(), [](const WentzellPair& a, const WentzellPair& c) {
    if (a.lambda != c.lambda) return a.lambda < c.lambda;
    if (a.l != c.l) return a.l < c.l;
    return a.k < c.k;
  });
  b->by_l.assign(static_cast<size_t>(tr.lmax) + 1, {});
  {
    double nu0 = n == 2 ? 0.0 : 0.5;
    double zk = bessel_j_zero(nu0, tr.kmax);
    b->lambda_next_k = zk * zk;
    int lnext = tr.lmax + 1;
    double nul = n == 2 ? lnext : lnext + 0.5;
    double mu1 = wentzell_root(n, lnext, 1e-2, bessel_j_zero(nul, 1));
    b->lambda_next_l = mu1 * mu1;
  }
  b->lambda_max = 0.0;
  b->mode_count_weighted = 0;
  for (size_t i = 0; i < b->modes.size(); ++i) {
    const WentzellPair& m = b->modes[i];
    b->by_l[static_cast<size_t>(m.l)].push_back(static_cast<int>(i));
    b->lambda_max = std::max(b->lambda_max, m.lambda);
    int mult = n == 2 ? (m.l == 0 ? 1 : 2) : 2 * m.l + 1;
    b->mode_count_weighted += mult;
  }
  // construction-time verification: boundary eigenrelation, combined norm
  for (const WentzellPair& m : b->modes) {
    if (std::abs(m.flux - m.lambda * m.bval) > 1e-10)
      throw kernel_error(errc::rootfind_error, "wentzell_eigenpairs: boundary residual at l=" +
                                                   std::to_string(m.l) + " k=" + std::to_string(m.k));
    int panels = static_cast<int>(m.mu / 3.0) + 4;
    Rule1D rule = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(panels, 10));
    double q = 0.0;
    for (size_t i = 0; i < rule.x.size(); ++i) {
      double R = b->radial(m, rule.x[i]);
      q += rule.w[i] * R * R * std::pow(rule.x[i], n - 1);
    }
    double r1 = b->radial(m, 1.0);
    if (std::abs(q + r1 * r1 - 1.0) > 1e-8)
      throw kernel_error(errc::rootfind_error,
                         "wentzell_eigenpairs: combined norm check failed at l=" + std::to_string(m.l) +
                             " k=" + std::to_string(m.k),
                         q + r1 * r1);
  }
  return b;
}

}  // namespace detail_dyn

inline const WentzellBasis& WentzellBasis::dynamical(int n, Truncation tr) {
  static std::map<std::tuple<int, int, int>, const WentzellBasis*> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(n, tr.lmax, tr.kmax);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, detail_dyn::build_dynamical(n, tr)).first;
  return *it->second;
}

/// Heat kernel for the dynamical boundary condition by eigen-series. Boundary
/// points are admissible for both arguments: the modes do not vanish there.
inline KernelValue g1_dyn(const WentzellBasis& b, const Vec& x, const Vec& y, double t) {
  b.require_time(t, "g1_dyn");
  double rx = norm(x), ry = norm(y);
  if (x.n != b.n || y.n != b.n || rx > 1.0 + ball::kBoundaryTol || ry > 1.0 + ball::kBoundaryTol)
    throw kernel_error(errc::domain_error, "g1_dyn: points must lie in the closed ball");
  rx = std::min(rx, 1.0);
  ry = std::min(ry, 1.0);
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);
  double s = 0.0;
  for (const WentzellPair& m : b.modes)
    // the grouping keeps the sum bitwise symmetric under x <-> y
    s += std::exp(-m.lambda * t) * (b.radial(m, rx) * b.radial(m, ry)) * A[static_cast<size_t>(m.l)];
  return {s, b.dropped_tail(t, std::max(rx, ry)) + 1e-15 * std::abs(s)};
}

/// Node tables for combined-inner-product transforms against a reference
/// direction: F_m = int_B R_m(|y|) A_l f_i(y) dy + R_m(1) oint A_l f_b dsigma.
struct CombinedProjection {
  const WentzellBasis* basis;
  Rule1D rad;  // radial nodes/weights on [0,1], r^{n-1} NOT folded
  SphereRule ang;
  std::vector<std::vector<double>> R;  // [mode][radial node]

  CombinedProjection(const WentzellBasis& b, int radial_panels = 40, int radial_order = 8,
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

  /// fiv[i][j] holds interior data at rad.x[i] * ang.p[j], fbv[j] boundary
  /// data at ang.p[j].
  std::vector<double> project_values(const Vec& xhat, const std::vector<std::vector<double>>& fiv,
                                     const std::vector<double>& fbv) const {
    const WentzellBasis& b = *basis;
    size_t nl = b.by_l.size(), nr = rad.x.size(), na = ang.p.size();
    std::vector<std::vector<double>> G(nl, std::vector<double>(nr, 0.0));
    std::vector<double> H(nl, 0.0);
    std::vector<double> A;
    for (size_t j = 0; j < na; ++j) {
      b.angular_all(b.cos_angle(xhat, ang.p[j]), A);
      for (size_t l = 0; l < nl; ++l) H[l] += A[l] * ang.w[j] * fbv[j];
      for (size_t i = 0; i < nr; ++i) {
        double fv = fiv[i][j] * ang.w[j];
        for (size_t l = 0; l < nl; ++l) G[l][i] += A[l] * fv;
      }
    }
    std::vector<double> F(b.modes.size(), 0.0);
    for (size_t m = 0; m < b.modes.size(); ++m) {
      size_t l = static_cast<size_t>(b.modes[m].l);
      double acc = b.modes[m].bval * H[l];
      for (size_t i = 0; i < nr; ++i)
        acc += rad.w[i] * std::pow(rad.x[i], b.n - 1) * R[m][i] * G[l][i];
      F[m] = acc;
    }
    return F;
  }
};

/// Series solution of the dynamical-boundary heat problem for data
/// (interior f_i, boundary f_b). Data values and radial profiles are sampled
/// once at construction into immutable tables; evaluations are pure.
class DynSolution {
 public:
  DynSolution(const WentzellBasis& b, const std::function<double(const Vec&)>& interior_data,
              const std::function<double(const Vec&)>& boundary_data, int radial_panels = 40,
              int radial_order = 8, int sphere_order = 0)
      : proj_(b, radial_panels, radial_order, sphere_order) {
    size_t nr = proj_.rad.x.size(), na = proj_.ang.p.size();
    fiv_.assign(nr, std::vector<double>(na, 0.0));
    fbv_.assign(na, 0.0);
    for (size_t j = 0; j < na; ++j) {
      if (boundary_data) fbv_[j] = boundary_data(proj_.ang.p[j]);
      for (size_t i = 0; i < nr; ++i)
        if (interior_data) fiv_[i][j] = interior_data(proj_.rad.x[i] * proj_.ang.p[j]);
    }
    radial_integral_.resize(b.modes.size());
    for (size_t m = 0; m < b.modes.size(); ++m) {
      double acc = 0.0;
      for (size_t i = 0; i < nr; ++i)
        acc += proj_.rad.w[i] * std::pow(proj_.rad.x[i], b.n - 1) * proj_.R[m][i];
      radial_integral_[m] = acc;
    }
  }

  const WentzellBasis& basis() const { return *proj_.basis; }

  KernelValue operator()(const Vec& x, double t) const {
    const WentzellBasis& b = *proj_.basis;
    b.require_time(t, "dyn_solution");
    double rx = norm(x);
    if (x.n != b.n || rx > 1.0 + ball::kBoundaryTol)
      throw kernel_error(errc::domain_error, "dyn_solution: x must lie in the closed ball");
    rx = std::min(rx, 1.0);
    Vec xhat = rx > 0.0 ? normalized(x) : (b.n == 2 ? vec2(1, 0) : vec3(0, 0, 1));
    std::vector<double> c = proj_.project_values(xhat, fiv_, fbv_);
    std::vector<double> radx = b.radial_values(rx);
    double s = 0.0;
    for (size_t m = 0; m < b.modes.size(); ++m) s += std::exp(-b.modes[m].lambda * t) * c[m] * radx[m];
    return {s, b.dropped_tail(t, rx)};
  }

  /// int_B u(., t) dx + oint u(., t) dsigma of the series. Integration over
  /// directions kills every l >= 1 transform, so only l = 0 modes enter; the
  /// lambda > 0 terms carry the combined integral of their mode, which
  /// vanishes by orthogonality to the constant eigenfunction.
  double combined_integral(double t) const {
    const WentzellBasis& b = *proj_.basis;
    Vec xhat = b.n == 2 ? vec2(1, 0) : vec3(0, 0, 1);
    std::vector<double> c = proj_.project_values(xhat, fiv_, fbv_);
    double surface = b.n == 2 ? 2.0 * kPi : 4.0 * kPi;
    double s = 0.0;
    for (size_t m = 0; m < b.modes.size(); ++m) {
      if (b.modes[m].l != 0) continue;
      s += std::exp(-b.modes[m].lambda * t) * c[m] * (radial_integral_[m] + b.modes[m].bval) * surface;
    }
    return s;
  }

 private:
  CombinedProjection proj_;
  std::vector<std::vector<double>> fiv_;
  std::vector<double> fbv_;
  std::vector<double> radial_integral_;
};

/// oint g1_dyn(x,.,t) dsigma + int_B g1_dyn(x,.,t) dy by honest quadrature.
inline SpecialValue g1_dyn_mass(const WentzellBasis& b, const Vec& x, double t, int radial_panels = 40,
                                int radial_order = 8, int sphere_order = 0) {
  DynSolution u(
      b, [](const Vec&) { return 1.0; }, [](const Vec&) { return 1.0; }, radial_panels, radial_order,
      sphere_order);
  KernelValue v = u(x, t);
  return {v.value, v.error};
}

inline nlohmann::json wentzell_json(const WentzellBasis& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (const WentzellPair& m : b.modes) {
    rows.push_back({{"n", b.n},
                    {"l", m.l},
                    {"k", m.k},
                    {"lambda", m.lambda},
                    {"norm-constant", m.norm_c},
                    {"boundary-value", m.bval},
                    {"boundary-flux", m.flux}});
  }
  return rows;
}

}  // namespace dynakernel::wentzell
