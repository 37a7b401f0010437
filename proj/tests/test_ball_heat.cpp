#include <catch2/catch_amalgamated.hpp>
#include <dynakernel/ball_heat.hpp>

#include <random>

using namespace dynakernel;
using namespace dynakernel::ball;

namespace {

// j_{0,1}^2 and j_{1,1}^2
constexpr double kLambda01 = 5.783185962946783;
constexpr double kLambda11 = 14.681970642123895;
// 1 - sum_{k<=60} q_k R_k(0.3), the Fourier-Bessel partial-sum deficit of 1
constexpr double kS60Deficit03 = 0.009241858026929006;

Vec unit2(double theta) { return vec2(std::cos(theta), std::sin(theta)); }

double radial_inner(const EigenBasis& b, const EigenPair& a, const EigenPair& c, int rpow) {
  int panels = static_cast<int>(std::max(a.mu, c.mu) / 3.0) + 4;
  Rule1D rule = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(panels, 10));
  double s = 0.0;
  for (size_t i = 0; i < rule.x.size(); ++i)
    s += rule.w[i] * b.radial(a, rule.x[i]) * b.radial(c, rule.x[i]) * std::pow(rule.x[i], rpow);
  return s;
}

}  // namespace

TEST_CASE("dirichlet eigenbasis structure") {
  const EigenBasis& b2 = EigenBasis::dirichlet(2);
  REQUIRE(b2.n == 2);
  REQUIRE(b2.modes.size() == 41u * 60u);
  REQUIRE(b2.modes.front().l == 0);
  REQUIRE(b2.modes.front().k == 1);
  REQUIRE(b2.modes.front().lambda == Catch::Approx(kLambda01).epsilon(1e-13));
  for (size_t i = 1; i < b2.modes.size(); ++i) REQUIRE(b2.modes[i].lambda >= b2.modes[i - 1].lambda);
  bool found11 = false;
  for (const EigenPair& m : b2.modes)
    if (m.l == 1 && m.k == 1) {
      REQUIRE(m.lambda == Catch::Approx(kLambda11).epsilon(1e-13));
      found11 = true;
    }
  REQUIRE(found11);

  const EigenBasis& b3 = EigenBasis::dirichlet(3);
  REQUIRE(b3.modes.front().lambda == Catch::Approx(kPi * kPi).epsilon(1e-13));
  REQUIRE(&EigenBasis::dirichlet(2) == &b2);
}

TEST_CASE("eigenpair boundary condition and normalization") {
  for (int n : {2, 3}) {
    const EigenBasis& b = EigenBasis::dirichlet(n);
    double worst = 0.0;
    for (const EigenPair& m : b.modes) worst = std::max(worst, std::abs(b.radial(m, 1.0)));
    REQUIRE(worst <= 1e-12);
    // spot orthonormality within a fixed degree
    const EigenPair& a1 = b.modes[static_cast<size_t>(b.by_l[0][0])];
    const EigenPair& a2 = b.modes[static_cast<size_t>(b.by_l[0][1])];
    const EigenPair& c1 = b.modes[static_cast<size_t>(b.by_l[7][1])];
    const EigenPair& c2 = b.modes[static_cast<size_t>(b.by_l[7][4])];
    REQUIRE(std::abs(radial_inner(b, a1, a1, n - 1) - 1.0) <= 1e-9);
    REQUIRE(std::abs(radial_inner(b, c1, c1, n - 1) - 1.0) <= 1e-9);
    REQUIRE(std::abs(radial_inner(b, a1, a2, n - 1)) <= 1e-10);
    REQUIRE(std::abs(radial_inner(b, c1, c2, n - 1)) <= 1e-10);
  }
}

TEST_CASE("flux and moment closed forms") {
  for (int n : {2, 3}) {
    const EigenBasis& b = EigenBasis::dirichlet(n);
    for (int idx : {0, 5, 59}) {
      const EigenPair& m = b.modes[static_cast<size_t>(b.by_l[0][static_cast<size_t>(idx)])];
      // flux against a finite difference of the radial profile
      double h = 1e-6;
      double fd = -(b.radial(m, 1.0) - b.radial(m, 1.0 - h)) / h;
      REQUIRE(fd == Catch::Approx(m.flux).epsilon(1e-4));
      // closed-form moment against quadrature
      int panels = static_cast<int>(m.mu / 3.0) + 4;
      Rule1D rule = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(panels, 10));
      double q = 0.0;
      for (size_t i = 0; i < rule.x.size(); ++i)
        q += rule.w[i] * b.radial(m, rule.x[i]) * std::pow(rule.x[i], m.l + n - 1);
      REQUIRE(q == Catch::Approx(b.poisson_moment(m)).margin(1e-12));
      REQUIRE(std::abs(q * m.flux - 2.0) <= 1e-8);
    }
    const EigenPair& hi = b.modes[static_cast<size_t>(b.by_l[9][3])];
    double q = 0.0;
    int panels = static_cast<int>(hi.mu / 3.0) + 4;
    Rule1D rule = make_rule(0.0, 1.0, QuadratureSpec::uniform_panels(panels, 10));
    for (size_t i = 0; i < rule.x.size(); ++i)
      q += rule.w[i] * b.radial(hi, rule.x[i]) * std::pow(rule.x[i], hi.l + n - 1);
    REQUIRE(std::abs(q * hi.flux - 2.0) <= 1e-8);
  }
}

TEST_CASE("truncation threshold") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  REQUIRE(b.t_min() > 1e-5);
  REQUIRE(b.t_min() < 1e-2);
  REQUIRE(b.required_kmax(b.t_min() / 4.0) > 60);
  try {
    gamma1(b, vec2(0.3, 0), vec2(0.1, 0.1), b.t_min() / 2.0);
    FAIL("expected truncation error");
  } catch (const kernel_error& e) {
    REQUIRE(e.code() == errc::truncation_error);
    REQUIRE(e.hint() > 60.0);
  }
  REQUIRE_THROWS_AS(gamma1(b, vec2(1.2, 0), vec2(0.1, 0.1), 0.1), kernel_error);
}

TEST_CASE("gamma1 reference values") {
  const EigenBasis& b2 = EigenBasis::dirichlet(2);
  const EigenBasis& b3 = EigenBasis::dirichlet(3);
  REQUIRE(gamma1(b2, vec2(0.3, 0), vec2(0.5, 0.2), 0.1).value ==
          Catch::Approx(0.6156495274764225).epsilon(1e-10));
  REQUIRE(gamma1(b2, vec2(0, 0), vec2(0.25, -0.4), 0.2).value ==
          Catch::Approx(0.26064779859518405).epsilon(1e-10));
  REQUIRE(gamma1(b3, vec3(0.3, 0, 0), vec3(0.2, 0.3, -0.1), 0.15).value ==
          Catch::Approx(0.2838143085415621).epsilon(1e-10));
}

TEST_CASE("gamma1 symmetry and boundary vanishing") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.65, 0.65);
  auto draw = [&](int n) {
    for (;;) {
      Vec p = n == 2 ? vec2(u(rng), u(rng)) : vec3(u(rng), u(rng), u(rng));
      if (norm(p) < 0.9) return p;
    }
  };
  for (int n : {2, 3}) {
    const EigenBasis& b = EigenBasis::dirichlet(n);
    for (int i = 0; i < 5; ++i) {
      Vec x = draw(n);
      Vec y = draw(n);
      double t = 0.05 + 0.1 * i;
      REQUIRE(gamma1(b, x, y, t).value == gamma1(b, y, x, t).value);
    }
    Vec e1v = n == 2 ? vec2(1, 0) : vec3(0, 0, 1);
    REQUIRE(gamma1(b, e1v, 0.3 * e1v, 0.2).value == 0.0);
    REQUIRE(gamma1(b, 0.3 * e1v, e1v, 0.2).value == 0.0);
    REQUIRE(gamma1(b, 0.4 * e1v, 0.2 * e1v, 0.3).value > 0.0);
  }
}

TEST_CASE("gamma1 short-time free-kernel limit and long-time decay") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  for (double r : {0.0, 0.2, 0.4}) {
    Vec x = vec2(r, 0), y = vec2(r * 0.5, 0.1);
    double g = gamma1(b, x, y, 0.005).value;
    double free_g = halfspace::heat_kernel_free(2, x, y, 0.005);
    REQUIRE(g / free_g == Catch::Approx(1.0).epsilon(1e-6));
  }
  // long time: lowest mode dominates
  Vec x = vec2(0.3, 0), y = vec2(0.5, 0.2);
  const EigenPair& m0 = b.modes.front();
  double lead = std::exp(-m0.lambda * 2.0) * b.radial(m0, 0.3) * b.radial(m0, norm(y)) / (2.0 * kPi);
  REQUIRE(gamma1(b, x, y, 2.0).value == Catch::Approx(lead).epsilon(1e-6));
}

TEST_CASE("e1 flux sums and concentration") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.3, 0);
  double t = 0.2;
  SphereRule S = sphere_rule(2, 256);
  double quad = 0.0;
  for (size_t j = 0; j < S.p.size(); ++j) quad += S.w[j] * e1(b, x, S.p[j], t).value;
  double closed = 0.0;
  for (int idx : b.by_l[0]) {
    const EigenPair& m = b.modes[static_cast<size_t>(idx)];
    closed += std::exp(-m.lambda * t) * b.radial(m, 0.3) * m.flux;
  }
  REQUIRE(quad == Catch::Approx(closed).margin(1e-12));
  // flux balance is term-wise: lambda * moment = flux for every radial mode
  for (int idx : b.by_l[0]) {
    const EigenPair& m = b.modes[static_cast<size_t>(idx)];
    REQUIRE(std::abs(m.lambda * b.poisson_moment(m) - m.flux) <= 1e-10 * std::abs(m.flux));
  }
  REQUIRE(e1(b, vec2(0.5, 0), vec2(1, 0), 0.1).value > 0.0);
  REQUIRE(e1(b, vec2(0.5, 0), vec2(1, 0), 0.02).value >
          1e3 * std::abs(e1(b, vec2(0.5, 0), vec2(-1, 0), 0.02).value));
}

TEST_CASE("f1 series form matches time quadrature of e1") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.3, 0), y = unit2(0.7);
  double t = 0.4;
  std::vector<double> radx = b.radial_values(0.3);
  std::vector<double> A;
  b.angular_all(b.cos_angle(x, y), A);
  auto e1_series = [&](double s) {
    double acc = 0.0;
    for (size_t i = 0; i < b.modes.size(); ++i)
      acc += std::exp(-b.modes[i].lambda * s) * radx[i] * b.modes[i].flux *
             A[static_cast<size_t>(b.modes[i].l)];
    return acc;
  };
  SpecialValue q = integrate_interval(e1_series, 0.0, t,
                                      QuadratureSpec::graded_panels(56, 10, 0.5, grade_end::left));
  REQUIRE(f1(b, x, y, t, f1_form::series).value == Catch::Approx(q.value).margin(1e-8));
}

TEST_CASE("f1 form difference is time independent") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.25, 0.1), y = unit2(1.3);
  double d1 = f1(b, x, y, 0.3, f1_form::poisson).value - f1(b, x, y, 0.3, f1_form::series).value;
  double d2 = f1(b, x, y, 0.9, f1_form::poisson).value - f1(b, x, y, 0.9, f1_form::series).value;
  REQUIRE(d1 == Catch::Approx(d2).margin(1e-12));
  // small t: the poisson form vanishes; the series form is left with its
  // partial-sum wobble, which its error field must cover
  REQUIRE(std::abs(f1(b, x, y, 0.002, f1_form::poisson).value) < 1e-7);
  KernelValue fs = f1(b, x, y, 0.002, f1_form::series);
  REQUIRE(std::abs(fs.value) <= fs.error);
}

TEST_CASE("boundary plus volume mass identity") {
  const EigenBasis& b2 = EigenBasis::dirichlet(2);
  Vec x = vec2(0.3, 0);
  for (double t : {0.25, 1.0}) {
    double mass = f1_mass(b2, x, t, 0, f1_form::poisson).value + gamma1_mass(b2, x, t).value;
    REQUIRE(std::abs(mass - 1.0) <= 1e-8);
  }
  // series form carries the quantified partial-sum deficit at |x| = 0.3
  double mass_series = f1_mass(b2, x, 0.5, 0, f1_form::series).value + gamma1_mass(b2, x, 0.5).value;
  REQUIRE(mass_series == Catch::Approx(1.0 - kS60Deficit03).margin(1e-8));

  const EigenBasis& b3 = EigenBasis::dirichlet(3);
  double mass3 = f1_mass(b3, vec3(0.3, 0, 0), 0.25, 0, f1_form::poisson).value +
                 gamma1_mass(b3, vec3(0.3, 0, 0), 0.25).value;
  REQUIRE(std::abs(mass3 - 1.0) <= 1e-8);
}

TEST_CASE("h1 resummed form") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  // at x = 0 the flow is stationary and h1 reduces to f1
  Vec y = unit2(0.4);
  KernelValue hv = h1(b, vec2(0, 0), y, 0.5);
  REQUIRE(hv.value == Catch::Approx(f1(b, vec2(0, 0), y, 0.5, f1_form::poisson).value).margin(1e-13));
  // agreement of the two algorithms within their combined error bars
  Vec x = vec2(0.4, 0.2);
  KernelValue a = h1(b, x, y, 0.5, h1_algorithm::resummed);
  KernelValue q = h1(b, x, y, 0.5, h1_algorithm::quadrature);
  REQUIRE(std::abs(a.value - q.value) <= 3.0 * (a.error + q.error) + 1e-6);
  // short time: no flux has escaped yet
  REQUIRE(std::abs(h1(b, x, y, 0.003).value) < 1e-5);
  REQUIRE(h1(b, vec2(0.5, 0), unit2(0.0), 0.3).value > 0.0);
}

TEST_CASE("corrector reproduces gamma1 from the free kernel") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.3, 0), y = vec2(0.1, 0.2);
  double t = 0.3;
  KernelValue c = corrector_phi1(b, x, y, t);
  double expected = halfspace::heat_kernel_free(2, x, y, t) - gamma1(b, x, y, t).value;
  REQUIRE(c.value == Catch::Approx(expected).margin(1e-5));
}

TEST_CASE("envelope factors") {
  REQUIRE(bound_h(vec2(0, 0), vec2(0, 0), 2.0) == Catch::Approx(0.5));
  REQUIRE(bound_h(vec2(0, 0), vec2(0, 0), 0.5) == Catch::Approx(1.0));
  REQUIRE(bound_l(vec2(0, 0), vec2(0, 1), 1.0) == Catch::Approx(2.0));
  // the bounds stay positive and finite where the kernels live
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.5, 0), y = vec2(0.25, 0.25);
  double t = 0.25;
  double env = bound_h(x, y, t) * halfspace::heat_kernel_free(2, x, y, t);
  double ratio = gamma1(b, x, y, t).value / env;
  REQUIRE(ratio > 0.01);
  REQUIRE(ratio < 100.0);
}

TEST_CASE("heat decomposition reconstructs test functions") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.3, 0.2);
  double t = 0.5;
  // constant: pure mass identity
  auto one = [](const Vec&, double) { return 1.0; };
  KernelValue r1 = decompose_reconstruct(b, one, nullptr, x, t);
  REQUIRE(std::abs(r1.value - 1.0) <= 1e-8);
  // caloric polynomial x1^2 + 2t
  auto cal = [](const Vec& y, double s) { return y[0] * y[0] + 2.0 * s; };
  KernelValue r2 = decompose_reconstruct(b, cal, nullptr, x, t);
  REQUIRE(r2.value == Catch::Approx(x[0] * x[0] + 2.0 * t).margin(1e-4));
  // eigenmode initial data decays exactly
  const EigenPair& m0 = b.modes.front();
  auto eig = [&](const Vec& y, double s) {
    return std::exp(-m0.lambda * s) * b.radial(m0, norm(y)) / std::sqrt(2.0 * kPi);
  };
  KernelValue r3 = decompose_reconstruct(b, eig, nullptr, x, t);
  double expect = std::exp(-m0.lambda * t) * b.radial(m0, norm(x)) / std::sqrt(2.0 * kPi);
  REQUIRE(r3.value == Catch::Approx(expect).margin(1e-7));
  // non-caloric data exercises the defect term: f = s
  auto lin = [](const Vec&, double s) { return s; };
  auto lin_defect = [](const Vec&, double) { return 1.0; };
  KernelValue r4 = decompose_reconstruct(b, lin, lin_defect, x, t);
  REQUIRE(r4.value == Catch::Approx(t).margin(1e-4));
}

TEST_CASE("flat dynamical solution") {
  const EigenBasis& b = EigenBasis::dirichlet(2);
  Vec x = vec2(0.35, -0.15);
  // constant data is preserved
  KernelValue u1 = dirichlet_dynamical_flat_solution(b, BoundaryFunction::constant(1.0),
                                                     [](const Vec&) { return 1.0; }, x, 0.4);
  REQUIRE(std::abs(u1.value - 1.0) <= 1e-8);
  // pure boundary data relaxes toward the harmonic extension
  BoundaryFunction phi_b{[](const Vec& y) { return y[0] * y[0]; }, smoothness::smooth};
  KernelValue u2 = dirichlet_dynamical_flat_solution(b, phi_b, nullptr, x, 3.0);
  double steady = harmonic_extension(phi_b, x).value;
  REQUIRE(u2.value == Catch::Approx(steady).margin(1e-6));
}

TEST_CASE("eigenbasis json export") {
  const EigenBasis& b = EigenBasis::dirichlet(2, {4, 3});
  nlohmann::json j = eigenbasis_json(b);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 5u * 3u);
  REQUIRE(j[0]["n"] == 2);
  REQUIRE(j[0]["l"].is_number_integer());
  REQUIRE(j[0]["lambda"].get<double>() > 0.0);
  REQUIRE(j[0]["norm-constant"].get<double>() > 0.0);
  REQUIRE(std::abs(j[0]["boundary-flux"].get<double>()) > 0.0);
  for (size_t i = 1; i < j.size(); ++i)
    REQUIRE(j[i]["lambda"].get<double>() >= j[i - 1]["lambda"].get<double>());
}
