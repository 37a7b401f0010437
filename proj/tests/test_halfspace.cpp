#include <catch2/catch_amalgamated.hpp>
#include <dynakernel/halfspace.hpp>

#include <random>

using namespace dynakernel;
namespace hs = dynakernel::halfspace;

TEST_CASE("fundamental solution values and flux normalization") {
  REQUIRE(hs::phi_laplace(2, vec2(1.0, 0.0)) == 0.0);
  REQUIRE(hs::phi_laplace(2, vec2(std::exp(1.0), 0.0)) ==
          Catch::Approx(-1.0 / (2.0 * kPi)).epsilon(1e-14));
  REQUIRE(hs::phi_laplace(3, vec3(0.0, 1.0, 0.0)) == Catch::Approx(1.0 / (4.0 * kPi)).epsilon(1e-14));
  REQUIRE_THROWS_AS(hs::phi_laplace(2, vec2(0.0, 0.0)), kernel_error);

  // unit outward flux through spheres of radius r: -d(phi)/dr * |sphere_r| = 1
  for (int n : {2, 3}) {
    for (double r : {0.5, 2.0}) {
      double h = 1e-6;
      Vec xp = n == 2 ? vec2(r + h, 0.0) : vec3(r + h, 0.0, 0.0);
      Vec xm = n == 2 ? vec2(r - h, 0.0) : vec3(r - h, 0.0, 0.0);
      double dphi = (hs::phi_laplace(n, xp) - hs::phi_laplace(n, xm)) / (2.0 * h);
      double area = n == 2 ? 2.0 * kPi * r : 4.0 * kPi * r * r;
      REQUIRE(std::abs(-dphi * area - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("half-space green function boundary values and symmetry") {
  double g3 = hs::green_laplace(vec3(0, 0, 1), vec3(0, 0, 2));
  REQUIRE(g3 == Catch::Approx(1.0 / (4.0 * kPi) - 1.0 / (12.0 * kPi)).epsilon(1e-14));

  REQUIRE(std::abs(hs::green_laplace(vec2(0.3, 0.7), vec2(-0.2, 1e-12))) < 1e-10);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int i = 0; i < 20; ++i) {
    Vec x = vec2(u(rng) - 1.0, u(rng));
    Vec y = vec2(u(rng) - 1.0, u(rng));
    if (dist(x, y) < 1e-6) continue;
    REQUIRE(hs::green_laplace(x, y) == Catch::Approx(hs::green_laplace(y, x)).margin(1e-12));
    Vec x3 = vec3(u(rng), u(rng) - 1.0, u(rng));
    Vec y3 = vec3(u(rng), u(rng) - 1.0, u(rng));
    REQUIRE(hs::green_laplace(x3, y3) == Catch::Approx(hs::green_laplace(y3, x3)).margin(1e-12));
  }
}

TEST_CASE("poisson kernel normalization and scaling") {
  REQUIRE(hs::poisson(vec2(0.0, 1.0), vec2(0.0, 0.0)) == Catch::Approx(1.0 / kPi).epsilon(1e-14));

  // truncated mass: (2/pi) atan(R) for x = (0,1), n=2
  for (double R : {5.0, 50.0}) {
    auto r = integrate_interval([](double y1) { return hs::poisson(vec2(0.0, 1.0), vec2(y1, 0.0)); },
                                -R, R, QuadratureSpec::uniform_panels(40, 8));
    REQUIRE(std::abs(r.value - 2.0 / kPi * std::atan(R)) < 1e-12);
  }

  double lam = 3.7;
  Vec x = vec2(0.4, 0.9), y = vec2(-1.1, 0.0);
  REQUIRE(hs::poisson(lam * x, lam * y) ==
          Catch::Approx(std::pow(lam, 1 - 2) * hs::poisson(x, y)).epsilon(1e-13));
  Vec x3 = vec3(0.4, -0.2, 0.9), y3 = vec3(-1.1, 0.5, 0.0);
  REQUIRE(hs::poisson(lam * x3, lam * y3) ==
          Catch::Approx(std::pow(lam, 1 - 3) * hs::poisson(x3, y3)).epsilon(1e-13));
}

TEST_CASE("k_plus is the poisson kernel on the drifted path") {
  Vec x = vec2(0.3, 0.5), y = vec2(-0.4, 0.0);
  Vec xs = x;
  xs[1] += 0.25;
  REQUIRE(hs::k_plus(x, y, 0.25) == hs::poisson(xs, y));

  // boundary start, t -> 0+, y != x: pointwise vanishing
  Vec xb = vec2(0.0, 0.0), yb = vec2(1.0, 0.0);
  double prev = 1.0;
  for (double t : {1e-2, 1e-3, 1e-4}) {
    double v = hs::k_plus(xb, yb, t);
    REQUIRE(v < prev);
    prev = v;
  }
  REQUIRE(prev < 1e-3);

  // truncated unit mass at n=2, x=(0,0.5), t=0.5: arctan closed form with x_n + t = 1
  auto kp = [](double y1) { return hs::k_plus(vec2(0.0, 0.5), vec2(y1, 0.0), 0.5); };
  double mass = integrate_interval(kp, -5.0, 5.0, QuadratureSpec::uniform_panels(20, 8)).value +
                integrate_interval(kp, 5.0, 300.0, QuadratureSpec::graded_panels(20, 8, 0.5, grade_end::left)).value +
                integrate_interval(kp, -300.0, -5.0, QuadratureSpec::graded_panels(20, 8, 0.5, grade_end::right)).value;
  REQUIRE(std::abs(mass - 2.0 / kPi * std::atan(300.0)) < 1e-10);
}

TEST_CASE("free heat kernel basics") {
  REQUIRE(hs::heat_kernel_free(2, vec2(0.3, 0.4), vec2(0.3, 0.4), 0.7) ==
          Catch::Approx(1.0 / (4.0 * kPi * 0.7)).epsilon(1e-14));
  REQUIRE(hs::heat_kernel_free(3, vec3(0, 0, 0), vec3(0, 0, 0), 0.2) ==
          Catch::Approx(std::pow(4.0 * kPi * 0.2, -1.5)).epsilon(1e-14));
  // mass over a large box, n=2
  double t = 0.3;
  auto inner = [&](double a, double b) {
    return hs::heat_kernel_free(2, vec2(0.0, 0.0), vec2(a, b), t);
  };
  Rule1D g = make_rule(-12.0, 12.0, QuadratureSpec::uniform_panels(24, 8));
  double mass = 0.0;
  for (size_t i = 0; i < g.x.size(); ++i)
    for (size_t j = 0; j < g.x.size(); ++j) mass += g.w[i] * g.w[j] * inner(g.x[i], g.x[j]);
  REQUIRE(std::abs(mass - 1.0) < 1e-12);
  REQUIRE_THROWS_AS(hs::heat_kernel_free(2, vec2(0, 0), vec2(1, 1), 0.0), kernel_error);
}

TEST_CASE("reflected heat kernel: boundary zero, factorization, domination") {
  Vec xb = vec2(0.7, 0.0), y = vec2(0.1, 0.8);
  REQUIRE(hs::gamma_plus(xb, y, 0.4) == 0.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.5);
  for (int i = 0; i < 10; ++i) {
    Vec x2 = vec2(u(rng), u(rng));
    Vec y2 = vec2(u(rng), u(rng));
    double t = u(rng);
    double gp = hs::gamma_plus(x2, y2, t);
    REQUIRE(gp <= hs::heat_kernel_free(2, x2, y2, t));
    auto heat1d = [&](double d) { return std::exp(-d * d / (4.0 * t)) / std::sqrt(4.0 * kPi * t); };
    double fact = heat1d(x2[0] - y2[0]) * (heat1d(x2[1] - y2[1]) - heat1d(x2[1] + y2[1]));
    REQUIRE(gp == Catch::Approx(fact).margin(1e-13));
  }
}

TEST_CASE("dynamical heat green function: forms agree, reference values, symmetry") {
  // reference values computed with an independent adaptive integrator (frozen)
  REQUIRE(hs::g_plus_heat(vec2(0.0, 0.5), vec2(0.3, 0.7), 0.25).value ==
          Catch::Approx(0.25104011084856687).margin(2e-8));
  REQUIRE(hs::g_plus_heat(vec2(0.0, 0.5), vec2(-0.2, 0.1), 0.25).value ==
          Catch::Approx(0.2531045160829506).margin(2e-8));
  REQUIRE(hs::g_plus_heat(vec3(0.0, 0.0, 0.5), vec3(0.3, -0.1, 0.7), 0.25).value ==
          Catch::Approx(0.1446421353260195).margin(2e-8));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.05, 1.2);
  for (int i = 0; i < 20; ++i) {
    int n = i % 2 ? 2 : 3;
    Vec x = n == 2 ? vec2(u(rng) - 0.5, u(rng)) : vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng));
    Vec y = n == 2 ? vec2(u(rng) - 0.5, u(rng)) : vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng));
    double t = u(rng);
    auto a = hs::g_plus_heat(x, y, t, QuadratureSpec::uniform_panels(20, 8), hs::heat_form::image);
    auto b = hs::g_plus_heat(x, y, t, QuadratureSpec::uniform_panels(20, 8), hs::heat_form::difference);
    REQUIRE(std::abs(a.value - b.value) < 1e-8);
    auto sym = hs::g_plus_heat(y, x, t);
    REQUIRE(std::abs(a.value - sym.value) <= 2.0 * (a.error + sym.error) + 1e-12);
  }

  // t -> 0+ with x != y
  REQUIRE(std::abs(hs::g_plus_heat(vec2(0.0, 0.5), vec2(0.6, 0.8), 1e-3).value) < 1e-12);
}

TEST_CASE("dynamical heat green function satisfies the truncated mass identity") {
  auto m = hs::g_plus_heat_mass(vec2(0.3, 0.5), 0.25, 96);
  REQUIRE(m.tail_bound < 1e-10);
  REQUIRE(std::abs(m.total() - 1.0) < 1e-4 + m.tail_bound);
  REQUIRE(m.boundary > 0.01);  // the literal boundary trace carries real mass
}

TEST_CASE("interior caloric defect of g_plus_heat decays at second order") {
  Vec x = vec2(0.1, 0.6);
  double t = 0.3;
  auto u = [&](const Vec& p, double s) {
    return hs::g_plus_heat(p, vec2(-0.2, 0.9), s, QuadratureSpec::uniform_panels(30, 10)).value;
  };
  auto residual = [&](double h) {
    double lap = (u(vec2(x[0] + h, x[1]), t) + u(vec2(x[0] - h, x[1]), t) +
                  u(vec2(x[0], x[1] + h), t) + u(vec2(x[0], x[1] - h), t) - 4.0 * u(x, t)) /
                 (h * h);
    double ut = (u(x, t + h * h) - u(x, t - h * h)) / (2.0 * h * h);
    return std::abs(ut - lap);
  };
  double r1 = residual(0.08), r2 = residual(0.04), r3 = residual(0.02);
  double order1 = std::log2(r1 / r2), order2 = std::log2(r2 / r3);
  REQUIRE(order1 > 1.8);
  REQUIRE(order2 > 1.8);
}

TEST_CASE("dynamical boundary residual of g_plus_heat vanishes under refinement") {
  // outward normal at x_n = 0 is -e_n: law reads d_t u - d_{x_n} u = 0
  Vec xb = vec2(0.2, 0.0);
  Vec y = vec2(-0.1, 0.7);
  double t = 0.3;
  auto u = [&](double xn, double s) {
    return hs::g_plus_heat(vec2(xb[0], xn), y, s, QuadratureSpec::uniform_panels(30, 10)).value;
  };
  auto residual = [&](double h) {
    double dn = (-3.0 * u(0.0, t) + 4.0 * u(h, t) - u(2.0 * h, t)) / (2.0 * h);
    double ut = (u(0.0, t + h) - u(0.0, t - h)) / (2.0 * h);
    return std::abs(ut - dn);
  };
  double r1 = residual(0.02), r2 = residual(0.01), r3 = residual(0.005);
  REQUIRE(r2 < r1);
  REQUIRE(r3 < r2);
  REQUIRE(std::log2(r1 / r3) / 2.0 > 0.9);
}

TEST_CASE("k_plus is harmonic in x away from the source") {
  Vec x = vec2(0.3, 0.8);
  Vec y = vec2(-0.5, 0.0);
  double t = 0.4;
  auto residual = [&](double h) {
    auto f = [&](double a, double b) { return hs::k_plus(vec2(a, b), y, t); };
    return std::abs((f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) +
                     f(x[0], x[1] - h) - 4.0 * f(x[0], x[1])) /
                    (h * h));
  };
  double r1 = residual(0.02), r2 = residual(0.01);
  REQUIRE(std::log2(r1 / r2) > 1.8);
}
