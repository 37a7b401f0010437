#include <catch2/catch_amalgamated.hpp>
#include <dynakernel/ball_laplace.hpp>

#include <random>

using namespace dynakernel;
using namespace dynakernel::ball;

namespace {

Vec rand_interior(std::mt19937_64& rng, int n, double rmax = 0.95) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Vec x = n == 2 ? vec2(u(rng), u(rng)) : vec3(u(rng), u(rng), u(rng));
    if (norm(x) < rmax) return x;
  }
}

// smooth compactly supported bump (support |y| < a) with analytic Laplacian
constexpr double kBumpA = 0.8;
double bump(const Vec& y) {
  double s = kBumpA * kBumpA - dot(y, y);
  return s > 0.0 ? s * s * s * s : 0.0;
}
double bump_neg_lap(const Vec& y) {
  double r2 = dot(y, y);
  double s = kBumpA * kBumpA - r2;
  if (s <= 0.0) return 0.0;
  return -(s * s * (48.0 * r2 - 8.0 * y.n * s));
}

}  // namespace

TEST_CASE("inversion identity on the boundary") {
  std::mt19937_64 rng(3);
  for (int n : {2, 3}) {
    for (int i = 0; i < 10; ++i) {
      Vec x = rand_interior(rng, n);
      if (norm(x) < 1e-3) continue;
      Vec y = normalized(rand_interior(rng, n));
      double lhs = norm(x) * dist(y, inversion(x));
      REQUIRE(lhs == Catch::Approx(dist(x, y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ball green function: radial limit, boundary zero, symmetry") {
  REQUIRE(green_ball(vec2(0, 0), vec2(0.5, 0)) ==
          Catch::Approx(-std::log(0.5) / (2.0 * kPi)).epsilon(1e-14));
  REQUIRE(green_ball(vec3(0, 0, 0), vec3(0.5, 0, 0)) ==
          Catch::Approx(1.0 / (4.0 * kPi) * (1.0 / 0.5 - 1.0)).epsilon(1e-14));

  std::mt19937_64 rng(5);
  for (int n : {2, 3}) {
    for (int i = 0; i < 15; ++i) {
      Vec x = rand_interior(rng, n);
      Vec y = rand_interior(rng, n);
      if (dist(x, y) < 1e-3) continue;
      REQUIRE(green_ball(x, y) == Catch::Approx(green_ball(y, x)).margin(1e-12));
      Vec yb = normalized(y);
      REQUIRE(std::abs(green_ball(x, yb)) < 1e-13);
    }
  }
  REQUIRE_THROWS_AS(green_ball(vec2(0.3, 0), vec2(0.3, 0)), kernel_error);
  REQUIRE_THROWS_AS(green_ball(vec2(1.1, 0), vec2(0.3, 0)), kernel_error);
}

TEST_CASE("ball poisson kernel: center values, unit mass, positivity") {
  REQUIRE(poisson_ball(vec2(0, 0), vec2(1, 0)) == Catch::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));
  REQUIRE(poisson_ball(vec3(0, 0, 0), vec3(0, 0, 1)) == Catch::Approx(1.0 / (4.0 * kPi)).epsilon(1e-14));

  SphereRule s3 = sphere_rule(3, 48);
  double mass3 = apply_sphere(s3, [](const Vec& y) { return poisson_ball(vec3(0.7, 0, 0), y); });
  REQUIRE(std::abs(mass3 - 1.0) < 1e-10);

  SphereRule s2 = sphere_rule(2, 256);
  double mass2 = apply_sphere(s2, [](const Vec& y) { return poisson_ball(vec2(0.31, -0.42), y); });
  REQUIRE(std::abs(mass2 - 1.0) < 1e-12);

  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    Vec x = rand_interior(rng, 2);
    REQUIRE(poisson_ball(x, normalized(rand_interior(rng, 2))) > 0.0);
  }
}

TEST_CASE("k1: unit mass, uniform large-time limit, Dirac concentration") {
  SphereRule s2 = sphere_rule(2, 256);
  double mass = apply_sphere(s2, [](const Vec& y) { return k1(vec2(0.9, 0.0), y, 0.1); });
  REQUIRE(std::abs(mass - 1.0) < 1e-10);

  Vec xb = vec2(1.0, 0.0);
  for (const Vec& y : {vec2(0.0, 1.0), vec2(-1.0, 0.0)}) {
    REQUIRE(std::abs(k1(xb, y, 40.0) - 1.0 / (2.0 * kPi)) < 1e-12);
    double prev = 10.0;
    for (double t : {0.5, 0.1, 0.02}) {
      double v = k1(xb, y, t);
      REQUIRE(v < prev);
      prev = v;
    }
    REQUIRE(prev < 5e-2);
  }
}

TEST_CASE("j1 matches the flowed green function") {
  Vec x = vec2(0.5, 0.0), y = vec2(0.45, 0.2);
  REQUIRE(j1(x, y, 0.0) == green_ball(x, y));
  REQUIRE(j1(vec2(0.5, 0.0), vec2(0.5, 0.0), std::log(2.0)) ==
          green_ball(vec2(0.25, 0.0), vec2(0.5, 0.0)));
  REQUIRE(std::abs(j1(x, normalized(vec2(0.3, -0.8)), 0.7)) < 1e-13);
}

TEST_CASE("harmonic extension reproduces harmonic polynomials") {
  std::mt19937_64 rng(13);
  BoundaryFunction one = BoundaryFunction::constant(1.0);
  BoundaryFunction coord{[](const Vec& y) { return y[0]; }, smoothness::smooth};
  for (int n : {2, 3}) {
    for (int i = 0; i < 5; ++i) {
      Vec x = rand_interior(rng, n, 0.85);
      auto u1 = harmonic_extension(one, x);
      REQUIRE(std::abs(u1.value - 1.0) < 1e-10);
      auto ux = harmonic_extension(coord, x);
      REQUIRE(ux.value == Catch::Approx(x[0]).margin(1e-10));
    }
  }
  // mean value property at the center
  BoundaryFunction wavy{[](const Vec& y) { return std::exp(y[0]) * std::cos(y[1]); }, smoothness::smooth};
  auto center = harmonic_extension(wavy, vec2(0, 0));
  SphereRule s = sphere_rule(2, 512);
  double avg = apply_sphere(s, wavy.f) / (2.0 * kPi);
  REQUIRE(center.value == Catch::Approx(avg).margin(1e-12));
  // degree-2 harmonic polynomial in n=3
  BoundaryFunction quad{[](const Vec& y) { return y[0] * y[1] + y[2]; }, smoothness::smooth};
  Vec x3 = vec3(0.2, -0.3, 0.4);
  REQUIRE(harmonic_extension(quad, x3).value == Catch::Approx(x3[0] * x3[1] + x3[2]).margin(1e-10));
}

TEST_CASE("dynamical laplace solution: flow identity, constants, boundary recovery") {
  BoundaryFunction data{[](const Vec& y) { return 1.0 + 0.5 * y[0] - 0.2 * y[1]; }, smoothness::smooth};
  Vec x = vec2(0.6, -0.3);
  double t = 0.4;
  auto a = laplace_dynamical_solution(data, x, t);
  auto b = harmonic_extension(data, std::exp(-t) * x);
  REQUIRE(a.value == Catch::Approx(b.value).margin(2.0 * (a.error + b.error) + 1e-14));

  REQUIRE(std::abs(laplace_dynamical_solution(BoundaryFunction::constant(1.0), vec2(0.9, 0.2), 1.3).value -
                   1.0) < 1e-10);

  Vec xb = vec2(1.0, 0.0);
  double target = data(xb);
  double prev = 1e9;
  for (double s : {0.5, 0.2, 0.05, 0.01}) {
    double v = laplace_dynamical_solution(data, xb, s).value;
    REQUIRE(std::abs(v - target) < prev);
    prev = std::abs(v - target);
  }
  REQUIRE(prev < 2e-2);  // deviation is O(t) for smooth data
}

TEST_CASE("interior dynamical solution: green identity at t = 0") {
  InteriorFunctionC2 phi{bump, bump_neg_lap};
  std::mt19937_64 rng(17);
  for (int n : {2, 3}) {
    for (int i = 0; i < 5; ++i) {
      Vec x = rand_interior(rng, n, 0.7);
      auto w = laplace_dynamical_interior_solution(phi, x, 0.0);
      REQUIRE(w.value == Catch::Approx(bump(x)).margin(5e-5 + 3.0 * w.error));
    }
  }
  InteriorFunctionC2 zero{[](const Vec&) { return 0.0; }, [](const Vec&) { return 0.0; }};
  REQUIRE(laplace_dynamical_interior_solution(zero, vec2(0.3, 0.2), 0.5).value == 0.0);
}

TEST_CASE("interior dynamical solution satisfies the forced equation") {
  InteriorFunctionC2 phi{bump, bump_neg_lap};
  Vec x = vec2(0.25, 0.1);
  double t = 0.3;
  auto w = [&](double a, double b) {
    return laplace_dynamical_interior_solution(phi, vec2(a, b), t, 20, 8, 64).value;
  };
  auto residual = [&](double h) {
    double lap = (w(x[0] + h, x[1]) + w(x[0] - h, x[1]) + w(x[0], x[1] + h) + w(x[0], x[1] - h) -
                  4.0 * w(x[0], x[1])) /
                 (h * h);
    Vec c = std::exp(-t) * x;
    double forcing = -std::exp(-2.0 * t) * (-bump_neg_lap(c));
    return std::abs(-lap - forcing);
  };
  double r1 = residual(0.1), r2 = residual(0.05);
  REQUIRE(std::log2(r1 / r2) > 1.5);
  REQUIRE(r2 < 0.05);
}

TEST_CASE("laplace decomposition identity reconstructs test functions") {
  // f = 1 - |x|^2: zero trace, -lap f = 2n
  std::mt19937_64 rng(21);
  for (int n : {2, 3}) {
    for (int i = 0; i < 5; ++i) {
      Vec x = rand_interior(rng, n, 0.8);
      BallRule b = ball_rule_about(x, 24, 8, n == 2 ? 96 : 24);
      double vol = apply_ball(b, [&](const Vec& y) { return green_ball(x, y) * 2.0 * n; });
      REQUIRE(vol == Catch::Approx(1.0 - dot(x, x)).margin(1e-6));
    }
  }
  // f = y_1^2: trace y_1^2, -lap f = -2
  Vec x = vec2(0.4, -0.2);
  BallRule b = ball_rule_about(x, 28, 8, 128);
  double vol = apply_ball(b, [&](const Vec& y) { return green_ball(x, y) * (-2.0); });
  SphereRule s = sphere_rule(2, 256);
  double bdry = apply_sphere(s, [&](const Vec& y) { return poisson_ball(x, y) * y[0] * y[0]; });
  REQUIRE(vol + bdry == Catch::Approx(x[0] * x[0]).margin(1e-6));
}
