#include <catch2/catch_amalgamated.hpp>
#include <dynakernel/special.hpp>

using namespace dynakernel;

// Reference values computed independently with mpmath/scipy (frozen).
TEST_CASE("bessel_j matches reference values to 1e-12") {
  struct Ref { double nu, x, j; };
  const Ref refs[] = {
      {0.0, 1.0, 0.7651976865579666},
      {1.0, 1.0, 0.44005058574493355},
      {5.0, 2.5, 0.01950162513450322},
      {0.0, 25.0, 0.09626678327595811},
      {7.0, 40.0, -0.10802343173577945},
      {40.0, 60.1, -0.07057385578019254},
      {12.0, 90.0, -0.03893387106334529},
      {0.0, 99.5, -0.019543066407440787},
  };
  for (const auto& r : refs) {
    auto v = bessel_j(r.nu, r.x);
    INFO("nu=" << r.nu << " x=" << r.x);
    REQUIRE(std::abs(v.value - r.j) < 1e-12);
    REQUIRE(std::abs(v.value - r.j) <= v.error + 1e-13);
  }
}

TEST_CASE("spherical bessel matches reference values") {
  struct Ref { int l; double x, j; };
  const Ref refs[] = {
      {0, 1.0, 0.8414709848078965},
      {1, 1.0, 0.3011686789397571},
      {2, 7.7, -0.1296005460678878},
      {10, 13.2, 0.09068374436864611},
      {25, 60.0, 0.015605802016778633},
  };
  for (const auto& r : refs) {
    INFO("l=" << r.l << " x=" << r.x);
    REQUIRE(std::abs(spherical_bessel_j(r.l, r.x) - r.j) < 1e-13);
  }
}

TEST_CASE("half-integer orders reduce to closed trigonometric forms") {
  for (double x : {0.3, 2.0, 11.5, 40.0}) {
    double j_half = bessel_j(0.5, x).value;
    REQUIRE(std::abs(j_half - std::sqrt(2.0 / (kPi * x)) * std::sin(x)) < 1e-13);
    double j_3half = bessel_j(1.5, x).value;
    double want = std::sqrt(2.0 / (kPi * x)) * (std::sin(x) / x - std::cos(x));
    REQUIRE(std::abs(j_3half - want) < 1e-13);
  }
}

TEST_CASE("bessel derivative identities") {
  for (double x : {0.7, 3.3, 26.0}) {
    REQUIRE(std::abs(bessel_j_prime(0.0, x) + bessel_j(1.0, x).value) < 1e-13);
    // central difference cross-check
    double h = 1e-6;
    for (double nu : {1.0, 4.0, 2.5}) {
      double fd = (bessel_j(nu, x + h).value - bessel_j(nu, x - h).value) / (2.0 * h);
      REQUIRE(std::abs(bessel_j_prime(nu, x) - fd) < 1e-8);
    }
  }
}

TEST_CASE("bessel zeros match reference values") {
  const double j0z[] = {2.4048255576957724, 5.520078110286311, 8.653727912911013,
                        11.791534439014281, 14.930917708487787};
  for (int k = 1; k <= 5; ++k) {
    REQUIRE(bessel_j_zero(0.0, k) == Catch::Approx(j0z[k - 1]).epsilon(1e-13));
  }
  const double j1z[] = {3.8317059702075125, 7.015586669815619, 10.173468135062722};
  for (int k = 1; k <= 3; ++k)
    REQUIRE(bessel_j_zero(1.0, k) == Catch::Approx(j1z[k - 1]).epsilon(1e-13));
  const double j2z[] = {5.135622301840683, 8.417244140399866};
  for (int k = 1; k <= 2; ++k)
    REQUIRE(bessel_j_zero(2.0, k) == Catch::Approx(j2z[k - 1]).epsilon(1e-13));
  // half-integer: zeros of J_{1/2} are multiples of pi, J_{3/2} and J_{5/2} from tables
  REQUIRE(bessel_j_zero(0.5, 3) == Catch::Approx(3.0 * kPi).epsilon(1e-13));
  REQUIRE(bessel_j_zero(1.5, 1) == Catch::Approx(4.493409457909064).epsilon(1e-12));
  REQUIRE(bessel_j_zero(2.5, 1) == Catch::Approx(5.763459196894548).epsilon(1e-12));
  // |J'| at a simple zero equals |J_{nu+1}| there
  double z = bessel_j_zero(3.0, 2);
  REQUIRE(std::abs(std::abs(bessel_j_prime(3.0, z)) - std::abs(bessel_j(4.0, z).value)) < 1e-13);
  // high order: first zero sits above the order
  double z40 = bessel_j_zero(40.0, 1);
  REQUIRE(z40 > 40.0);
  REQUIRE(std::abs(bessel_j(40.0, z40).value) < 1e-12);
}

TEST_CASE("legendre polynomials match reference values") {
  REQUIRE(legendre_p(3, 0.9) == Catch::Approx(0.47250000000000014).epsilon(1e-14));
  REQUIRE(legendre_p(8, -0.3) == Catch::Approx(-0.239074591015625).epsilon(1e-13));
  REQUIRE(legendre_p(15, 0.99) == Catch::Approx(0.11375537624584565).epsilon(1e-12));
  REQUIRE(legendre_p(40, 0.5) == Catch::Approx(-0.09542943523261549).epsilon(1e-12));
  std::vector<double> a;
  legendre_p_array(12, 1.0, a);
  for (double v : a) REQUIRE(v == Catch::Approx(1.0));
}

TEST_CASE("chebyshev array reproduces cos(l theta)") {
  std::vector<double> t;
  double th = 1.234;
  chebyshev_t_array(20, std::cos(th), t);
  for (int l = 0; l <= 20; ++l)
    REQUIRE(t[static_cast<size_t>(l)] == Catch::Approx(std::cos(l * th)).margin(1e-12));
}

TEST_CASE("special function domain validation") {
  REQUIRE_THROWS_AS(bessel_j(0.0, -1.0), kernel_error);
  REQUIRE_THROWS_AS(bessel_j(0.0, 2e4), kernel_error);
  REQUIRE_THROWS_AS(bessel_j(0.3, 1.0), kernel_error);
  REQUIRE_THROWS_AS(bessel_j(-1.0, 1.0), kernel_error);
  std::vector<double> scratch;
  REQUIRE_THROWS_AS(legendre_p_array(5, 1.5, scratch), kernel_error);
  REQUIRE_THROWS_AS(bessel_j_zero(0.0, 0), kernel_error);
  try {
    bessel_j(0.3, 1.0);
    FAIL("expected throw");
  } catch (const kernel_error& e) {
    REQUIRE(e.code() == errc::domain_error);
  }
}
