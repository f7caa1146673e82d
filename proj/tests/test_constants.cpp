#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mfb/constants.hpp"

using namespace mfb;

namespace {

// independent oracle: |S^k| via the two-step recursion |S^k| = 2 pi |S^{k-2}| / (k-1)
double sphere_area_recursion(int k) {
    if (k == 0) return 2.0;
    if (k == 1) return 2.0 * pi;
    return 2.0 * pi * sphere_area_recursion(k - 2) / (k - 1);
}

}  // namespace

TEST_CASE("sphere areas match the low-dimensional closed forms") {
    CHECK(sphere_area(1) == Catch::Approx(2.0 * pi).epsilon(1e-15));
    CHECK(sphere_area(2) == Catch::Approx(4.0 * pi).epsilon(1e-15));
    CHECK(sphere_area(3) == Catch::Approx(2.0 * pi * pi).epsilon(1e-15));
    CHECK(sphere_area(4) == Catch::Approx(8.0 * pi * pi / 3.0).epsilon(1e-15));
    CHECK(sphere_area(5) == Catch::Approx(pi * pi * pi).epsilon(1e-15));
    for (int k = 0; k <= 12; ++k)
        CHECK(sphere_area(k) == Catch::Approx(sphere_area_recursion(k)).epsilon(1e-13));
    CHECK_THROWS_AS(sphere_area(-1), std::invalid_argument);
}

TEST_CASE("mass quantum (2m-1)!|S^{2m}|") {
    CHECK(constants_for(Dimension(1)).mass_quantum == Catch::Approx(4.0 * pi).epsilon(1e-15));
    CHECK(constants_for(Dimension(2)).mass_quantum ==
          Catch::Approx(16.0 * pi * pi).epsilon(1e-15));
    CHECK(constants_for(Dimension(3)).mass_quantum ==
          Catch::Approx(128.0 * pi * pi * pi).epsilon(1e-15));
}

TEST_CASE("gamma is half the mass quantum and matches its flux form") {
    for (int m = 1; m <= 6; ++m) {
        Dimension dim(m);
        GeometricConstants c = constants_for(dim);
        CHECK(c.gamma == Catch::Approx(0.5 * c.mass_quantum).epsilon(1e-15));
        CHECK(c.half_mass() == Catch::Approx(c.gamma).epsilon(1e-15));
        // the flux of the fundamental solution through a small sphere is an
        // entirely different computation; agreement pins the normalization
        CHECK(gamma_flux_form(dim) == Catch::Approx(c.gamma).epsilon(1e-13));
    }
    CHECK(constants_for(Dimension(1)).gamma == Catch::Approx(2.0 * pi).epsilon(1e-15));
    CHECK(constants_for(Dimension(2)).gamma == Catch::Approx(8.0 * pi * pi).epsilon(1e-15));
}

TEST_CASE("dimension guards") {
    CHECK_THROWS_AS(Dimension(0), std::invalid_argument);
    CHECK_THROWS_AS(Dimension(7), std::invalid_argument);
    CHECK(Dimension(3).space() == 6);
}

TEST_CASE("factorial helpers") {
    CHECK(factorial(0) == 1);
    CHECK(factorial(5) == 120);
    CHECK(factorial(11) == 39916800);
    CHECK(double_factorial(0) == 1.0);
    CHECK(double_factorial(1) == 1.0);
    CHECK(double_factorial(6) == 48.0);
    CHECK(double_factorial(7) == 105.0);
}
