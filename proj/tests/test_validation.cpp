#include <doctest.h>

#include <cmath>
#include <numbers>

#include "magweyl/validation.hpp"

using namespace magweyl;

TEST_CASE("validation: covariance residual") {
    auto g = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::constant(1.0));
    auto psi = ScalarField::parse("x1*x2");
    auto f = Symbol::parse("xi1", 2, 1.0);
    CHECK(gauge_covariance_residual(f, A, psi, g) <= 1e-12);
    CHECK(gauge_covariance_residual(f, A, psi, g, true) > 1e-2);
    // x-only symbols commute with the gauge factor under both rules
    auto v = Symbol::parse("cos(x1) + x2^2", 2, 0.0);
    CHECK(gauge_covariance_residual(v, A, psi, g, true) <= 1e-14);
}

TEST_CASE("validation: S^0_00 family") {
    const double L = 4 * std::numbers::pi;
    auto a = s00_family(1, L, 5, 3), b = s00_family(1, L, 5, 3), c = s00_family(1, L, 5, 4);
    REQUIRE(a.size() == 5);
    const double x[1] = {0.3}, xs[1] = {0.3 + L}, xi[1] = {-0.7};
    for (int i = 0; i < 5; ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].real);
        CHECK(a[i].m == 0.0);
        CHECK(a[i].rho == 0.0);
        // periodic on the box, bounded by the sum of the amplitudes
        CHECK(std::abs(a[i](x, xi) - a[i](xs, xi)) <= 1e-12);
        CHECK(std::abs(a[i](x, xi)) <= 3.0);
    }
    CHECK(a[0].label != c[0].label);

    // one cosine: all seminorms up to order 2 are max(1, |p|, |q|)^2 times |c|
    auto f = Symbol::parse("0.5*cos(2*x1 + 0.5*xi1 + 0.1)", 1, 0.0, 0.0, 0.0);
    auto s = s00_seminorms({f}, make_grid(1, std::numbers::pi, 64), 2);
    CHECK(s[0] == doctest::Approx(0.5 * 4).epsilon(1e-3));
}

TEST_CASE("validation: norm versus seminorm constant") {
    const double L = 4 * std::numbers::pi;
    auto fam = s00_family(1, L, 8, 11);
    auto region = make_grid(1, L, 32);
    auto s = s00_seminorms(fam, region);
    auto A = VectorPotential::zero(1);
    auto f1 = calderon_vaillancourt_fit(fam, s, A, make_grid(1, L, 32));
    auto f2 = calderon_vaillancourt_fit(fam, s, A, make_grid(1, L, 64));
    CHECK(f1.constant > 0.0);
    CHECK(std::abs(f2.constant / f1.constant - 1.0) <= 0.2);
    // the norm never exceeds the sup of the symbol for these grids by much
    for (std::size_t i = 0; i < fam.size(); ++i) CHECK(f1.norms[i] <= s[i] * 3.0);
    CHECK_THROWS_AS(calderon_vaillancourt_fit(fam, {1.0}, A, region), std::invalid_argument);
}
