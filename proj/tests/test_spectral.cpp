#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

#include "magweyl/spectral.hpp"

using namespace magweyl;

namespace {

// Even bound state of -u'' - 2 exp(-x^2) u = E u by shooting from x = -X with
// the decaying solution and bisecting on u'(0) = 0.
double well_ground_state() {
    using state = std::array<double, 2>;
    const double X = 14.0;
    auto slope_at_0 = [&](double E) {
        const double k = std::sqrt(-E);
        state u{1e-8, k * 1e-8};
        auto rhs = [E](const state& s, state& d, double x) {
            d[0] = s[1];
            d[1] = (-2.0 * std::exp(-x * x) - E) * s[0];
        };
        boost::numeric::odeint::integrate_adaptive(
            boost::numeric::odeint::make_controlled<boost::numeric::odeint::runge_kutta_dopri5<state>>(1e-13, 1e-13),
            rhs, u, -X, 0.0, 1e-3);
        return u[1] / std::abs(u[0]);
    };
    // ground state: no node, u'(0) > 0 for E below it, < 0 above
    double lo = -1.99, hi = -1e-3;
    REQUIRE(slope_at_0(lo) > 0);
    REQUIRE(slope_at_0(hi) < 0);
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slope_at_0(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("spectral: diagonal operator") {
    auto g = make_grid(1, 6.0, 16);
    Eigen::VectorXd phi(16);
    for (int k = 0; k < 16; ++k) phi[k] = std::sin(1.7 * k) + 0.1 * k;
    MagneticOperator M{g, phi.cast<cplx>().asDiagonal(), VectorPotential::zero(1), "diag"};
    auto s = spectrum(M);
    std::vector<double> want = to_vec(phi);
    std::sort(want.begin(), want.end());
    for (int k = 0; k < 16; ++k) CHECK(s.eigenvalues[k] == doctest::Approx(want[k]).epsilon(1e-14));
    CHECK(s.hermitian_defect == 0.0);
}

TEST_CASE("spectral: free operator has the lattice momenta squared") {
    auto g = make_grid(1, 10.0, 32);
    auto s = spectrum(quantize(Symbol::parse("xi1^2", 1, 2.0), VectorPotential::zero(1), g));
    std::vector<double> want;
    for (int j = -16; j < 16; ++j) want.push_back(std::pow(2 * std::numbers::pi * j / 10.0, 2));
    std::sort(want.begin(), want.end());
    for (int k = 0; k < 32; ++k) CHECK(std::abs(s.eigenvalues[k] - want[k]) <= 1e-11 * (1 + want[k]));
}

TEST_CASE("spectral: harmonic oscillator") {
    auto g = make_grid(1, 20.0, 128);
    SpectrumOptions so;
    so.eigenvectors = true;
    auto s = spectrum(quantize(Symbol::parse("x1^2 + xi1^2", 1, 2.0), VectorPotential::zero(1), g), so);
    for (int k = 0; k < 10; ++k) {
        CHECK(std::abs(s.eigenvalues[k] - (2 * k + 1)) <= 1e-4);
        CHECK(s.localization[k] >= 0.999);
    }
}

TEST_CASE("spectral: non-Hermitian input is rejected with the asymmetry") {
    auto g = make_grid(1, 6.0, 8);
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(8, 8);
    M(0, 1) = 0.5;
    try {
        spectrum(MagneticOperator{g, M, VectorPotential::zero(1), ""});
        FAIL("expected NonHermitian");
    } catch (const NonHermitian& e) {
        // |M - M*|_F / |M|_F with an independent count
        CHECK(e.asymmetry == doctest::Approx(std::sqrt(0.5) / std::sqrt(8.25)).epsilon(1e-12));
    }
}

TEST_CASE("spectral: Landau reference and clusters") {
    auto l = landau_reference(1.0, 3);
    CHECK(l == std::vector<double>{1, 3, 5, 7});
    CHECK(landau_reference(2.0, 2) == std::vector<double>{2, 6, 10});
    CHECK_THROWS_AS(landau_reference(0.0, 2), std::invalid_argument);

    auto c = clusters({1.0, 1.001, 1.002, 2.0, 3.0, 3.0005}, 0.01, 2);
    REQUIRE(c.size() == 2);
    CHECK(c[0].count == 3);
    CHECK(c[0].mean == doctest::Approx(1.001));
    CHECK(c[1].lo == 3.0);
    CHECK(c[1].hi == 3.0005);
}

TEST_CASE("spectral: Landau levels on a small box") {
    auto g = make_grid(2, 12.0, 36);
    auto A = transversal_gauge(MagneticField::constant(1.0));
    SpectrumOptions so;
    so.eigenvectors = true;
    auto s = spectrum(quantize(Symbol::parse("xi1^2 + xi2^2", 2, 2.0), A, g), so);
    auto c = localized_clusters(s, 0.05);
    REQUIRE(c.size() >= 3);
    const auto want = landau_reference(1.0, 2);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(c[k].mean - want[k]) <= 0.01 * want[k]);
        // at most the flux through the box
        CHECK(c[k].count <= static_cast<std::size_t>(g.L * g.L / (2 * std::numbers::pi)) + 1);
    }
}

TEST_CASE("spectral: gauge-equivalent potentials give the same spectrum") {
    auto g = make_grid(2, 8.0, 16);
    auto B = MagneticField::planar(ScalarField::parse("1 + 1/(1 + x1^2)"));
    auto A = transversal_gauge(B);
    auto A2 = gauge_shift(A, ScalarField::parse("0.3*x1*x2 + sin(x2)"));
    auto f = Symbol::parse("xi1^2 + xi2^2 + 0.5*cos(x1)", 2, 2.0);
    auto s1 = spectrum(quantize(f, A, g));
    auto s2 = spectrum(quantize(f, A2, g));
    CHECK((s1.eigenvalues - s2.eigenvalues).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("spectral: interval merging") {
    auto m = merge_intervals({{2.0, 3.0, {"b"}}, {0.0, 1.0, {"a"}}, {1.05, 1.5, {"c"}}}, 0.1);
    REQUIRE(m.size() == 2);
    CHECK(m[0].lo == 0.0);
    CHECK(m[0].hi == 1.5);
    CHECK(m[0].orbits == std::vector<std::string>{"a", "c"});
    CHECK(m[1].lo == 2.0);
}

TEST_CASE("spectral: essential spectrum of xi^2 + arctan(x)") {
    auto g = make_grid(1, 20.0, 64);
    auto f = Symbol::parse("xi1^2 + arctan(x1)", 1, 2.0);
    auto alg = CoefficientAlgebra::asymptotic_limits_1d();
    auto e = essential_spectrum(f, alg, MagneticField::zero(1), g);
    REQUIRE(e.orbits.size() == 2);
    for (const auto& o : e.orbits) {
        CHECK(o.constant_coefficients);
        REQUIRE(o.range);
        CHECK(std::isinf(o.range->hi));
    }
    CHECK(e.orbits[0].range->lo == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
    CHECK(e.orbits[1].range->lo == doctest::Approx(-std::numbers::pi / 2).epsilon(1e-8));
    REQUIRE(e.intervals.size() == 1);
    CHECK(std::abs(e.lower_edge() + std::numbers::pi / 2) <= 0.02 * std::numbers::pi / 2);
    CHECK(std::isinf(e.intervals[0].hi));
    CHECK(e.intervals[0].orbits.size() == 2);

    // a redundant quasi-orbit leaves the union unchanged
    auto alg2 = alg;
    alg2.quasi_orbits.push_back(alg.quasi_orbits[0]);
    auto e2 = essential_spectrum(f, alg2, MagneticField::zero(1), g);
    REQUIRE(e2.intervals.size() == e.intervals.size());
    for (std::size_t i = 0; i < e.intervals.size(); ++i) {
        CHECK(e2.intervals[i].lo == e.intervals[i].lo);
        CHECK(e2.intervals[i].hi == e.intervals[i].hi);
    }

    // nothing of the full operator lies below the essential edge
    auto r = compare_bulk_vs_essential(f, alg, MagneticField::zero(1), g);
    CHECK(r.bulk.eigenvalues[0] >= -std::numbers::pi / 2 - 0.02);
    CHECK(r.candidates.empty());
    CHECK(r.passed());
}

TEST_CASE("spectral: range closure away from the origin") {
    auto g = make_grid(2, 10.0, 16);
    // minimum 0.25 at xi = (0.7, -0.3)
    auto f = Symbol::parse("(xi1 - 0.7)^2 + 2*(xi2 + 0.3)^2 + 0.25", 2, 2.0);
    auto I = range_closure(f, g);
    CHECK(I.lo == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(std::isinf(I.hi));
    auto h = Symbol::parse("cos(xi1)", 1, 0.0);
    auto J = range_closure(h, make_grid(1, 10.0, 16));
    CHECK(J.lo == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(J.hi == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("spectral: potential well") {
    const double E0 = well_ground_state();
    auto g = make_grid(1, 24.0, 128);
    auto f = Symbol::parse("xi1^2 - 2*exp(-x1^2)", 1, 2.0);
    auto alg = CoefficientAlgebra::vanishing_at_infinity(1);
    auto r = compare_bulk_vs_essential(f, alg, MagneticField::zero(1), g);
    CHECK(std::abs(r.essential.lower_edge()) <= 0.02);
    REQUIRE(!r.candidates.empty());
    CHECK(r.candidates_localized);
    CHECK(r.candidates[0].value < -0.1);
    CHECK(std::abs(r.candidates[0].value - E0) <= 0.02 * std::abs(E0));
    for (Eigen::Index i = 0; i < r.bulk.eigenvalues.size(); ++i)
        if (r.bulk.localization[i] < 0.9) CHECK(r.bulk.eigenvalues[i] >= -0.02);
    CHECK(r.passed());
}

TEST_CASE("spectral: constant coefficients") {
    auto g = make_grid(1, 10.0, 32);
    auto f = Symbol::parse("xi1^2", 1, 2.0);
    auto r = compare_bulk_vs_essential(f, CoefficientAlgebra::constant_coefficients(), MagneticField::zero(1), g);
    CHECK(r.essential.lower_edge() == doctest::Approx(0.0));
    CHECK(r.candidates.empty());
    for (Eigen::Index i = 0; i < r.bulk.eigenvalues.size(); ++i)
        CHECK(r.essential.contains(r.bulk.eigenvalues[i], 1e-12));
}

TEST_CASE("spectral: edges are stable under refinement") {
    auto edges = [](const Symbol& f, const CoefficientAlgebra& alg, double L, int N) {
        return essential_spectrum(f, alg, MagneticField::zero(1), make_grid(1, L, N)).lower_edge();
    };
    auto f1 = Symbol::parse("xi1^2 + arctan(x1)", 1, 2.0);
    auto a1 = CoefficientAlgebra::asymptotic_limits_1d();
    CHECK(std::abs(edges(f1, a1, 20, 64) - edges(f1, a1, 20, 128)) <= 0.01 * std::numbers::pi / 2);

    // periodic coefficients: translates of a Mathieu operator
    auto f2 = Symbol::parse("xi1^2 + cos(x1)", 1, 2.0);
    auto a2 = CoefficientAlgebra::periodic({{2 * std::numbers::pi, 0.0}}, 3);
    const double L = 8 * std::numbers::pi;
    const double e1 = edges(f2, a2, L, 96), e2 = edges(f2, a2, L, 192);
    CHECK(std::abs(e1 - e2) <= 0.01 * std::abs(e2));
    // every translate is unitarily equivalent in the continuum; the band
    // bottom is the bulk ground state
    auto bulk = spectrum(quantize(f2, VectorPotential::zero(1), make_grid(1, L, 192)));
    CHECK(e2 == doctest::Approx(bulk.eigenvalues[0]).epsilon(1e-6));
}

TEST_CASE("spectral: magnetic directional limits") {
    auto g = make_grid(2, 12.0, 36);
    auto B = MagneticField::planar(ScalarField::parse("1 + 1/(1 + x1^2)"));
    auto alg = CoefficientAlgebra::asymptotic_directions({{1.0, 0.0}, {-1.0, 0.0}});
    auto e = essential_spectrum(Symbol::parse("xi1^2 + xi2^2", 2, 2.0), alg, B, g);
    for (const auto& o : e.orbits) CHECK_FALSE(o.constant_coefficients);
    // limit field b = 1: lowest Landau level
    CHECK(std::abs(e.lower_edge() - 1.0) <= 0.02);
}

TEST_CASE("spectral: preconditions") {
    auto g = make_grid(1, 10.0, 16);
    auto alg = CoefficientAlgebra::asymptotic_limits_1d();
    CHECK_THROWS_AS(essential_spectrum(Symbol::parse("xi1 + x1", 1, 1.0), alg, MagneticField::zero(1), g),
                    std::invalid_argument);
    CHECK_THROWS_AS(essential_spectrum(Symbol::parse("arctan(x1)", 1, 0.0), alg, MagneticField::zero(1), g),
                    std::invalid_argument);
    CoefficientAlgebra bad;
    bad.quasi_orbits.push_back({"unruled", {}});
    CHECK_THROWS_AS(essential_spectrum(Symbol::parse("xi1^2", 1, 2.0), bad, MagneticField::zero(1), g),
                    MissingLimitRule);
}
