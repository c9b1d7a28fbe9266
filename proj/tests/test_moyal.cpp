#include <doctest.h>

#include <cmath>
#include <numbers>

#include "magweyl/moyal.hpp"

using namespace magweyl;

namespace {

using P = std::array<double, 2>;
using Span = std::span<const double>;
constexpr cplx I(0.0, 1.0);

double kernel_gap(const SymbolSamples& a, const SymbolSamples& b) {
    return (a.kernel - b.kernel).cwiseAbs().maxCoeff() / std::max(1e-300, b.kernel.cwiseAbs().maxCoeff());
}

// samples of an explicit function on the nodes
Eigen::MatrixXcd tabulate(const PhaseSpaceGrid& g, const std::function<cplx(const P&, const P&)>& fn) {
    Eigen::MatrixXcd out(g.size(), g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        for (std::size_t j = 0; j < g.size(); ++j) out(k, j) = fn(g.position_point(k), g.momentum_point(j));
    return out;
}

// tensor central differences of omega(y, z) = exp(-i Gamma_B(x, y, z)) at y = z = 0,
// one Richardson step
cplx omega_derivative_fd(const MagneticField& B, const P& x, const MultiIndex& mu, const MultiIndex& nu) {
    const int orders[4] = {mu[0], mu[1], nu[0], nu[1]};
    auto stencil = [](int k) -> std::vector<std::pair<int, double>> {
        switch (k) {
            case 0: return {{0, 1.0}};
            case 1: return {{1, 0.5}, {-1, -0.5}};
            case 2: return {{1, 1.0}, {0, -2.0}, {-1, 1.0}};
            default: return {{2, 0.5}, {1, -1.0}, {-1, 1.0}, {-2, -0.5}};
        }
    };
    auto D = [&](double h) {
        cplx total = 0.0;
        for (auto [o0, w0] : stencil(orders[0]))
            for (auto [o1, w1] : stencil(orders[1]))
                for (auto [o2, w2] : stencil(orders[2]))
                    for (auto [o3, w3] : stencil(orders[3])) {
                        P y{o0 * h, o1 * h}, z{o2 * h, o3 * h};
                        total += w0 * w1 * w2 * w3 * std::polar(1.0, -gamma_B(B, Span(x), Span(y), Span(z)));
                    }
        return total / std::pow(h, orders[0] + orders[1] + orders[2] + orders[3]);
    };
    const double h = 0.04;
    return (4.0 * D(h / 2) - D(h)) / 3.0;
}

}  // namespace

TEST_CASE("moyal: pullback of simple products") {
    auto g = make_grid(1, 20.0, 128);
    auto z = VectorPotential::zero(1);
    auto table = phase_table(z, g);
    auto one = Symbol::parse("1", 1, 0.0);
    auto p1 = moyal_pullback(one, one, z, table);
    CHECK(SymbolSamples::interior_distance(p1, tabulate(g, [](const P&, const P&) { return cplx(1.0); })) <= 1e-12);

    // x # xi = x xi + i/2, all higher terms vanish for linear symbols
    auto px = moyal_pullback(Symbol::parse("x1", 1, 0.0, 1.0, 1.0), Symbol::parse("xi1", 1, 1.0), z, table);
    auto expect = tabulate(g, [](const P& x, const P& xi) { return cplx(x[0] * xi[0], 0.5); });
    CHECK(SymbolSamples::interior_distance(px, expect) <= 1e-8);
}

TEST_CASE("moyal: algebraic properties of the pullback") {
    auto g = make_grid(2, 6.0, 12);
    auto B = MagneticField::parse("1 + 1/(1 + x1^2)");
    auto A = transversal_gauge(B);
    auto table = phase_table(A, g);
    auto f = Symbol::parse("jap(xi) + 0.3*arctan(x1)*xi2", 2, 1.0);
    auto h = Symbol::parse("xi1 + sin(x2)", 2, 1.0);
    auto k = Symbol::parse("exp(-x1^2)*xi2^2", 2, 2.0);

    // homomorphism
    auto fh = moyal_pullback(f, h, A, table);
    Eigen::MatrixXcd prod = quantize(f, A, table).matrix * quantize(h, A, table).matrix;
    CHECK((quantize(fh, A, table).matrix - prod).cwiseAbs().maxCoeff() <= 1e-12 * prod.cwiseAbs().maxCoeff());

    // associativity
    auto left = moyal_pullback(fh, dequantize(quantize(k, A, table), table), A, table);
    auto right = moyal_pullback(dequantize(quantize(f, A, table), table), moyal_pullback(h, k, A, table), A, table);
    CHECK(kernel_gap(left, right) <= 1e-9);

    // involution: conj(f # h) = conj(h) # conj(f)
    auto ch = Symbol::from_function([&](Span x, Span xi) { return std::conj(h(x, xi)) * cplx(1.0, 0.2); }, 2, 1.0);
    auto hf = moyal_pullback(conj(ch), f, A, table);
    auto fc = moyal_pullback(conj(f), ch, A, table);
    MagneticOperator adj{g, quantize(fc, A, table).matrix.adjoint(), A, ""};
    CHECK(kernel_gap(dequantize(adj, table), hf) <= 1e-10);

    // gauge independence of the stripped kernel
    auto A2 = gauge_shift(A, ScalarField::parse("x1*x2 + 0.2*sin(x1)"));
    CHECK(kernel_gap(moyal_pullback(f, h, A2, g), fh) <= 1e-8);
}

TEST_CASE("moyal: direct quadrature") {
    auto gauss = Symbol::parse("exp(-(x1^2 + xi1^2))", 1, 0.0);
    auto B0 = MagneticField::zero(1);
    // Gaussian integrals: the eta and zeta integrals give pi e^{-z^2 - y^2},
    // and int e^{-2y^2} dy int e^{-2z^2} dz = pi/2, so the value at 0 is 1/2.
    P X0{0.0, 0.0};
    CHECK(std::abs(moyal_direct(gauss, gauss, B0, Span(X0.data(), 2)) - 0.5) <= 5e-3);

    // a wide Gaussian acts as the unit
    auto wide = Symbol::parse("exp(-0.0005*(x1^2 + xi1^2))", 1, 0.0);
    for (P X : {P{0.0, 0.0}, P{0.4, -0.3}}) {
        const cplx direct = moyal_direct(gauss, wide, B0, Span(X.data(), 2), DirectQuadrature{32});
        CHECK(std::abs(direct - gauss(Span(X.data(), 1), Span(X.data() + 1, 1))) <= 5e-3);
    }

    // against the pullback, with a non-symmetric pair so the sign of sigma matters
    auto g = make_grid(1, 30.0, 256);
    auto z = VectorPotential::zero(1);
    auto f = Symbol::parse("(x1 + 0.5*xi1 + 1)*exp(-(x1^2 + xi1^2))", 1, 0.0);
    auto h = Symbol::parse("exp(-((x1 - 0.3)^2 + (xi1 + 0.2)^2))", 1, 0.0);
    // decaying factors: the flat view is exact once the kernels die out
    auto view = moyal_pullback(f, h, z, g).values(0, ViewWindow::flat());
    double worst = 0.0;
    for (auto [k, j] : {std::pair{128, 128}, {131, 125}, {123, 129}, {136, 128}, {128, 139}}) {
        P X{g.position_point(k)[0], g.momentum_point(j)[0]};
        worst = std::max(worst, std::abs(moyal_direct(f, h, B0, Span(X.data(), 2), DirectQuadrature{32}) - view(k, j)));
    }
    CHECK(worst <= 1e-6);

    CHECK_THROWS_AS(moyal_direct(Symbol::parse("xi1", 1, 1.0), gauss, B0, Span(X0.data(), 2)), std::invalid_argument);
    CHECK_THROWS_AS(moyal_direct(gauss, gauss, B0, Span(X0.data(), 2), DirectQuadrature{7}), std::invalid_argument);
}

TEST_CASE("moyal: direct quadrature with a constant field") {
    const double b = 0.5;
    auto B = MagneticField::constant(b);
    auto f = Symbol::parse("(1 + x2 + xi1)*exp(-(x1^2 + x2^2 + xi1^2 + xi2^2))", 2, 0.0);
    auto h = Symbol::parse("exp(-((x1 - 0.2)^2 + x2^2 + xi1^2 + (xi2 - 0.3)^2))", 2, 0.0);
    auto g = make_grid(2, 20.0, 48);
    auto view = moyal_pullback(f, h, transversal_gauge(B), g).values(0, ViewWindow::flat());
    const std::size_t k = g.size() / 2 + g.N / 2;  // x = 0
    double worst = 0.0;
    for (std::size_t j : {g.size() / 2 + g.N / 2, g.size() / 2 + g.N / 2 + 1}) {
        P x = g.position_point(k), xi = g.momentum_point(j);
        std::array<double, 4> X{x[0], x[1], xi[0], xi[1]};
        worst = std::max(worst, std::abs(moyal_direct(f, h, B, Span(X.data(), 4)) - view(k, j)));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("moyal: expansion structure") {
    auto t1 = expansion_structure(1, 1);
    CHECK(t1.contributions.size() == 4);
    for (const auto& c : t1.contributions) {
        const int sign = ((order(c.a) + order(c.b) + order(c.beta)) % 2) ? -1 : 1;
        CHECK(c.coefficient.num == sign);
        CHECK(c.coefficient.den == 1);
    }
    bool found = false;
    CHECK_THROWS_AS(expansion_structure(2, 4), std::invalid_argument);
    for (const auto& c : expansion_structure(2, 3).contributions)
        if (c.alpha == MultiIndex{0, 2} && c.beta == MultiIndex{1, 0} && c.a == MultiIndex{0, 0} &&
            c.b == MultiIndex{0, 1}) {
            // (-1)^{0+1+1} / (0! * 1! * (0,1)! * (1,0)!) = 1
            CHECK(c.coefficient.num == 1);
            CHECK(c.coefficient.den == 1);
            found = true;
        }
    CHECK(found);
    for (const auto& c : expansion_structure(2, 3).contributions)
        if (c.alpha == MultiIndex{0, 3} && c.b == MultiIndex{0, 0}) {
            CHECK(c.coefficient.den == 6);  // (alpha - b)! = 3!
        }
}

TEST_CASE("moyal: flux jet against differences of Gamma_B") {
    auto B = MagneticField::parse("1 + 0.5*tanh(x1) + 0.3*x2^2");
    P x{0.4, -0.7};
    auto jet = flux_jet(B, Span(x));
    double worst = 0.0;
    for (int total = 0; total <= 3; ++total)
        for (int m0 = 0; m0 <= total; ++m0)
            for (int m1 = 0; m0 + m1 <= total; ++m1)
                for (int n0 = 0; m0 + m1 + n0 <= total; ++n0) {
                    MultiIndex mu{m0, m1}, nu{n0, total - m0 - m1 - n0};
                    worst = std::max(worst, std::abs(jet(mu, nu) - omega_derivative_fd(B, x, mu, nu)));
                }
    CHECK(worst <= 1e-5);
    CHECK(jet({0, 0}, {0, 0}) == cplx(1.0));
    // leading term 2 b (y ^ z): d_y1 d_z2 omega = -2i b(x)
    const double bx = 1 + 0.5 * std::tanh(0.4) + 0.3 * 0.49;
    CHECK(std::abs(jet({1, 0}, {0, 1}) - (-2.0 * I * bx)) <= 1e-12);
}

TEST_CASE("moyal: expansion terms") {
    auto B = MagneticField::parse("1 + 0.5*tanh(x1)");
    auto f = Symbol::parse("xi1^2 + arctan(x1)*xi2", 2, 2.0);
    auto h = Symbol::parse("sin(x2)*xi1 + x1^2", 2, 1.0);
    double w0 = 0.0, w1 = 0.0, wB = 0.0;
    for (P x : {P{0.3, -1.2}, P{-2.0, 0.5}})
        for (P xi : {P{1.0, 2.0}, P{-0.5, 0.7}}) {
            const double fv = xi[0] * xi[0] + std::atan(x[0]) * xi[1];
            const double hv = std::sin(x[1]) * xi[0] + x[0] * x[0];
            // partials of f and h
            const double fx1 = xi[1] / (1 + x[0] * x[0]), fx2 = 0.0, fk1 = 2 * xi[0], fk2 = std::atan(x[0]);
            const double hx1 = 2 * x[0], hx2 = std::cos(x[1]) * xi[0], hk1 = std::sin(x[1]), hk2 = 0.0;
            const cplx poisson = 0.5 * I * (fx1 * hk1 + fx2 * hk2 - fk1 * hx1 - fk2 * hx2);
            w0 = std::max(w0, std::abs(expansion_term(f, h, B, 0, Span(x), Span(xi)) - fv * hv));
            w1 = std::max(w1, std::abs(expansion_term(f, h, B, 1, Span(x), Span(xi)) - poisson));
            wB = std::max(wB, std::abs(expansion_term(f, h, B, 1, Span(x), Span(xi)) -
                                       expansion_term(f, h, MagneticField::zero(2), 1, Span(x), Span(xi))));
        }
    CHECK(w0 <= 1e-10);
    CHECK(w1 <= 1e-10);
    CHECK(wB <= 1e-10);

    // xi_1 # xi_2 with constant b: h_2 = (1/4) d_y2 d_z1 omega = (1/4)(2ib)
    const double b = 0.7;
    auto Bc = MagneticField::constant(b);
    auto k1 = Symbol::parse("xi1", 2, 1.0), k2 = Symbol::parse("xi2", 2, 1.0);
    P x{0.5, 1.0}, xi{0.3, -0.2};
    cplx sum12 = 0.0, sum21 = 0.0;
    for (int l = 0; l <= 2; ++l) {
        sum12 += expansion_term(k1, k2, Bc, l, Span(x), Span(xi));
        sum21 += expansion_term(k2, k1, Bc, l, Span(x), Span(xi));
    }
    CHECK(std::abs(sum12 - (xi[0] * xi[1] + 0.5 * I * b)) <= 1e-12);
    CHECK(std::abs(sum12 - sum21 - I * b) <= 1e-12);

    // grid version agrees with the pointwise one
    auto g = make_grid(2, 6.0, 6);
    auto tab = expansion_term(f, h, B, 2, g);
    P xs = g.position_point(8), ks = g.momentum_point(20);
    CHECK(std::abs(tab(8, 20) - expansion_term(f, h, B, 2, Span(xs), Span(ks))) <= 1e-14);

    // no analytic derivatives beyond order 2
    auto opaque = Symbol::from_function(f.f, 2, 2.0);
    try {
        (void)expansion_term(opaque, opaque, MagneticField::zero(2), 3, Span(x), Span(xi));
        CHECK(false);
    } catch (const DerivativeUnavailable& e) {
        CHECK(std::string(e.what()).find("order 3") != std::string::npos);
    }
}

TEST_CASE("moyal: expansion against the pullback") {
    // constant field, xi_1 # xi_2 - xi_2 # xi_1 = i b where the view is resolved
    const double b = 0.5;
    auto B = MagneticField::constant(b);
    auto A = transversal_gauge(B);
    auto g = make_grid(2, 12.0, 36);
    auto table = phase_table(A, g);
    auto k1 = Symbol::parse("xi1", 2, 1.0), k2 = Symbol::parse("xi2", 2, 1.0);
    Eigen::MatrixXcd Q1 = quantize(k1, A, table).matrix, Q2 = quantize(k2, A, table).matrix;
    auto v12 = dequantize(MagneticOperator{g, Q1 * Q2, A, ""}, table).values();
    auto v21 = dequantize(MagneticOperator{g, Q2 * Q1, A, ""}, table).values();
    auto h12 = expansion_term(k1, k2, B, 0, g) + expansion_term(k1, k2, B, 1, g) + expansion_term(k1, k2, B, 2, g);
    SymbolSamples probe{g, {}, ""};
    double wc = 0.0, we = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!probe.interior_position(k)) continue;
        for (std::size_t j = 0; j < g.size(); ++j) {
            P xi = g.momentum_point(j);
            if (std::hypot(xi[0], xi[1]) > 1.0) continue;
            wc = std::max(wc, std::abs(v12(k, j) - v21(k, j) - I * b));
            we = std::max(we, std::abs(v12(k, j) - h12(k, j)));
        }
    }
    CHECK(wc <= 1e-5);
    CHECK(we <= 1e-5);
}

TEST_CASE("moyal: remainder order") {
    // cos and sin are periodic on this box; the slow spectral kernels of
    // <xi>^2 need sigma = 0.2 L well above 1
    const double L = 8.0 * std::numbers::pi;
    auto g = make_grid(1, L, 192);
    auto z = VectorPotential::zero(1);
    auto B0 = MagneticField::zero(1);
    const std::size_t x0 = 104;  // x = pi / 3
    CHECK(g.position_point(x0)[0] == doctest::Approx(std::numbers::pi / 3).epsilon(1e-12));
    auto ray = positive_ray(g);
    CHECK(ray.size() == 48);

    // linear symbols: the expansion stops at h_1
    auto lin = remainder_order(Symbol::parse("x1 + 2*xi1", 1, 1.0), Symbol::parse("xi1 - x1", 1, 1.0), B0, z, g, 2, x0,
                               ray);
    CHECK(lin.vanishing);

    // R_N in S^{m1 + m2 - N}. x-independent factors would make every h_l with
    // l > 0 vanish, and f = g kills the odd terms.
    auto f1 = Symbol::parse("jap(xi)*(1 + 0.5*cos(x1))", 1, 1.0);
    auto g1 = Symbol::parse("jap(xi)*(1 + 0.5*sin(x1))", 1, 1.0);
    auto r2 = remainder_order(f1, g1, B0, z, g, 2, x0, ray);
    CHECK_FALSE(r2.vanishing);
    CHECK_FALSE(r2.low_dynamic_range);
    CHECK(std::fabs(r2.slope) <= 0.3);

    auto f2 = Symbol::parse("jap(xi)^2*(1 + 0.5*cos(x1))", 1, 2.0);
    auto g2 = Symbol::parse("jap(xi)^2*(1 + 0.5*sin(x1))", 1, 2.0);
    auto r3 = remainder_order(f2, g2, B0, z, g, 3, x0, ray);
    CHECK_FALSE(r3.vanishing);
    CHECK(std::fabs(r3.slope - 1.0) <= 0.3);

    // each extra term lowers the order by one
    double prev = 1e300;
    for (int N = 1; N <= 3; ++N) {
        auto r = remainder_order(f2, g2, B0, z, g, N, x0, ray);
        CHECK(std::fabs(r.slope - (4 - N)) <= 0.3);
        CHECK(r.slope < prev);
        prev = r.slope;
    }
}
