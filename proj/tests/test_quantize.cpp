#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "magweyl/quantize.hpp"

using namespace magweyl;

namespace {

using P = std::array<double, 2>;
using Span = std::span<const double>;

Eigen::MatrixXcd multiplication(const PhaseSpaceGrid& g, const std::function<double(const P&)>& psi, double sign) {
    Eigen::VectorXcd d(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) d(k) = std::polar(1.0, sign * psi(g.position_point(k)));
    return d.asDiagonal();
}

double rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return operator_norm(a - b) / operator_norm(b); }

}  // namespace

TEST_CASE("quantize: identity and multiplication symbols") {
    auto g = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::constant(0.8));
    auto I = quantize(Symbol::parse("1", 2, 0.0), A, g);
    CHECK(I.matrix == Eigen::MatrixXcd::Identity(g.size(), g.size()));
    auto D = quantize(Symbol::parse("cos(x1) + x2", 2, 0.0), A, g);
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(g.size(), g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        P x = g.position_point(k);
        expect(k, k) = std::cos(x[0]) + x[1];
    }
    CHECK((D.matrix - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quantize: xi is -i d/dx on band-limited vectors") {
    auto g = make_grid(1, 20.0, 64);
    auto M = quantize(Symbol::parse("xi1", 1, 1.0), VectorPotential::zero(1), g);
    auto u = sample(g, [](Span x) { return cplx(std::exp(-x[0] * x[0] / 2) * std::cos(x[0]), 0.0); });
    Eigen::VectorXcd du = -cplx(0, 1) * spectral_derivative(u, 0).values;
    CHECK((M.matrix * u.values - du).cwiseAbs().maxCoeff() <= 1e-8);
    // xi^2 is the spectral Laplacian up to the Nyquist row
    auto L2 = quantize(Symbol::parse("xi1^2", 1, 2.0), VectorPotential::zero(1), g);
    Eigen::VectorXcd d2 = -spectral_derivative(spectral_derivative(u, 0), 0).values;
    CHECK((L2.matrix * u.values - d2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("quantize: adjoint and hermiticity") {
    auto g = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::parse("1 + 0.5/(1 + x1^2)"));
    auto table = phase_table(A, g);
    auto h = Symbol::parse("jap(xi)^2 + arctan(x1)*xi2 + cos(x2)", 2, 2.0);
    CHECK(hermitian_defect(quantize(h, A, table).matrix) <= 1e-12);
    SymbolFn cf = [](Span x, Span xi) { return cplx(xi[0] * std::cos(x[1]), std::atan(x[0]) * xi[1] * xi[1]); };
    auto f = Symbol::from_function(cf, 2, 2.0);
    auto fc = conj(f);
    Eigen::MatrixXcd Mf = quantize(f, A, table).matrix;
    Eigen::MatrixXcd Mc = quantize(fc, A, table).matrix;
    CHECK((Mc - Mf.adjoint()).norm() / Mf.norm() <= 1e-12);
}

TEST_CASE("quantize: gauge covariance and the wrong quantization") {
    auto g = make_grid(2, 6.0, 12);
    const double b = 1.0;
    auto A = transversal_gauge(MagneticField::constant(b));
    auto psi = ScalarField::parse("x1*x2");
    auto A2 = gauge_shift(A, psi);
    auto psi_fn = [&](const P& x) { return x[0] * x[1]; };
    Eigen::MatrixXcd U = multiplication(g, psi_fn, +1), Ui = multiplication(g, psi_fn, -1);
    auto f = Symbol::parse("xi1", 2, 1.0);
    auto good = rel(quantize(f, A2, g).matrix, U * quantize(f, A, g).matrix * Ui);
    auto bad = rel(wrong_quantize(f, A2, g).matrix, U * wrong_quantize(f, A, g).matrix * Ui);
    CHECK(good <= 1e-12);
    CHECK(bad > 1e-2);
    // shifting a table equals rebuilding it
    auto t1 = phase_table(A, g).gauge_shifted(psi);
    auto t2 = phase_table(A2, g);
    CHECK((t1.gamma - t2.gamma).cwiseAbs().maxCoeff() <= 1e-12);
    // B = 0, A = 0: the two quantizations agree
    auto h = Symbol::parse("xi1^2 + sin(x1)*xi2", 2, 2.0);
    auto z = VectorPotential::zero(2);
    CHECK((quantize(h, z, g).matrix - wrong_quantize(h, z, g).matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quantize: dequantize round trips") {
    auto g = make_grid(1, 20.0, 128);
    auto z = VectorPotential::zero(1);
    auto f = Symbol::parse("xi1^2 + arctan(x1)", 1, 2.0);
    auto M = quantize(f, z, g);
    auto s = dequantize(M, z);
    CHECK(SymbolSamples::interior_distance(s, node_samples(f, g)) <= 1e-10);
    CHECK((quantize(s, z).matrix - M.matrix).cwiseAbs().maxCoeff() == 0.0);

    auto one = dequantize(MagneticOperator{g, Eigen::MatrixXcd::Identity(g.size(), g.size()), z, "1"}, z);
    CHECK(SymbolSamples::interior_distance(one, node_samples(Symbol::parse("1", 1, 0.0), g)) <= 1e-12);

    // magnetic round trip in 2D: the kernel determines the operator
    auto g2 = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::parse("1 + 1/(1 + x1^2)"));
    auto table = phase_table(A, g2);
    auto h = Symbol::parse("jap(xi)^2 + 0.3*tanh(x1)*xi2", 2, 2.0);
    auto Mh = quantize(h, A, table);
    auto sh = dequantize(Mh, table);
    CHECK((quantize(sh, A, table).matrix - Mh.matrix).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("quantize: phase table for a non-polynomial field") {
    // the table is assembled from short steps; compare with direct fluxes
    auto g = make_grid(2, 8.0, 16);
    auto B = MagneticField::parse("1 + 1/(1 + x1^2) + 0.5*exp(-x2^2)");
    auto A = transversal_gauge(B);
    auto table = phase_table(A, g);
    std::mt19937 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    const P origin{0.0, 0.0};
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = pick(rng), l = pick(rng);
        P x = g.position_point(k), y = g.position_point(l);
        const double direct = flux_triangle(B, Span(origin), Span(x), Span(y));
        worst = std::max(worst, std::abs(table.gamma(k, l) - direct));
    }
    CHECK(worst <= 1e-10);
    CHECK((table.gamma + table.gamma.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quantize: magnetic translations") {
    auto g = make_grid(2, 8.0, 16);
    const double b = 0.7;
    auto B = MagneticField::constant(b);
    auto A = transversal_gauge(B);
    P zero{0, 0};
    CHECK(magnetic_translation(A, Span(zero.data(), 2), g) == Eigen::MatrixXcd::Identity(g.size(), g.size()));
    P y{2 * g.dx(), -g.dx()};
    Eigen::MatrixXcd S = magnetic_translation(VectorPotential::zero(2), Span(y.data(), 2), g);
    CHECK((S.adjoint() * S - Eigen::MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff() == 0.0);
    P off{0.3, 0.0};
    CHECK_THROWS_AS(magnetic_translation(A, Span(off.data(), 2), g), std::invalid_argument);

    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> u(-3, 3);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        std::array<int, 2> mx{u(rng), u(rng)}, my{u(rng), u(rng)};
        P x{mx[0] * g.dx(), mx[1] * g.dx()}, yy{my[0] * g.dx(), my[1] * g.dx()}, xy{x[0] + yy[0], x[1] + yy[1]};
        Eigen::MatrixXcd lhs = magnetic_translation(A, Span(x.data(), 2), g) * magnetic_translation(A, Span(yy.data(), 2), g);
        Eigen::MatrixXcd Txy = magnetic_translation(A, Span(xy.data(), 2), g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            auto kk = g.unravel(k);
            bool inside = true;
            for (int a = 0; a < 2; ++a) {
                const int p1 = kk[a] + mx[a], p2 = p1 + my[a];
                inside = inside && p1 >= 0 && p1 < g.N && p2 >= 0 && p2 < g.N;
            }
            if (!inside) continue;
            P q = g.position_point(k);
            cplx om = omega_cocycle(B, Span(q.data(), 2), Span(x.data(), 2), Span(yy.data(), 2));
            worst = std::max(worst, (lhs.row(k) - om * Txy.row(k)).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("quantize: partial Fourier transform") {
    auto g = make_grid(1, 20.0, 64);
    auto F = KernelFunction::from_function(g, [](Span, Span v) { return cplx(std::exp(-v[0] * v[0] / 2)); });
    auto f = partial_fourier(F);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double xi = g.momentum(int(j));
        worst = std::max(worst, std::abs(f.values(5, j) - std::sqrt(2 * std::numbers::pi) * std::exp(-xi * xi / 2)));
    }
    CHECK(worst <= 1e-8);

    auto g2 = make_grid(2, 6.0, 8);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    auto R = KernelFunction::zeros(g2);
    for (Eigen::Index i = 0; i < R.values.size(); ++i) R.values.data()[i] = cplx(nd(rng), nd(rng));
    auto back = partial_fourier_inverse(partial_fourier(R));
    CHECK((back.values - R.values).cwiseAbs().maxCoeff() <= 1e-12);
    // (partial_fourier F)^conj = partial_fourier(F^involution)
    Eigen::MatrixXcd lhs = partial_fourier(R).values.conjugate();
    Eigen::MatrixXcd rhs = partial_fourier(involution(R)).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("quantize: Schroedinger representation") {
    auto g = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::parse("1 + 0.2*x1"));
    auto table = phase_table(A, g);
    auto f = Symbol::parse("jap(xi)^2 + sin(x1)*xi1", 2, 2.0);
    auto via_rep = rep_A(partial_fourier_inverse(HalfLatticeSymbol::sample(f, g)), A, table);
    auto direct = quantize(f, A, table);
    CHECK((via_rep.matrix - direct.matrix).cwiseAbs().maxCoeff() <= 1e-10);

    // delta in v with coefficient phi(q) gives diag(phi)
    auto D = KernelFunction::from_function(g, [&](Span q, Span v) {
        return (v[0] == 0.0 && v[1] == 0.0) ? cplx(std::cos(q[0]) * q[1] / g.cell()) : cplx(0.0);
    });
    auto Md = rep_A(D, A, table).matrix;
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
        for (std::size_t l = 0; l < g.size(); ++l) {
            P x = g.position_point(k);
            cplx want = k == l ? cplx(std::cos(x[0]) * x[1]) : cplx(0.0);
            worst = std::max(worst, std::abs(Md(k, l) - want));
        }
    CHECK(worst <= 1e-14);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    auto R = KernelFunction::zeros(g);
    for (Eigen::Index i = 0; i < R.values.size(); ++i) R.values.data()[i] = cplx(nd(rng), nd(rng));
    auto Rs = R;
    Rs.values = 0.5 * (R.values + involution(R).values);
    CHECK(hermitian_defect(rep_A(Rs, A, table).matrix) <= 1e-10);
}

TEST_CASE("quantize: twisted product") {
    // B = 0, coefficient-constant Gaussians: a plain convolution in v
    auto g = make_grid(1, 24.0, 96);
    const double a = 0.7, c = 1.3;
    auto F = KernelFunction::from_function(g, [&](Span, Span v) { return cplx(std::exp(-v[0] * v[0] / (2 * a))); });
    auto G = KernelFunction::from_function(g, [&](Span, Span v) { return cplx(std::exp(-v[0] * v[0] / (2 * c))); });
    auto FG = twisted_product(F, G, MagneticField::zero(1));
    double worst = 0.0;
    for (int d = -g.N / 2; d < g.N / 2; ++d) {
        const double w = d * g.dx();
        const double closed = std::sqrt(2 * std::numbers::pi * a * c / (a + c)) * std::exp(-w * w / (2 * (a + c)));
        worst = std::max(worst, std::abs(FG.values(7, FG.difference_index({d, 0})) - closed));
    }
    CHECK(worst <= 1e-8);

    // 2D, constant field: Rep is multiplicative on interior blocks for decaying kernels.
    // Rep reads differences mod N, so the kernels must be negligible beyond L/2 - 2.
    auto g2 = make_grid(2, 8.0, 16);
    const double b = 0.6;
    auto B = MagneticField::constant(b);
    auto A = transversal_gauge(B);
    auto table = phase_table(A, g2);
    auto K1 = KernelFunction::from_function(g2, [](Span q, Span v) {
        return std::exp(-5.0 * (v[0] * v[0] + v[1] * v[1])) * cplx(1 + 0.3 * std::cos(q[0]), 0.2 * v[1]);
    });
    auto K2 = KernelFunction::from_function(g2, [](Span q, Span v) {
        return std::exp(-4.0 * (v[0] * v[0] + v[1] * v[1])) * cplx(1.0, 0.4 * std::sin(q[1]));
    });
    Eigen::MatrixXcd prod = rep_A(K1, A, table).matrix * rep_A(K2, A, table).matrix;
    Eigen::MatrixXcd twisted = rep_A(twisted_product(K1, K2, B), A, table).matrix;
    double err = 0.0;
    for (std::size_t k = 0; k < g2.size(); ++k)
        for (std::size_t l = 0; l < g2.size(); ++l) {
            P x = g2.position_point(k), y = g2.position_point(l);
            // interior block, separations well inside half a period (kernel differences wrap)
            if (std::max(std::fabs(x[0]), std::fabs(x[1])) > 2.0 || std::max(std::fabs(y[0]), std::fabs(y[1])) > 2.0)
                continue;
            if (std::max(std::fabs(x[0] - y[0]), std::fabs(x[1] - y[1])) > 2.5) continue;
            err = std::max(err, std::abs(prod(k, l) - twisted(k, l)));
        }
    CHECK(err <= 1e-10);

    // general-field path agrees with the constant-field fast path
    auto g3 = make_grid(2, 6.0, 6);
    auto H1 = KernelFunction::from_function(g3, [](Span q, Span v) {
        return std::exp(-(v[0] * v[0] + v[1] * v[1])) * cplx(1 + 0.3 * std::cos(q[0]), 0.2 * v[1]);
    });
    auto H2 = KernelFunction::from_function(g3, [](Span q, Span v) {
        return std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1])) * cplx(1.0, 0.4 * std::sin(q[1]));
    });
    auto Bp = MagneticField::planar(ScalarField::from_expression(parse_expression("0.6 + 0*x1")));
    Bp.components[0].polynomial_degree = -1;
    auto slow = twisted_product(H1, H2, Bp);
    auto fast = twisted_product(H1, H2, B);
    CHECK((slow.values - fast.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("quantize: assembly is independent of the thread count") {
    auto g = make_grid(2, 6.0, 12);
    auto A = transversal_gauge(MagneticField::parse("1 + 1/(1 + x1^2)"));
    auto f = Symbol::parse("jap(xi)^2 + arctan(x1)*xi2", 2, 2.0);
    auto t1 = phase_table(A, g, 1), t3 = phase_table(A, g, 3);
    CHECK(t1.gamma == t3.gamma);
    auto m1 = quantize(f, A, t1, 1).matrix, m3 = quantize(f, A, t1, 3).matrix;
    CHECK(m1 == m3);
    auto s = dequantize(MagneticOperator{g, m1, A, ""}, t1);
    CHECK(s.values(1) == s.values(4));
}
