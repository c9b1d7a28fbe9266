#include "magweyl/moyal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "magweyl/parallel.hpp"

namespace magweyl {

namespace {

using Span = std::span<const double>;
using P = std::array<double, 2>;

constexpr cplx kI(0.0, 1.0);

long factorial(int k) {
    long r = 1;
    for (int j = 2; j <= k; ++j) r *= j;
    return r;
}

long factorial(const MultiIndex& a) { return factorial(a[0]) * factorial(a[1]); }

// multi-indices of total order k in n variables
std::vector<MultiIndex> of_order(int n, int k) {
    std::vector<MultiIndex> out;
    if (n == 1) return {{k, 0}};
    for (int j = k; j >= 0; --j) out.push_back({j, k - j});
    return out;
}

std::vector<MultiIndex> below(int n, const MultiIndex& top) {
    std::vector<MultiIndex> out;
    for (int i = 0; i <= top[0]; ++i)
        for (int j = 0; j <= (n == 2 ? top[1] : 0); ++j) out.push_back({i, j});
    return out;
}

// exponent vector (y_1..y_n, z_1..z_n), each entry in 0..3, as a base-4 index
std::size_t jet_index(int n, const MultiIndex& mu, const MultiIndex& nu) {
    std::size_t idx = 0;
    for (int j = 0; j < n; ++j) idx = 4 * idx + static_cast<std::size_t>(mu[j]);
    for (int j = 0; j < n; ++j) idx = 4 * idx + static_cast<std::size_t>(nu[j]);
    return idx;
}

void check_term_order(int l) {
    if (l < 0 || l > kMaxExpansionOrder)
        throw std::invalid_argument("expansion order " + std::to_string(l) + " outside 0.." +
                                    std::to_string(kMaxExpansionOrder));
}

// Derivative functions of f and g for every contribution, resolved up front.
struct TermFactors {
    ExpansionTerm term;
    std::vector<std::optional<SymbolFn>> df, dg;
    std::vector<std::string> missing;

    TermFactors(const Symbol& f, const Symbol& g, int l) : term(expansion_structure(f.n, l)) {
        for (const auto& c : term.contributions) {
            std::string why;
            try {
                df.push_back(f.derivative(c.a, c.alpha));
            } catch (const DerivativeUnavailable& e) {
                df.push_back(std::nullopt);
                why = e.what();
            }
            try {
                dg.push_back(g.derivative(c.b, c.beta));
            } catch (const DerivativeUnavailable& e) {
                dg.push_back(std::nullopt);
                why = e.what();
            }
            missing.push_back(why);
        }
    }

    cplx evaluate(const FluxJet& jet, Span x, Span xi) const {
        const cplx scale = std::pow(0.5 * kI, term.l);
        cplx total = 0.0;
        for (std::size_t c = 0; c < term.contributions.size(); ++c) {
            const auto& t = term.contributions[c];
            const cplx w = jet(t.y_order(), t.z_order());
            if (w == cplx(0.0)) continue;
            if (!df[c] || !dg[c])
                throw DerivativeUnavailable("expansion term h_" + std::to_string(term.l) + ": " + missing[c]);
            total += t.coefficient.value() * w * (*df[c])(x, xi) * (*dg[c])(x, xi);
        }
        return scale * total;
    }
};

bool decays(const Symbol& f, Span X) {
    const int dim = static_cast<int>(X.size());
    const int n = dim / 2;
    double scale = std::abs(f(X.subspan(0, n), X.subspan(n, n)));
    double radius = 1e3;
    for (double v : X) radius += 1e3 * std::fabs(v);
    std::array<double, 4> p{};
    for (int axis = 0; axis < dim; ++axis)
        for (double sign : {-1.0, 1.0}) {
            for (int j = 0; j < dim; ++j) p[j] = X[j];
            p[axis] += sign * radius;
            const double v = std::abs(f(Span(p.data(), n), Span(p.data() + n, n)));
            if (v > 1e-12 * scale && v > 1e-300) return false;
        }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// pullback

SymbolSamples moyal_pullback(const Symbol& f, const Symbol& g, const VectorPotential& A, const PhaseTable& table,
                             int threads) {
    MagneticOperator Mf = quantize(f, A, table, threads);
    MagneticOperator Mg = quantize(g, A, table, threads);
    MagneticOperator prod{table.grid, Mf.matrix * Mg.matrix, A, f.label + " # " + g.label};
    SymbolSamples out = dequantize(prod, table);
    out.label = prod.symbol_tag;
    return out;
}

SymbolSamples moyal_pullback(const Symbol& f, const Symbol& g, const VectorPotential& A, const PhaseSpaceGrid& grid,
                             int threads) {
    return moyal_pullback(f, g, A, phase_table(A, grid, threads), threads);
}

SymbolSamples moyal_pullback(const SymbolSamples& f, const SymbolSamples& g, const VectorPotential& A,
                             const PhaseTable& table) {
    MagneticOperator Mf = quantize(f, A, table);
    MagneticOperator Mg = quantize(g, A, table);
    MagneticOperator prod{table.grid, Mf.matrix * Mg.matrix, A, f.label + " # " + g.label};
    SymbolSamples out = dequantize(prod, table);
    out.label = prod.symbol_tag;
    return out;
}

// ---------------------------------------------------------------------------
// direct quadrature

cplx moyal_direct(const Symbol& f, const Symbol& g, const MagneticField& B, Span X, const DirectQuadrature& quad) {
    const int n = f.n;
    if (g.n != n || static_cast<int>(X.size()) != 2 * n) throw std::invalid_argument("moyal_direct: dimension mismatch");
    const int Pp = quad.points;
    if (Pp < 2 || Pp % 2) throw std::invalid_argument("moyal_direct: points per axis must be even and >= 2");
    if (n == 2 && Pp > 16) throw std::invalid_argument("moyal_direct: at most 16 points per axis in two dimensions");
    if (n == 1 && !B.is_zero()) throw std::invalid_argument("moyal_direct: a magnetic field needs n = 2");
    if (!decays(f, X)) throw std::invalid_argument("moyal_direct: first factor does not decay (" + f.label + ")");
    if (!decays(g, X)) throw std::invalid_argument("moyal_direct: second factor does not decay (" + g.label + ")");

    const double h = std::sqrt(std::numbers::pi / Pp);
    const std::size_t M = n == 1 ? Pp : static_cast<std::size_t>(Pp) * Pp;
    auto node = [&](std::size_t idx) {
        P p{};
        if (n == 1) {
            p[0] = (static_cast<int>(idx) - Pp / 2) * h;
        } else {
            p[0] = (static_cast<int>(idx / Pp) - Pp / 2) * h;
            p[1] = (static_cast<int>(idx % Pp) - Pp / 2) * h;
        }
        return p;
    };
    Span x = X.subspan(0, n), xi = X.subspan(n, n);

    // Fv(y, eta) = f(x - y, xi - eta), E(eta, z) = e^{-2i z.eta}
    Eigen::MatrixXcd Fv(M, M), Gv(M, M), E(M, M);
    for (std::size_t a = 0; a < M; ++a) {
        const P u = node(a);
        P xa{}, ka{};
        for (int j = 0; j < n; ++j) xa[j] = x[j] - u[j];
        for (std::size_t b = 0; b < M; ++b) {
            const P w = node(b);
            for (int j = 0; j < n; ++j) ka[j] = xi[j] - w[j];
            Fv(a, b) = f(Span(xa.data(), n), Span(ka.data(), n));
            Gv(a, b) = g(Span(xa.data(), n), Span(ka.data(), n));
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += u[j] * w[j];
            E(a, b) = std::polar(1.0, -2.0 * dot);
        }
    }
    // Fh(y, z) = sum_eta e^{-2i z.eta} f(x - y, xi - eta); Gh(z, y) = sum_zeta e^{2i y.zeta} g(x - z, xi - zeta)
    Eigen::MatrixXcd Fh = Fv * E;
    Eigen::MatrixXcd Gh = Gv * E.conjugate();
    cplx total = 0.0;
    const bool magnetic = !B.is_zero();
    for (std::size_t a = 0; a < M; ++a) {
        const P y = node(a);
        for (std::size_t b = 0; b < M; ++b) {
            cplx om = 1.0;
            if (magnetic) {
                const P z = node(b);
                om = omega_low(B, x, Span(y.data(), n), Span(z.data(), n));
            }
            total += om * Fh(a, b) * Gh(b, a);
        }
    }
    return total * std::pow(h * h / std::numbers::pi, 2 * n);
}

// ---------------------------------------------------------------------------
// expansion

ExpansionTerm expansion_structure(int n, int l) {
    check_term_order(l);
    if (n != 1 && n != 2) throw std::invalid_argument("expansion_structure: n must be 1 or 2");
    ExpansionTerm t{n, l, {}};
    for (int la = 0; la <= l; ++la)
        for (const auto& alpha : of_order(n, la))
            for (const auto& beta : of_order(n, l - la))
                for (const auto& a : below(n, beta))
                    for (const auto& b : below(n, alpha)) {
                        const MultiIndex amb{alpha[0] - b[0], alpha[1] - b[1]};
                        const MultiIndex bma{beta[0] - a[0], beta[1] - a[1]};
                        const int sign = ((order(a) + order(b) + order(beta)) % 2) ? -1 : 1;
                        const long den = factorial(a) * factorial(b) * factorial(amb) * factorial(bma);
                        t.contributions.push_back({a, b, alpha, beta, Rational{sign, den}});
                    }
    return t;
}

cplx FluxJet::operator()(const MultiIndex& mu, const MultiIndex& nu) const {
    if (order(mu) + order(nu) > kMaxExpansionOrder) throw std::invalid_argument("flux jet: order above 3");
    if (values.empty()) return order(mu) + order(nu) == 0 ? cplx(1.0) : cplx(0.0);
    return values[jet_index(n, mu, nu)];
}

FluxJet flux_jet(const MagneticField& B, Span x) {
    const int n = static_cast<int>(x.size());
    FluxJet jet{n, {}};
    if (n < 2 || B.is_zero()) return jet;
    jet.values.assign(std::size_t(1) << (4 * n), cplx(0.0));
    // Taylor coefficients of Gamma in (y, z); derivative = coefficient * prod(e!)
    auto add = [&](std::array<int, 4> e, double coef) {
        MultiIndex mu{e[0], n == 2 ? e[1] : 0}, nu{e[2], n == 2 ? e[3] : 0};
        const std::size_t idx = jet_index(n, mu, nu);
        const double fact = static_cast<double>(factorial(mu) * factorial(nu));
        jet.values[idx] += -kI * coef * fact;
    };
    jet.values[0] = 1.0;
    const double b = B.component(0, 1, x);
    std::array<double, 2> grad{};
    B.components[0].grad(x, std::span<double>(grad.data(), 2));
    // (y ^ z) = y1 z2 - y2 z1; exponents ordered (y1, y2, z1, z2)
    const std::array<std::array<int, 4>, 2> wedge{{{1, 0, 0, 1}, {0, 1, 1, 0}}};
    const double wsign[2] = {1.0, -1.0};
    for (int w = 0; w < 2; ++w) {
        add(wedge[w], 2.0 * b * wsign[w]);
        for (int m = 0; m < 2; ++m) {
            for (int side = 0; side < 2; ++side) {  // y_m, then z_m
                auto e = wedge[w];
                e[2 * side + m] += 1;
                add(e, -2.0 / 3.0 * wsign[w] * grad[m]);
            }
        }
    }
    return jet;
}

cplx expansion_term(const Symbol& f, const Symbol& g, const FluxJet& jet, int l, Span x, Span xi) {
    check_term_order(l);
    return TermFactors(f, g, l).evaluate(jet, x, xi);
}

cplx expansion_term(const Symbol& f, const Symbol& g, const MagneticField& B, int l, Span x, Span xi) {
    return expansion_term(f, g, flux_jet(B, x), l, x, xi);
}

Eigen::MatrixXcd expansion_term(const Symbol& f, const Symbol& g, const MagneticField& B, int l,
                                const PhaseSpaceGrid& grid, int threads) {
    check_term_order(l);
    const TermFactors factors(f, g, l);
    const std::size_t S = grid.size();
    Eigen::MatrixXcd out(S, S);
    parallel_for(
        S,
        [&](std::size_t k) {
            const P x = grid.position_point(k);
            const FluxJet jet = flux_jet(B, Span(x.data(), grid.n));
            for (std::size_t j = 0; j < S; ++j) {
                const P xi = grid.momentum_point(j);
                out(k, j) = factors.evaluate(jet, Span(x.data(), grid.n), Span(xi.data(), grid.n));
            }
        },
        threads);
    return out;
}

// ---------------------------------------------------------------------------
// remainder

std::vector<std::size_t> positive_ray(const PhaseSpaceGrid& grid, int axis) {
    if (axis < 0 || axis >= grid.n) throw std::invalid_argument("positive_ray: bad axis");
    const int N = grid.N, H = N / 2;
    std::vector<std::size_t> out;
    for (int t = 1; t <= N / 4; ++t) {
        std::array<int, 2> j{H, H};
        j[axis] = H + t;
        out.push_back(grid.n == 1 ? static_cast<std::size_t>(j[0]) : static_cast<std::size_t>(j[0]) * N + j[1]);
    }
    return out;
}

RemainderFit remainder_order(const Symbol& f, const Symbol& g, const MagneticField& B, const VectorPotential& A,
                             const PhaseSpaceGrid& grid, int N, std::size_t x_node,
                             const std::vector<std::size_t>& xi_nodes, int threads) {
    if (N < 1 || N > kMaxExpansionOrder + 1) throw std::invalid_argument("remainder_order: N must be in 1..4");
    const SymbolSamples prod = moyal_pullback(f, g, A, grid, threads);
    const Eigen::MatrixXcd view = prod.values(threads);
    const P x = grid.position_point(x_node);
    const Span xs(x.data(), grid.n);
    const FluxJet jet = flux_jet(B, xs);
    std::vector<TermFactors> terms;
    for (int l = 0; l < N; ++l) terms.emplace_back(f, g, l);
    if (N == 1) terms.emplace_back(f, g, 0);  // h_0 is always needed for the noise floor

    std::vector<double> rem(xi_nodes.size()), floor(xi_nodes.size()), jxi(xi_nodes.size());
    parallel_for(
        xi_nodes.size(),
        [&](std::size_t i) {
            const P xi = grid.momentum_point(xi_nodes[i]);
            const Span xis(xi.data(), grid.n);
            cplx partial = 0.0;
            for (int l = 0; l < N; ++l) partial += terms[l].evaluate(jet, xs, xis);
            const cplx h0 = terms[0].evaluate(jet, xs, xis);
            rem[i] = std::abs(view(x_node, xi_nodes[i]) - partial);
            floor[i] = 1e-9 * std::max(1.0, std::abs(h0));
            double s = 1.0;
            for (int a = 0; a < grid.n; ++a) s += xi[a] * xi[a];
            jxi[i] = 0.5 * std::log(s);
        },
        threads);

    RemainderFit fit;
    for (std::size_t i = 0; i < xi_nodes.size(); ++i) {
        if (rem[i] <= floor[i]) continue;
        fit.log_jxi.push_back(jxi[i]);
        fit.log_remainder.push_back(std::log(rem[i]));
    }
    const std::size_t m = fit.log_jxi.size();
    if (m < 2) {
        fit.vanishing = true;
        fit.low_dynamic_range = true;
        fit.slope = -std::numeric_limits<double>::infinity();
        return fit;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += fit.log_jxi[i];
        my += fit.log_remainder[i];
    }
    mx /= m;
    my /= m;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sxy += (fit.log_jxi[i] - mx) * (fit.log_remainder[i] - my);
        sxx += (fit.log_jxi[i] - mx) * (fit.log_jxi[i] - mx);
    }
    fit.slope = sxx > 0 ? sxy / sxx : 0.0;
    const double span = fit.log_jxi.back() - fit.log_jxi.front();
    fit.low_dynamic_range = m < 4 || std::fabs(span) < std::log(3.0);
    return fit;
}

}  // namespace magweyl
