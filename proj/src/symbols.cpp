#include "magweyl/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

namespace magweyl {

namespace {

using Span = std::span<const double>;
using P = std::array<double, 2>;

// combined index (a0, a1, alpha0, alpha1)
using Index4 = std::array<int, 4>;

Index4 combine(const MultiIndex& a, const MultiIndex& alpha) { return {a[0], a[1], alpha[0], alpha[1]}; }
MultiIndex x_part(const Index4& d) { return {d[0], d[1]}; }
MultiIndex xi_part(const Index4& d) { return {d[2], d[3]}; }
int total(const Index4& d) { return d[0] + d[1] + d[2] + d[3]; }

double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

template <class F>
void for_each_below(const Index4& g, F&& fn) {
    for (int i0 = 0; i0 <= g[0]; ++i0)
        for (int i1 = 0; i1 <= g[1]; ++i1)
            for (int i2 = 0; i2 <= g[2]; ++i2)
                for (int i3 = 0; i3 <= g[3]; ++i3) fn(Index4{i0, i1, i2, i3});
}

double multi_binom(const Index4& g, const Index4& b) {
    double r = 1.0;
    for (int i = 0; i < 4; ++i) r *= binom(g[i], b[i]);
    return r;
}

int flat(const Index4& b, const Index4& g) {
    return ((b[0] * (g[1] + 1) + b[1]) * (g[2] + 1) + b[2]) * (g[3] + 1) + b[3];
}

Index4 minus(const Index4& a, const Index4& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }

bool uses_missing_axis(const MultiIndex& a, const MultiIndex& alpha, int n) {
    return n == 1 && (a[1] > 0 || alpha[1] > 0);
}

SymbolFn zero_fn() {
    return [](Span, Span) { return cplx(0.0); };
}

// Central differences; steps 1e-5 (first order) and 1e-4 (second order),
// scaled by 1 + |coordinate|.
SymbolFn finite_difference(const SymbolFn& f, int n, const MultiIndex& a, const MultiIndex& alpha) {
    struct Dir {
        bool momentum;
        int axis;
    };
    std::vector<Dir> dirs;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < a[j]; ++k) dirs.push_back({false, j});
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < alpha[j]; ++k) dirs.push_back({true, j});
    const std::size_t ord = dirs.size();
    return [f, n, dirs, ord](Span x, Span xi) -> cplx {
        std::array<double, 2> px{}, pxi{};
        for (int j = 0; j < n; ++j) {
            px[j] = x[j];
            pxi[j] = xi[j];
        }
        auto coord = [&](const Dir& d) -> double& { return d.momentum ? pxi[d.axis] : px[d.axis]; };
        auto eval = [&]() { return f(Span(px.data(), n), Span(pxi.data(), n)); };
        const double step = ord == 1 ? 1e-5 : 1e-4;
        if (ord == 1) {
            double& c = coord(dirs[0]);
            const double c0 = c, h = step * (1.0 + std::fabs(c0));
            c = c0 + h;
            cplx fp = eval();
            c = c0 - h;
            cplx fm = eval();
            c = c0;
            return (fp - fm) / (2.0 * h);
        }
        const bool same = dirs[0].momentum == dirs[1].momentum && dirs[0].axis == dirs[1].axis;
        if (same) {
            double& c = coord(dirs[0]);
            const double c0 = c, h = step * (1.0 + std::fabs(c0));
            cplx f0 = eval();
            c = c0 + h;
            cplx fp = eval();
            c = c0 - h;
            cplx fm = eval();
            c = c0;
            return (fp - 2.0 * f0 + fm) / (h * h);
        }
        double& c1 = coord(dirs[0]);
        double& c2 = coord(dirs[1]);
        const double a0 = c1, b0 = c2;
        const double h1 = step * (1.0 + std::fabs(a0)), h2 = step * (1.0 + std::fabs(b0));
        cplx s = 0.0;
        for (int s1 : {1, -1})
            for (int s2 : {1, -1}) {
                c1 = a0 + s1 * h1;
                c2 = b0 + s2 * h2;
                s += double(s1 * s2) * eval();
            }
        c1 = a0;
        c2 = b0;
        return s / (4.0 * h1 * h2);
    };
}

double jap_norm(Span xi) {
    double s = 1.0;
    for (double v : xi) s += v * v;
    return std::sqrt(s);
}

template <class F>
void for_each_node(const PhaseSpaceGrid& g, F&& fn) {
    const std::size_t S = g.size();
    for (std::size_t ix = 0; ix < S; ++ix) {
        P x = g.position_point(ix);
        for (std::size_t ij = 0; ij < S; ++ij) {
            P xi = g.momentum_point(ij);
            fn(Span(x.data(), g.n), Span(xi.data(), g.n));
        }
    }
}

// Leibniz derivative of a product given derivative accessors of both factors.
SymbolFn leibniz(const Symbol& f, const Symbol& g, const Index4& d) {
    struct Term {
        double c;
        SymbolFn df, dg;
    };
    auto terms = std::make_shared<std::vector<Term>>();
    for_each_below(d, [&](const Index4& b) {
        Index4 r = minus(d, b);
        terms->push_back({multi_binom(d, b), f.derivative(x_part(b), xi_part(b)), g.derivative(x_part(r), xi_part(r))});
    });
    return [terms](Span x, Span xi) {
        cplx s = 0.0;
        for (const auto& t : *terms) s += t.c * t.df(x, xi) * t.dg(x, xi);
        return s;
    };
}

Symbol make_expression_symbol(const Expression& e, int n, double m, double rho, double delta) {
    return Symbol::from_expression(e, n, m, rho, delta, true);
}

bool both_expressions(const Symbol& f, const Symbol& g) {
    return f.expression && g.expression && f.real && g.real && f.n == g.n;
}

void check_same_dim(const Symbol& f, const Symbol& g) {
    if (f.n != g.n) throw std::invalid_argument("symbols live on different dimensions");
}

}  // namespace

// ---------------------------------------------------------------------------
// Symbol

SymbolFn Symbol::derivative(const MultiIndex& a, const MultiIndex& alpha) const {
    if (a[0] < 0 || a[1] < 0 || alpha[0] < 0 || alpha[1] < 0) throw std::invalid_argument("negative multi-index");
    if (order(a) + order(alpha) == 0) return f;
    if (uses_missing_axis(a, alpha, n)) return zero_fn();
    if (derivative_provider) {
        if (auto d = derivative_provider(a, alpha)) return *d;
    }
    const int k = order(a) + order(alpha);
    if (k > 2) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "no analytic derivative of order %d for symbol '%s' (finite differences stop at order 2)", k,
                      label.c_str());
        throw DerivativeUnavailable(buf);
    }
    return finite_difference(f, n, a, alpha);
}

Symbol Symbol::from_expression(const Expression& e, int n, double m, double rho, double delta, bool real) {
    if (n != 1 && n != 2) throw std::invalid_argument("dimension must be 1 or 2");
    if (e.max_axis(VarKind::X) > n || e.max_axis(VarKind::Xi) > n)
        throw std::invalid_argument("expression uses an axis beyond dimension " + std::to_string(n) + ": " +
                                    e.to_string());
    auto ce = std::make_shared<CompiledExpression>(e);
    Symbol s;
    s.n = n;
    s.m = m;
    s.rho = rho;
    s.delta = delta;
    s.real = real;
    s.x_dependent = e.depends_on_x();
    s.label = e.to_string();
    s.expression = e;
    s.f = [ce](Span x, Span xi) { return cplx(ce->evaluate(x, xi)); };
    s.derivative_provider = [e](const MultiIndex& a, const MultiIndex& alpha) -> std::optional<SymbolFn> {
        Expression d = e;
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < a[j]; ++k) d = d.derivative(VarKind::X, j);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < alpha[j]; ++k) d = d.derivative(VarKind::Xi, j);
        auto cd = std::make_shared<CompiledExpression>(d);
        return SymbolFn([cd](Span x, Span xi) { return cplx(cd->evaluate(x, xi)); });
    };
    return s;
}

Symbol Symbol::parse(const std::string& text, int n, double m, double rho, double delta) {
    return from_expression(parse_expression(text), n, m, rho, delta, true);
}

Symbol Symbol::constant(cplx c, int n) {
    if (c.imag() == 0.0) return from_expression(Expression(c.real()), n, 0.0);
    Symbol s;
    s.n = n;
    s.m = 0.0;
    s.real = false;
    s.x_dependent = false;
    char buf[96];
    std::snprintf(buf, sizeof buf, "(%.17g%+.17gi)", c.real(), c.imag());
    s.label = buf;
    s.f = [c](Span, Span) { return c; };
    s.derivative_provider = [](const MultiIndex&, const MultiIndex&) -> std::optional<SymbolFn> { return zero_fn(); };
    return s;
}

Symbol Symbol::from_function(SymbolFn fn, int n, double m, bool x_dependent, bool real, std::string label) {
    Symbol s;
    s.n = n;
    s.m = m;
    s.real = real;
    s.x_dependent = x_dependent;
    s.label = std::move(label);
    s.f = std::move(fn);
    return s;
}

// ---------------------------------------------------------------------------
// pointwise algebra

namespace {

// 1 on t <= 0, 0 on t >= 1, C-infinity in between
double smooth_drop(double t) {
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - t)), b = std::exp(-1.0 / t);
    return a / (a + b);
}

}  // namespace

Symbol seam_blend(const Symbol& f, const PhaseSpaceGrid& grid, double inner) {
    if (grid.n != f.n) throw std::invalid_argument("seam_blend: grid and symbol dimensions differ");
    if (!(inner > 0.0 && inner < 0.5)) throw std::invalid_argument("seam_blend: inner must lie in (0, 1/2)");
    if (!f.x_dependent) return f;
    const double a = inner * grid.L, w = (0.5 - inner) * grid.L;
    const int n = f.n;
    Symbol s = Symbol::from_function(
        [fn = f.f, a, w, n](Span x, Span xi) {
            double chi = 1.0;
            for (int j = 0; j < n; ++j) chi *= smooth_drop((std::fabs(x[j]) - a) / w);
            const std::array<double, 2> zero{0.0, 0.0};
            if (chi == 1.0) return fn(x, xi);
            const cplx c = fn(Span(zero.data(), n), xi);
            if (chi == 0.0) return c;
            return chi * fn(x, xi) + (1.0 - chi) * c;
        },
        n, f.m, true, f.real, "seam(" + f.label + ")");
    s.rho = f.rho;
    s.delta = f.delta;
    return s;
}

Symbol operator+(const Symbol& f, const Symbol& g) {
    check_same_dim(f, g);
    const double m = std::max(f.m, g.m), rho = std::min(f.rho, g.rho), delta = std::max(f.delta, g.delta);
    if (both_expressions(f, g)) return make_expression_symbol(*f.expression + *g.expression, f.n, m, rho, delta);
    Symbol s = Symbol::from_function([a = f.f, b = g.f](Span x, Span xi) { return a(x, xi) + b(x, xi); }, f.n, m,
                                     f.x_dependent || g.x_dependent, f.real && g.real,
                                     "(" + f.label + ") + (" + g.label + ")");
    s.rho = rho;
    s.delta = delta;
    s.derivative_provider = [f, g](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        SymbolFn df = f.derivative(a, al), dg = g.derivative(a, al);
        return SymbolFn([df, dg](Span x, Span xi) { return df(x, xi) + dg(x, xi); });
    };
    return s;
}

Symbol operator-(const Symbol& f, const Symbol& g) {
    check_same_dim(f, g);
    const double m = std::max(f.m, g.m), rho = std::min(f.rho, g.rho), delta = std::max(f.delta, g.delta);
    if (both_expressions(f, g)) return make_expression_symbol(*f.expression - *g.expression, f.n, m, rho, delta);
    Symbol s = Symbol::from_function([a = f.f, b = g.f](Span x, Span xi) { return a(x, xi) - b(x, xi); }, f.n, m,
                                     f.x_dependent || g.x_dependent, f.real && g.real,
                                     "(" + f.label + ") - (" + g.label + ")");
    s.rho = rho;
    s.delta = delta;
    s.derivative_provider = [f, g](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        SymbolFn df = f.derivative(a, al), dg = g.derivative(a, al);
        return SymbolFn([df, dg](Span x, Span xi) { return df(x, xi) - dg(x, xi); });
    };
    return s;
}

Symbol operator*(const Symbol& f, const Symbol& g) {
    check_same_dim(f, g);
    const double m = f.m + g.m, rho = std::min(f.rho, g.rho), delta = std::max(f.delta, g.delta);
    if (both_expressions(f, g)) return make_expression_symbol(*f.expression * *g.expression, f.n, m, rho, delta);
    Symbol s = Symbol::from_function([a = f.f, b = g.f](Span x, Span xi) { return a(x, xi) * b(x, xi); }, f.n, m,
                                     f.x_dependent || g.x_dependent, f.real && g.real,
                                     "(" + f.label + ") * (" + g.label + ")");
    s.rho = rho;
    s.delta = delta;
    s.derivative_provider = [f, g](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        return leibniz(f, g, combine(a, al));
    };
    return s;
}

Symbol shift(const Symbol& f, cplx z) {
    if (z.imag() == 0.0 && f.expression && f.real)
        return make_expression_symbol(*f.expression - Expression(z.real()), f.n, std::max(f.m, 0.0), f.rho, f.delta);
    char buf[96];
    std::snprintf(buf, sizeof buf, " - (%.17g%+.17gi)", z.real(), z.imag());
    Symbol s = Symbol::from_function([a = f.f, z](Span x, Span xi) { return a(x, xi) - z; }, f.n, std::max(f.m, 0.0),
                                     f.x_dependent, f.real && z.imag() == 0.0, "(" + f.label + ")" + buf);
    s.rho = f.rho;
    s.delta = f.delta;
    s.derivative_provider = [f](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        return f.derivative(a, al);
    };
    return s;
}

Symbol conj(const Symbol& f) {
    if (f.real) return f;
    Symbol s = Symbol::from_function([a = f.f](Span x, Span xi) { return std::conj(a(x, xi)); }, f.n, f.m,
                                     f.x_dependent, false, "conj(" + f.label + ")");
    s.rho = f.rho;
    s.delta = f.delta;
    s.derivative_provider = [f](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        SymbolFn d = f.derivative(a, al);
        return SymbolFn([d](Span x, Span xi) { return std::conj(d(x, xi)); });
    };
    return s;
}

Symbol pointwise_inverse(const Symbol& f) {
    Symbol s = Symbol::from_function([a = f.f](Span x, Span xi) { return 1.0 / a(x, xi); }, f.n, -f.m, f.x_dependent,
                                     f.real, "1/(" + f.label + ")");
    s.rho = f.rho;
    s.delta = f.delta;
    // from g h = 1:  d^G h = -(1/g) sum_{0 < B <= G} C(G,B) d^B g d^{G-B} h
    s.derivative_provider = [f](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        const Index4 G = combine(a, al);
        const int size = (G[0] + 1) * (G[1] + 1) * (G[2] + 1) * (G[3] + 1);
        auto dg = std::make_shared<std::vector<SymbolFn>>(size);
        for_each_below(G, [&](const Index4& b) { (*dg)[flat(b, G)] = f.derivative(x_part(b), xi_part(b)); });
        return SymbolFn([dg, G, size](Span x, Span xi) {
            std::vector<cplx> gv(size), hv(size);
            for (int i = 0; i < size; ++i) gv[i] = (*dg)[i](x, xi);
            // sub-indices visited in lexicographic order, so every d^{D-B} h needed is ready
            for_each_below(G, [&](const Index4& D) {
                const int id = flat(D, G);
                if (total(D) == 0) {
                    hv[id] = 1.0 / gv[id];
                    return;
                }
                cplx acc = 0.0;
                for_each_below(D, [&](const Index4& B) {
                    if (total(B) == 0) return;
                    acc += multi_binom(D, B) * gv[flat(B, G)] * hv[flat(minus(D, B), G)];
                });
                hv[id] = -acc * hv[0];
            });
            return hv[size - 1];
        });
    };
    return s;
}

// ---------------------------------------------------------------------------
// sampled estimates

double seminorm(const Symbol& f, const MultiIndex& alpha, const MultiIndex& a, const PhaseSpaceGrid& region) {
    if (region.n != f.n) throw std::invalid_argument("seminorm: grid and symbol dimensions differ");
    SymbolFn d = f.derivative(a, alpha);
    const double power = -f.m + f.rho * order(alpha) - f.delta * order(a);
    double sup = 0.0;
    for_each_node(region, [&](Span x, Span xi) {
        sup = std::max(sup, std::pow(jap_norm(xi), power) * std::abs(d(x, xi)));
    });
    return sup;
}

bool is_elliptic(const Symbol& f, double R, double C, const PhaseSpaceGrid& region) {
    if (region.n != f.n) throw std::invalid_argument("is_elliptic: grid and symbol dimensions differ");
    bool any = false, ok = true;
    for_each_node(region, [&](Span x, Span xi) {
        if (!ok) return;
        double r = 0.0;
        for (double v : xi) r += v * v;
        if (std::sqrt(r) <= R) return;
        any = true;
        if (std::abs(f(x, xi)) < C * std::pow(jap_norm(xi), f.m)) ok = false;
    });
    if (!any) throw std::invalid_argument("is_elliptic: no lattice momentum with |xi| > R on this grid");
    return ok;
}

double sampled_infimum(const Symbol& f, const PhaseSpaceGrid& region) {
    double inf = std::numeric_limits<double>::infinity();
    for_each_node(region, [&](Span x, Span xi) { inf = std::min(inf, f(x, xi).real()); });
    return inf;
}

bool has_constant_coefficients(const Symbol& f, const PhaseSpaceGrid& region) {
    const std::size_t S = region.size();
    P x0 = region.position_point(0);
    for (std::size_t ij = 0; ij < S; ++ij) {
        P xi = region.momentum_point(ij);
        const cplx ref = f(Span(x0.data(), f.n), Span(xi.data(), f.n));
        for (std::size_t ix = 1; ix < S; ++ix) {
            P x = region.position_point(ix);
            if (std::abs(f(Span(x.data(), f.n), Span(xi.data(), f.n)) - ref) > 1e-13 * (1.0 + std::abs(ref)))
                return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// coefficient algebras

CoefficientAlgebra CoefficientAlgebra::constant_coefficients() {
    return {AlgebraKind::ConstantCoefficients, {{"identity", Identity{}}}, {}};
}

CoefficientAlgebra CoefficientAlgebra::vanishing_at_infinity(int) {
    return {AlgebraKind::VanishingAtInfinityPlusConstants, {{"infinity", DirectionalLimit{{1.0, 0.0}}}}, {}};
}

CoefficientAlgebra CoefficientAlgebra::asymptotic_limits_1d() {
    return {AlgebraKind::AsymptoticLimitsPerDirection,
            {{"+inf", DirectionalLimit{{1.0, 0.0}}}, {"-inf", DirectionalLimit{{-1.0, 0.0}}}},
            {}};
}

CoefficientAlgebra CoefficientAlgebra::asymptotic_directions(const std::vector<std::array<double, 2>>& directions) {
    CoefficientAlgebra A;
    A.kind = AlgebraKind::AsymptoticLimitsPerDirection;
    for (auto d : directions) {
        const double r = std::hypot(d[0], d[1]);
        if (!(r > 0)) throw std::invalid_argument("zero direction");
        d = {d[0] / r, d[1] / r};
        char buf[64];
        std::snprintf(buf, sizeof buf, "dir(%g,%g)", d[0], d[1]);
        A.quasi_orbits.push_back({buf, DirectionalLimit{d}});
    }
    return A;
}

CoefficientAlgebra CoefficientAlgebra::periodic(const std::vector<std::array<double, 2>>& lattice,
                                                int translates_per_axis) {
    if (lattice.empty() || lattice.size() > 2) throw std::invalid_argument("periodic: need 1 or 2 lattice vectors");
    if (translates_per_axis < 1) throw std::invalid_argument("periodic: translates_per_axis must be >= 1");
    CoefficientAlgebra A;
    A.kind = AlgebraKind::Periodic;
    A.lattice = lattice;
    const int t = translates_per_axis;
    const int t2 = lattice.size() == 2 ? t : 1;
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t2; ++j) {
            std::array<double, 2> s{};
            for (int c = 0; c < 2; ++c) {
                s[c] = double(i) / t * lattice[0][c];
                if (lattice.size() == 2) s[c] += double(j) / t * lattice[1][c];
            }
            char buf[64];
            std::snprintf(buf, sizeof buf, "translate(%d,%d)", i, j);
            A.quasi_orbits.push_back({buf, Translation{s}});
        }
    return A;
}

namespace {

P shifted(Span x, const P& by, double scale) {
    P p{};
    for (std::size_t j = 0; j < x.size(); ++j) p[j] = x[j] + scale * by[j];
    return p;
}

// the limit along e must be numerically settled: compare distance T with 10 T
void check_limit(const SymbolFn& f, int n, const DirectionalLimit& d, const std::string& what) {
    const double xs[] = {0.0, 0.7, -1.3};
    const double xis[] = {0.0, 1.1, -2.5};
    for (double a : xs)
        for (double b : xis) {
            P x{a, -0.5 * a}, xi{b, 0.5 * b};
            P far1 = shifted(Span(x.data(), n), d.direction, d.distance);
            P far2 = shifted(Span(x.data(), n), d.direction, 10.0 * d.distance);
            cplx v1 = f(Span(far1.data(), n), Span(xi.data(), n));
            cplx v2 = f(Span(far2.data(), n), Span(xi.data(), n));
            if (!std::isfinite(std::abs(v1)) || std::abs(v1 - v2) > 1e-6 * (1.0 + std::abs(v1)))
                throw std::domain_error(what + " has no limit along the requested direction");
        }
}

int aligned_axis(const P& e, int n) {
    if (n == 1) return 0;
    if (e[1] == 0.0) return 0;
    if (e[0] == 0.0) return 1;
    return -1;
}

}  // namespace

Symbol project_quasiorbit(const Symbol& f, const QuasiOrbit& Q) {
    if (std::holds_alternative<std::monostate>(Q.rule))
        throw MissingLimitRule("no limit rule for quasi-orbit '" + Q.label + "'");
    if (std::holds_alternative<Identity>(Q.rule)) return f;

    Symbol s = f;
    s.expression.reset();
    const int n = f.n;
    if (const auto* d = std::get_if<DirectionalLimit>(&Q.rule)) {
        if (!f.x_dependent) return f;
        check_limit(f.f, n, *d, "symbol '" + f.label + "'");
        const P e = d->direction;
        const double T = d->distance;
        s.label = "limit[" + Q.label + "](" + f.label + ")";
        s.f = [g = f.f, e, T, n](Span x, Span xi) {
            P p = shifted(x, e, T);
            return g(Span(p.data(), n), xi);
        };
        const int ax = aligned_axis(e, n);
        s.derivative_provider = [f, e, T, n, ax](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
            // the limit is invariant along e
            if (ax >= 0 && a[ax] > 0) return zero_fn();
            if (!f.derivative_provider) return std::nullopt;
            auto df = f.derivative_provider(a, al);
            if (!df) return std::nullopt;
            return SymbolFn([g = *df, e, T, n](Span x, Span xi) {
                P p = shifted(x, e, T);
                return g(Span(p.data(), n), xi);
            });
        };
        return s;
    }
    const auto& tr = std::get<Translation>(Q.rule);
    const P sh = tr.shift;
    s.label = "translate[" + Q.label + "](" + f.label + ")";
    s.f = [g = f.f, sh, n](Span x, Span xi) {
        P p = shifted(x, sh, 1.0);
        return g(Span(p.data(), n), xi);
    };
    s.derivative_provider = [f, sh, n](const MultiIndex& a, const MultiIndex& al) -> std::optional<SymbolFn> {
        if (!f.derivative_provider) return std::nullopt;
        auto df = f.derivative_provider(a, al);
        if (!df) return std::nullopt;
        return SymbolFn([g = *df, sh, n](Span x, Span xi) {
            P p = shifted(x, sh, 1.0);
            return g(Span(p.data(), n), xi);
        });
    };
    return s;
}

namespace {

ScalarField project_scalar(const ScalarField& c, const QuasiOrbit& Q, int n) {
    if (std::holds_alternative<Identity>(Q.rule) || c.polynomial_degree == 0) return c;
    P by{};
    double scale = 1.0;
    if (const auto* d = std::get_if<DirectionalLimit>(&Q.rule)) {
        by = d->direction;
        scale = d->distance;
        SymbolFn as_symbol = [f = c.f](Span x, Span) { return cplx(f(x)); };
        check_limit(as_symbol, n, *d, "field '" + c.label + "'");
    } else {
        by = std::get<Translation>(Q.rule).shift;
    }
    ScalarField out;
    out.f = [f = c.f, by, scale, n](Span x) {
        P p = shifted(x, by, scale);
        return f(Span(p.data(), n));
    };
    if (c.gradient)
        out.gradient = [g = c.gradient, by, scale, n](Span x, std::span<double> o) {
            P p = shifted(x, by, scale);
            g(Span(p.data(), n), o);
        };
    out.label = Q.label + "(" + c.label + ")";
    if (std::holds_alternative<Translation>(Q.rule)) {
        out.polynomial_degree = c.polynomial_degree;
        return out;
    }
    // directional limits of bounded fields are frequently constant; detect it
    const P origin{};
    const double ref = out.f(Span(origin.data(), n));
    bool constant = std::isfinite(ref);
    for (double a = -4.0; a <= 4.0 && constant; a += 1.0)
        for (double b = -4.0; b <= 4.0 && constant; b += 1.0) {
            P x{a, b};
            if (std::abs(out.f(Span(x.data(), n)) - ref) > 1e-14 * (1.0 + std::abs(ref))) constant = false;
        }
    if (constant) return ScalarField::constant(ref);
    return out;
}

}  // namespace

MagneticField project_field(const MagneticField& B, const QuasiOrbit& Q) {
    if (std::holds_alternative<std::monostate>(Q.rule))
        throw MissingLimitRule("no limit rule for quasi-orbit '" + Q.label + "'");
    if (B.is_zero()) return B;
    MagneticField out = B;
    out.components.clear();
    for (const auto& c : B.components) out.components.push_back(project_scalar(c, Q, B.n));
    bool poly = true;
    for (const auto& c : out.components) poly = poly && c.polynomial_degree >= 0;
    if (poly) out.field_class = FieldClass::Polynomial;
    return out;
}

}  // namespace magweyl
