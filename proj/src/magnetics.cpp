#include "magweyl/magnetics.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <queue>
#include <vector>
#include <stdexcept>

#include "magweyl/quadrature.hpp"

namespace magweyl {

namespace {

constexpr int kMaxDim = 2;

int pair_index(int j, int k, int n) {
    // (0,1) -> 0, (0,2) -> 1, (1,2) -> 2, ...
    int idx = 0;
    for (int a = 0; a < j; ++a) idx += n - 1 - a;
    return idx + (k - j - 1);
}

void require_dim(std::size_t got, int n, const char* what) {
    if (static_cast<int>(got) != n) throw std::invalid_argument(std::string(what) + " has wrong dimension");
}

constexpr int kMaxDepth = 10;
// refinement stops once the estimate is at the rounding level of the total
constexpr double kRoundoff = 1e-14;

constexpr int kMaxSplits = 20000;

// Rectangle [s0, s1] x [t0, t1] of the (s, t) parameter square for Gamma_B;
// the weight s is handled by Gauss-Jacobi on panels touching s = 0.
struct Rect {
    double s0, s1, t0, t1;
};

template <class F>
double rect_rule(const Rect& r, int ord, F& integrand) {
    const bool touches_zero = r.s0 == 0.0;
    const QuadratureRule rs = touches_zero ? gauss_jacobi_linear(ord, r.s0, r.s1) : gauss_legendre(ord, r.s0, r.s1);
    const QuadratureRule rt = gauss_legendre(ord, r.t0, r.t1);
    double total = 0.0;
    for (std::size_t is = 0; is < rs.nodes.size(); ++is) {
        const double sv = rs.nodes[is];
        double inner = 0.0;
        for (std::size_t it = 0; it < rt.nodes.size(); ++it) inner += rt.weights[it] * integrand(sv, rt.nodes[it]);
        total += rs.weights[is] * (touches_zero ? inner : sv * inner);
    }
    return total;
}

// Global adaptive refinement of a rectangle. Each region is halved along
// whichever axis shows the larger discrepancy, so ridges of the field get
// refined in one direction only; the region with the worst estimate goes first.
template <class F>
double adapt_rect(const Rect& root, int ord, F& integrand, double whole, double tol) {
    struct Region {
        Rect r;
        double value, error;
        Rect kid[2];
        double part[2];
    };
    auto make = [&](const Rect& r, double value) {
        const double sm = 0.5 * (r.s0 + r.s1), tm = 0.5 * (r.t0 + r.t1);
        const Rect su[2] = {{r.s0, sm, r.t0, r.t1}, {sm, r.s1, r.t0, r.t1}};
        const Rect st[2] = {{r.s0, r.s1, r.t0, tm}, {r.s0, r.s1, tm, r.t1}};
        const double a0 = rect_rule(su[0], ord, integrand), a1 = rect_rule(su[1], ord, integrand);
        const double b0 = rect_rule(st[0], ord, integrand), b1 = rect_rule(st[1], ord, integrand);
        const double eu = std::abs(a0 + a1 - value), et = std::abs(b0 + b1 - value);
        if (eu >= et) return Region{r, a0 + a1, eu, {su[0], su[1]}, {a0, a1}};
        return Region{r, b0 + b1, et, {st[0], st[1]}, {b0, b1}};
    };
    auto worse = [](const Region& a, const Region& b) { return a.error < b.error; };
    std::priority_queue<Region, std::vector<Region>, decltype(worse)> queue(worse);
    queue.push(make(root, whole));
    double total = queue.top().value, error = queue.top().error;
    for (int split = 0; split < kMaxSplits; ++split) {
        if (error <= tol || error <= kRoundoff * std::abs(total)) break;
        Region top = queue.top();
        queue.pop();
        total -= top.value;
        error -= top.error;
        for (int k = 0; k < 2; ++k) {
            Region kid = make(top.kid[k], top.part[k]);
            total += kid.value;
            error += kid.error;
            queue.push(kid);
        }
    }
    return total;
}

// Adaptive Gauss-Legendre on [a, b] by bisection.
template <class F>
double line_rule(double a, double b, int ord, F& f) {
    const QuadratureRule r = gauss_legendre(ord, a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(r.nodes[i]);
    return s;
}

template <class F>
double adapt_line(double a, double b, int ord, F& f, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double l = line_rule(a, m, ord, f), r = line_rule(m, b, ord, f);
    if (depth >= 2 * kMaxDepth || std::abs(l + r - whole) <= std::max(tol, kRoundoff * (std::abs(l) + std::abs(r))))
        return l + r;
    return adapt_line(a, m, ord, f, l, 0.5 * tol, depth + 1) + adapt_line(m, b, ord, f, r, 0.5 * tol, depth + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// ScalarField

void ScalarField::grad(std::span<const double> x, std::span<double> out) const {
    if (gradient) {
        gradient(x, out);
        return;
    }
    std::array<double, kMaxDim> p{};
    for (std::size_t j = 0; j < x.size(); ++j) p[j] = x[j];
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-5 * (1.0 + std::fabs(x[j]));
        p[j] = x[j] + h;
        double fp = f(std::span<const double>(p.data(), x.size()));
        p[j] = x[j] - h;
        double fm = f(std::span<const double>(p.data(), x.size()));
        p[j] = x[j];
        out[j] = (fp - fm) / (2.0 * h);
    }
}

ScalarField ScalarField::constant(double c) {
    ScalarField s;
    s.f = [c](std::span<const double>) { return c; };
    s.gradient = [](std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = 0.0;
    };
    s.polynomial_degree = 0;
    s.expression = Expression(c);
    s.label = s.expression->to_string();
    return s;
}

ScalarField ScalarField::from_expression(const Expression& e) {
    if (e.depends_on_xi()) throw std::invalid_argument("field expression must not depend on momentum: " + e.to_string());
    auto ce = std::make_shared<CompiledExpression>(e);
    auto grads = std::make_shared<std::vector<CompiledExpression>>();
    for (int j = 0; j < kMaxDim; ++j) grads->emplace_back(e.derivative(VarKind::X, j));
    ScalarField s;
    s.f = [ce](std::span<const double> x) { return ce->evaluate(x, {}); };
    s.gradient = [grads](std::span<const double> x, std::span<double> out) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (*grads)[j].evaluate(x, {});
    };
    s.polynomial_degree = e.polynomial_degree_x();
    s.label = e.to_string();
    s.expression = e;
    return s;
}

// ---------------------------------------------------------------------------
// MagneticField

double MagneticField::component(int j, int k, std::span<const double> x) const {
    if (j == k || is_zero()) return 0.0;
    if (j > k) return -component(k, j, x);
    return components[pair_index(j, k, n)](x);
}

int MagneticField::polynomial_degree() const {
    int d = 0;
    for (const auto& c : components) {
        if (c.polynomial_degree < 0) return -1;
        d = std::max(d, c.polynomial_degree);
    }
    return d;
}

MagneticField MagneticField::zero(int n) { return MagneticField{n, {}, FieldClass::Polynomial}; }

MagneticField MagneticField::constant(double b) {
    return MagneticField{2, {ScalarField::constant(b)}, FieldClass::Polynomial};
}

MagneticField MagneticField::planar(const ScalarField& b12, FieldClass cls) {
    if (b12.polynomial_degree >= 0) cls = FieldClass::Polynomial;
    return MagneticField{2, {b12}, cls};
}

MagneticField MagneticField::parse(const std::string& b12) { return planar(ScalarField::parse(b12)); }

// ---------------------------------------------------------------------------
// flux integrals

double flux_triangle(const MagneticField& B, std::span<const double> v0, std::span<const double> v1,
                     std::span<const double> v2, const FluxQuadrature& quad) {
    const int n = static_cast<int>(v0.size());
    if (B.is_zero() || n < 2) return 0.0;
    require_dim(v1.size(), n, "vertex");
    require_dim(v2.size(), n, "vertex");
    // p(u, w) = v0 + u e1 + u w e2 with e1 = v1 - v0, e2 = v2 - v1; the
    // Jacobian u (e1 ^ e2) is absorbed into a Gauss-Jacobi rule in u.
    std::array<double, kMaxDim> e1{}, e2{};
    for (int j = 0; j < n; ++j) {
        e1[j] = v1[j] - v0[j];
        e2[j] = v2[j] - v1[j];
    }
    std::vector<double> wedge;
    bool degenerate = true;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            double a = e1[j] * e2[k] - e1[k] * e2[j];
            wedge.push_back(a);
            if (a != 0.0) degenerate = false;
        }
    if (degenerate) return 0.0;

    // integrand of the (u, w) square; the weight u comes from rect_rule
    auto integrand = [&](double u, double w) {
        std::array<double, kMaxDim> p{};
        for (int j = 0; j < n; ++j) p[j] = v0[j] + u * e1[j] + u * w * e2[j];
        std::span<const double> ps(p.data(), n);
        double v = 0.0;
        for (std::size_t c = 0; c < B.components.size(); ++c) v += wedge[c] * B.components[c](ps);
        return v;
    };
    const int degree = B.polynomial_degree();
    const int ord = exact_order(degree, quad.order);
    Rect r{0.0, 1.0, 0.0, 1.0};
    const double whole = rect_rule(r, ord, integrand);
    if (degree >= 0) return whole;
    return adapt_rect(r, ord, integrand, whole, quad.tolerance);
}

double gamma_B(const MagneticField& B, std::span<const double> x, std::span<const double> y,
               std::span<const double> z, const FluxQuadrature& quad) {
    const int n = static_cast<int>(x.size());
    if (B.is_zero() || n < 2) return 0.0;
    require_dim(y.size(), n, "y");
    require_dim(z.size(), n, "z");
    std::vector<double> yz;
    bool zero = true;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            double a = y[j] * z[k] - y[k] * z[j];
            yz.push_back(a);
            if (a != 0.0) zero = false;
        }
    if (zero) return 0.0;

    auto integrand = [&](double sv, double tv) {
        std::array<double, kMaxDim> p{};
        const double cy = sv - sv * tv - 1.0;
        const double cz = sv * tv - 1.0;
        for (int j = 0; j < n; ++j) p[j] = x[j] + cy * y[j] + cz * z[j];
        std::span<const double> ps(p.data(), n);
        double v = 0.0;
        for (std::size_t c = 0; c < B.components.size(); ++c) v += yz[c] * B.components[c](ps);
        return v;
    };
    const int degree = B.polynomial_degree();
    const int ord = exact_order(degree, quad.order);
    Rect r{0.0, 2.0, 0.0, 1.0};
    const double whole = rect_rule(r, ord, integrand);
    if (degree >= 0) return whole;
    return adapt_rect(r, ord, integrand, whole, quad.tolerance);
}

cplx omega_low(const MagneticField& B, std::span<const double> x, std::span<const double> y,
               std::span<const double> z, const FluxQuadrature& quad) {
    return std::polar(1.0, -gamma_B(B, x, y, z, quad));
}

cplx omega_cocycle(const MagneticField& B, std::span<const double> q, std::span<const double> x,
                   std::span<const double> y, const FluxQuadrature& quad) {
    const int n = static_cast<int>(q.size());
    std::array<double, kMaxDim> a{}, b{};
    for (int j = 0; j < n; ++j) {
        a[j] = q[j] + x[j];
        b[j] = a[j] + y[j];
    }
    return std::polar(1.0, -flux_triangle(B, q, std::span<const double>(a.data(), n),
                                          std::span<const double>(b.data(), n), quad));
}

// ---------------------------------------------------------------------------
// vector potentials

VectorPotential VectorPotential::zero(int n) {
    VectorPotential A;
    A.n = n;
    A.label = "0";
    return A;
}

VectorPotential VectorPotential::explicit_components(std::vector<ScalarField> comps) {
    VectorPotential A;
    A.n = static_cast<int>(comps.size());
    A.components = std::move(comps);
    for (std::size_t j = 0; j < A.components.size(); ++j)
        A.label += (j ? ", " : "") + A.components[j].label;
    A.label = "(" + A.label + ")";
    return A;
}

void VectorPotential::evaluate(std::span<const double> x, std::span<double> out) const {
    for (int j = 0; j < n; ++j) out[j] = 0.0;
    if (!components.empty()) {
        for (int j = 0; j < n; ++j) out[j] = components[j](x);
    } else if (transversal_of && !transversal_of->is_zero()) {
        // A_k(x) = -sum_j x_j int_0^1 s B_kj(s x) ds
        const MagneticField& B = *transversal_of;
        for (int k = 0; k < n; ++k) {
            auto integrand = [&](double sv) {
                std::array<double, kMaxDim> p{};
                for (int j = 0; j < n; ++j) p[j] = sv * x[j];
                std::span<const double> ps(p.data(), n);
                double v = 0.0;
                for (int j = 0; j < n; ++j)
                    if (j != k) v -= x[j] * B.component(k, j, ps);
                return sv * v;
            };
            const int degree = B.polynomial_degree();
            const int ord = exact_order(degree < 0 ? -1 : degree + 1, quad.order);
            const double whole = line_rule(0.0, 1.0, ord, integrand);
            out[k] = degree >= 0 ? whole : adapt_line(0.0, 1.0, ord, integrand, whole, quad.tolerance, 0);
        }
    }
    std::array<double, kMaxDim> g{};
    for (const auto& psi : shifts) {
        psi.grad(x, std::span<double>(g.data(), n));
        for (int j = 0; j < n; ++j) out[j] += g[j];
    }
}

double circulation(const VectorPotential& A, std::span<const double> x, std::span<const double> y,
                   const FluxQuadrature& quad) {
    const int n = A.n;
    require_dim(x.size(), n, "segment start");
    require_dim(y.size(), n, "segment end");
    bool same = true;
    for (int j = 0; j < n; ++j) same = same && x[j] == y[j];
    if (same || A.is_zero()) return 0.0;

    int degree = -1;
    if (!A.components.empty()) {
        degree = 0;
        for (const auto& c : A.components) degree = (c.polynomial_degree < 0 || degree < 0) ? -1 : std::max(degree, c.polynomial_degree);
    } else if (A.transversal_of) {
        int d = A.transversal_of->polynomial_degree();
        degree = d < 0 ? -1 : d + 1;
    }
    if (!A.shifts.empty()) degree = -1;
    auto integrand = [&](double t) {
        std::array<double, kMaxDim> p{}, a{};
        for (int j = 0; j < n; ++j) p[j] = x[j] + t * (y[j] - x[j]);
        A.evaluate(std::span<const double>(p.data(), n), std::span<double>(a.data(), n));
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += a[j] * (y[j] - x[j]);
        return dot;
    };
    const int ord = exact_order(degree, quad.order);
    const double whole = line_rule(0.0, 1.0, ord, integrand);
    return degree >= 0 ? whole : adapt_line(0.0, 1.0, ord, integrand, whole, quad.tolerance, 0);
}

double segment_phase(const VectorPotential& A, std::span<const double> x, std::span<const double> y) {
    const int n = A.n;
    double phase = 0.0;
    if (!A.components.empty()) {
        VectorPotential base = A;
        base.shifts.clear();
        phase = circulation(base, x, y, A.quad);
    } else if (A.transversal_of && !A.transversal_of->is_zero()) {
        std::array<double, kMaxDim> origin{};
        phase = flux_triangle(*A.transversal_of, std::span<const double>(origin.data(), n), x, y, A.quad);
    }
    for (const auto& psi : A.shifts) phase += psi(y) - psi(x);
    return phase;
}

VectorPotential transversal_gauge(const MagneticField& B, const FluxQuadrature& quad) {
    if (quad.order < 2) throw std::invalid_argument("flux quadrature order must be >= 2");
    VectorPotential A;
    A.n = B.n;
    A.quad = quad;
    if (!B.is_zero()) A.transversal_of = B;
    A.label = B.is_zero() ? "0" : "transversal(" + B.components[0].label + ")";
    return A;
}

VectorPotential gauge_shift(const VectorPotential& A, const ScalarField& psi) {
    VectorPotential r = A;
    r.shifts.push_back(psi);
    r.label = A.label + " + d(" + psi.label + ")";
    return r;
}

}  // namespace magweyl
