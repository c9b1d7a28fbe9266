#include "magweyl/quantize.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "magweyl/parallel.hpp"

namespace magweyl {

namespace {

using Span = std::span<const double>;
using P = std::array<double, 2>;

int wrap(int a, int m) {
    int r = a % m;
    return r < 0 ? r + m : r;
}

double parity(int d) { return (d & 1) ? -1.0 : 1.0; }

void check_finite(cplx v, const P& q, const P& xi, int n) {
    if (std::isfinite(v.real()) && std::isfinite(v.imag())) return;
    char buf[160];
    if (n == 1)
        std::snprintf(buf, sizeof buf, "symbol not finite at q = %.6g, xi = %.6g", q[0], xi[0]);
    else
        std::snprintf(buf, sizeof buf, "symbol not finite at q = (%.6g, %.6g), xi = (%.6g, %.6g)", q[0], q[1], xi[0],
                      xi[1]);
    throw EvaluationError(buf);
}

// fc[d mod N] = N^{-n} sum_j e^{i d dx . xi_j} vals[j], in place
void momentum_to_difference(std::vector<cplx>& vals, const PhaseSpaceGrid& g) {
    const int n = g.n, N = g.N;
    bool flat = true;
    for (const auto& v : vals) flat = flat && v == vals[0];
    if (flat) {
        const cplx c = vals[0];
        std::fill(vals.begin(), vals.end(), cplx(0.0));
        vals[0] = c;
        return;
    }
    for (int a = 0; a < n; ++a) detail::dft_axis(vals, n, N, a, +1);
    const double scale = n == 1 ? 1.0 / N : 1.0 / (double(N) * N);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        auto d = g.unravel(i);
        vals[i] *= scale * parity(d[0] + d[1]);
    }
}

// Pairs (row, col) whose torus midpoint is the half node s: the column l and
// the minimal-image difference d = row - col in [-N/2, N/2] with
// 2l + d = s mod 2N. At |d| = N/2 the two antipodal midpoints share the
// entry, weight 1/2 each. Half nodes s and s + N hold the same pairs' partners.
template <class F>
void for_each_torus_pair(int N, int s, F&& fn) {
    const int H = N / 2;
    for (int d = -H; d <= H; ++d) {
        if ((d - s) & 1) continue;
        const int l = wrap((s - d) / 2, N);
        fn(wrap(l + d, N), l, d, std::abs(d) == H ? 0.5 : 1.0);
    }
}

using Sampler = std::function<void(const P& q, std::vector<cplx>& out)>;

// Shared assembly: kernel per midpoint, then the phase.
Eigen::MatrixXcd assemble(const PhaseSpaceGrid& g, const Sampler& sample, bool x_independent,
                          const Eigen::MatrixXd* gamma, int threads) {
    const int N = g.N, n = g.n;
    const std::size_t S = g.size();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(S, S);
    if (x_independent) {
        std::vector<cplx> shared(S);
        sample(P{0.0, 0.0}, shared);
        momentum_to_difference(shared, g);
        for (std::size_t r = 0; r < S; ++r) {
            auto k = g.unravel(r);
            for (std::size_t c = 0; c < S; ++c) {
                auto l = g.unravel(c);
                M(r, c) = shared[g.ravel(wrap(k[0] - l[0], N), wrap(k[1] - l[1], N))];
            }
        }
    } else {
        // a task owns half nodes s0 and s0 + N, so shared entries stay in one task
        parallel_for(
            N,
            [&](std::size_t base) {
                std::vector<cplx> local(S);
                for (int s0 : {static_cast<int>(base), static_cast<int>(base) + N})
                    for (int s1 = 0; s1 < (n == 2 ? 2 * N : 1); ++s1) {
                        P q{g.half_position(s0), n == 2 ? g.half_position(s1) : 0.0};
                        sample(q, local);
                        momentum_to_difference(local, g);
                        for_each_torus_pair(N, s0, [&](int k0, int l0, int d0, double w0) {
                            if (n == 1) {
                                M(k0, l0) += w0 * local[wrap(d0, N)];
                                return;
                            }
                            for_each_torus_pair(N, s1, [&](int k1, int l1, int d1, double w1) {
                                M(g.ravel(k0, k1), g.ravel(l0, l1)) +=
                                    (w0 * w1) * local[g.ravel(wrap(d0, N), wrap(d1, N))];
                            });
                        });
                    }
            },
            threads);
    }
    if (gamma)
        parallel_for(
            S,
            [&](std::size_t r) {
                for (std::size_t c = 0; c < S; ++c) {
                    const double ph = (*gamma)(r, c);
                    if (ph != 0.0) M(r, c) *= std::polar(1.0, -ph);
                }
            },
            threads);
    return M;
}

std::array<double, 8> lagrange_mid() {
    return {-5.0 / 2048, 49.0 / 2048, -245.0 / 2048, 1225.0 / 2048, 1225.0 / 2048, -245.0 / 2048, 49.0 / 2048,
            -5.0 / 2048};
}

}  // namespace

// ---------------------------------------------------------------------------
// norms

double operator_norm(const Eigen::MatrixXcd& M) {
    if (M.size() == 0) return 0.0;
    if (hermitian_defect(M) < 1e-12) {
        Eigen::MatrixXcd H = 0.5 * (M + M.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    return svd.singularValues()(0);
}

double hermitian_defect(const Eigen::MatrixXcd& M) {
    const double nm = M.norm();
    if (nm == 0.0) return 0.0;
    return (M - M.adjoint()).norm() / nm;
}

double MagneticOperator::norm() const { return operator_norm(matrix); }

// ---------------------------------------------------------------------------
// phases

namespace {

// flux<x, y, z> with the parameterisation started opposite the shortest edge, so that
// refinement is mostly needed along the rays
double sliver_flux(const MagneticField& B, const P& x, const P& y, const P& z, const FluxQuadrature& quad) {
    auto d2 = [](const P& a, const P& b) { return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]); };
    const double yz = d2(y, z), zx = d2(z, x), xy = d2(x, y);
    if (yz <= zx && yz <= xy) return flux_triangle(B, Span(x), Span(y), Span(z), quad);
    if (zx <= xy) return flux_triangle(B, Span(y), Span(z), Span(x), quad);
    return flux_triangle(B, Span(z), Span(x), Span(y), quad);
}

// Transversal-gauge table for a non-polynomial planar field, built from
// shorter steps. With z = x + d' for a Farey parent d' of the step d = y - x,
//   Gamma[x, y] = Gamma[x, z] + Gamma[z, y] + flux<x, y, z>,
// the triangle has area dx^2 / 2 and z stays in the box spanned by x and y.
// Multiples of a primitive step are collinear sums. Only unit steps need a
// full flux<0, x, y>.
void fill_by_steps(Eigen::MatrixXd& gamma, const MagneticField& B, const FluxQuadrature& quad,
                   const PhaseSpaceGrid& grid, int threads) {
    const int N = grid.N;
    std::vector<std::vector<std::array<int, 2>>> levels(2 * N);
    for (int a = 0; a < N; ++a)
        for (int b = -(N - 1); b < N; ++b)
            if (a > 0 || b > 0) levels[a + std::abs(b)].push_back({a, b});

    auto point = [&](int i0, int i1) { return grid.position_point(static_cast<std::size_t>(i0) * N + i1); };
    const P origin{0.0, 0.0};
    for (int level = 1; level < 2 * N; ++level) {
        const auto& steps = levels[level];
        parallel_for(
            steps.size(),
            [&](std::size_t si) {
                const int a = steps[si][0], b = steps[si][1];
                const int g = std::gcd(a, std::abs(b));
                std::array<int, 2> mid{};  // z - x
                bool unit = level == 1;
                if (g > 1) {
                    mid = {a / g * (g - 1), b / g * (g - 1)};
                } else if (!unit) {
                    const int sb = b < 0 ? -1 : 1, ab = std::abs(b);
                    for (int bp = 0; bp <= ab; ++bp) {
                        const long num = static_cast<long>(a) * bp - 1;
                        if (num >= 0 && num % ab == 0 && num / ab <= a) {
                            mid = {static_cast<int>(num / ab), sb * bp};
                            break;
                        }
                    }
                }
                for (int i0 = std::max(0, -a); i0 < N && i0 + a < N; ++i0)
                    for (int i1 = std::max(0, -b); i1 < N && i1 + b < N; ++i1) {
                        const std::size_t k = static_cast<std::size_t>(i0) * N + i1;
                        const std::size_t l = static_cast<std::size_t>(i0 + a) * N + (i1 + b);
                        const P x = point(i0, i1), y = point(i0 + a, i1 + b);
                        double v;
                        if (unit) {
                            v = flux_triangle(B, Span(origin), Span(x), Span(y), quad);
                        } else {
                            const std::size_t m = static_cast<std::size_t>(i0 + mid[0]) * N + (i1 + mid[1]);
                            v = gamma(k, m) + gamma(m, l);
                            if (g == 1) {
                                const P z = point(i0 + mid[0], i1 + mid[1]);
                                v += sliver_flux(B, x, y, z, quad);
                            }
                        }
                        gamma(k, l) = v;
                        gamma(l, k) = -v;
                    }
            },
            threads);
    }
}

}  // namespace

PhaseTable phase_table(const VectorPotential& A, const PhaseSpaceGrid& grid, int threads) {
    if (A.n != grid.n && !A.is_zero()) throw std::invalid_argument("phase_table: potential and grid dimensions differ");
    const std::size_t S = grid.size();
    PhaseTable t{grid, Eigen::MatrixXd::Zero(S, S)};
    VectorPotential base = A;
    base.shifts.clear();
    if (base.components.empty() && base.transversal_of && grid.n == 2 && !base.transversal_of->is_zero() &&
        base.transversal_of->polynomial_degree() < 0) {
        fill_by_steps(t.gamma, *base.transversal_of, base.quad, grid, threads);
    } else if (!base.is_zero()) {
        parallel_for(
            S,
            [&](std::size_t k) {
                P xk = grid.position_point(k);
                for (std::size_t l = k + 1; l < S; ++l) {
                    P xl = grid.position_point(l);
                    const double g = segment_phase(base, Span(xk.data(), grid.n), Span(xl.data(), grid.n));
                    t.gamma(k, l) = g;
                    t.gamma(l, k) = -g;
                }
            },
            threads);
    }
    for (const auto& psi : A.shifts) t = t.gauge_shifted(psi);
    return t;
}

PhaseTable PhaseTable::gauge_shifted(const ScalarField& psi) const {
    const std::size_t S = grid.size();
    Eigen::VectorXd p(S);
    for (std::size_t k = 0; k < S; ++k) {
        P x = grid.position_point(k);
        p(k) = psi(Span(x.data(), grid.n));
    }
    PhaseTable out{grid, gamma};
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t l = 0; l < S; ++l)
            if (k != l) out.gamma(k, l) += p(l) - p(k);
    return out;
}

// ---------------------------------------------------------------------------
// quantization

MagneticOperator quantize(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& grid, int threads) {
    return quantize(f, A, phase_table(A, grid, threads), threads);
}

MagneticOperator quantize(const Symbol& f, const VectorPotential& A, const PhaseTable& table, int threads) {
    const PhaseSpaceGrid& g = table.grid;
    if (f.n != g.n) throw std::invalid_argument("quantize: symbol and grid dimensions differ");
    const std::size_t S = g.size();
    std::vector<P> momenta(S);
    for (std::size_t j = 0; j < S; ++j) momenta[j] = g.momentum_point(j);
    Sampler sample = [&](const P& q, std::vector<cplx>& out) {
        for (std::size_t j = 0; j < S; ++j) {
            out[j] = f(Span(q.data(), g.n), Span(momenta[j].data(), g.n));
            check_finite(out[j], q, momenta[j], g.n);
        }
    };
    MagneticOperator M;
    M.grid = g;
    M.gauge = A;
    M.symbol_tag = f.label;
    M.matrix = assemble(g, sample, !f.x_dependent, &table.gamma, threads);
    return M;
}

MagneticOperator wrong_quantize(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& g, int threads) {
    if (f.n != g.n) throw std::invalid_argument("wrong_quantize: symbol and grid dimensions differ");
    const std::size_t S = g.size();
    std::vector<P> momenta(S);
    for (std::size_t j = 0; j < S; ++j) momenta[j] = g.momentum_point(j);
    Sampler sample = [&](const P& q, std::vector<cplx>& out) {
        P a{};
        if (!A.is_zero()) A.evaluate(Span(q.data(), g.n), std::span<double>(a.data(), g.n));
        for (std::size_t j = 0; j < S; ++j) {
            P xi{momenta[j][0] - a[0], momenta[j][1] - a[1]};
            out[j] = f(Span(q.data(), g.n), Span(xi.data(), g.n));
            check_finite(out[j], q, xi, g.n);
        }
    };
    MagneticOperator M;
    M.grid = g;
    M.gauge = A;
    M.symbol_tag = "wrong(" + f.label + ")";
    M.matrix = assemble(g, sample, !f.x_dependent && A.is_zero(), nullptr, threads);
    return M;
}

Eigen::MatrixXcd node_samples(const Symbol& f, const PhaseSpaceGrid& g) {
    const std::size_t S = g.size();
    Eigen::MatrixXcd out(S, S);
    for (std::size_t k = 0; k < S; ++k) {
        P x = g.position_point(k);
        for (std::size_t j = 0; j < S; ++j) {
            P xi = g.momentum_point(j);
            out(k, j) = f(Span(x.data(), g.n), Span(xi.data(), g.n));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// dequantization

SymbolSamples dequantize(const MagneticOperator& M, const VectorPotential& A) {
    return dequantize(M, phase_table(A, M.grid));
}

SymbolSamples dequantize(const MagneticOperator& M, const PhaseTable& table) {
    if (!(M.grid == table.grid)) throw std::invalid_argument("dequantize: grid mismatch");
    SymbolSamples s{M.grid, M.matrix, M.symbol_tag};
    const std::size_t S = M.grid.size();
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t l = 0; l < S; ++l) {
            const double ph = table.gamma(k, l);
            if (ph != 0.0) s.kernel(k, l) *= std::polar(1.0, ph);
        }
    return s;
}

MagneticOperator quantize(const SymbolSamples& f, const VectorPotential& A, const PhaseTable& table) {
    if (!(f.grid == table.grid)) throw std::invalid_argument("quantize: grid mismatch");
    MagneticOperator M{f.grid, f.kernel, A, f.label};
    const std::size_t S = f.grid.size();
    for (std::size_t k = 0; k < S; ++k)
        for (std::size_t l = 0; l < S; ++l) {
            const double ph = table.gamma(k, l);
            if (ph != 0.0) M.matrix(k, l) *= std::polar(1.0, -ph);
        }
    return M;
}

MagneticOperator quantize(const SymbolSamples& f, const VectorPotential& A) {
    return quantize(f, A, phase_table(A, f.grid));
}

bool SymbolSamples::interior_position(std::size_t idx) const {
    P x = grid.position_point(idx);
    const double r = interior_radius();
    for (int a = 0; a < grid.n; ++a)
        if (std::fabs(x[a]) > r + 1e-12 * grid.L) return false;
    return true;
}

bool SymbolSamples::interior_momentum(std::size_t idx) const {
    auto j = grid.unravel(idx);
    for (int a = 0; a < grid.n; ++a)
        if (std::abs(j[a] - grid.N / 2) > grid.N / 4) return false;
    return true;
}

Eigen::MatrixXcd SymbolSamples::values(int threads, ViewWindow window) const {
    if (!(window.sigma > 0.0) || window.power < 2)
        throw std::invalid_argument("SymbolSamples::values: bad window");
    const PhaseSpaceGrid& g = grid;
    const int N = g.N, n = g.n;
    const std::size_t S = g.size();
    const double dx = g.dx(), sigma = window.sigma * g.L, vmax = 0.45 * g.L;
    const int wp = window.power;
    const auto lw = lagrange_mid();
    Eigen::MatrixXcd out(S, S);

    // stencil along one axis: list of (midpoint offset, weight)
    struct Tap {
        int offset;
        double weight;
    };
    const std::vector<Tap> even_taps = {{0, 1.0}};
    std::vector<Tap> odd_taps;
    for (int i = 0; i < 8; ++i) odd_taps.push_back({-7 + 2 * i, lw[i]});

    const int H = N / 2;
    const int dcount = n == 1 ? 1 : 2 * H + 1;
    parallel_for(
        S,
        [&](std::size_t node) {
            auto k = g.unravel(node);
            std::vector<cplx> c(S, cplx(0.0));
            for (int d0 = -H; d0 <= H; ++d0)
                for (int di = 0; di < dcount; ++di) {
                    const int d1 = n == 1 ? 0 : di - H;
                    const double v = dx * std::sqrt(double(d0) * d0 + double(d1) * d1);
                    if (v > vmax) continue;
                    const double r = v / sigma;
                    const double w = std::exp(-std::pow(r, wp));
                    const auto& t0 = (d0 & 1) ? odd_taps : even_taps;
                    const auto& t1 = (d1 & 1) ? odd_taps : even_taps;
                    cplx acc = 0.0;
                    for (const auto& a : t0) {
                        const int s0 = 2 * k[0] + a.offset;
                        const int r0 = wrap((s0 - d0) / 2, N), c0 = wrap((s0 + d0) / 2, N);
                        if (n == 1) {
                            acc += a.weight * kernel(r0, c0);
                            continue;
                        }
                        for (const auto& b : t1) {
                            const int s1 = 2 * k[1] + b.offset;
                            const int r1 = wrap((s1 - d1) / 2, N), c1 = wrap((s1 + d1) / 2, N);
                            acc += a.weight * b.weight * kernel(g.ravel(r0, r1), g.ravel(c0, c1));
                        }
                    }
                    c[g.ravel(wrap(d0, N), wrap(d1, N))] += w * parity(d0 + d1) * acc;
                }
            for (int a = 0; a < n; ++a) detail::dft_axis(c, n, N, a, +1);
            for (std::size_t j = 0; j < S; ++j) out(node, j) = c[j];
        },
        threads);
    return out;
}

double SymbolSamples::interior_distance(const SymbolSamples& a, const Eigen::MatrixXcd& b, int threads) {
    Eigen::MatrixXcd v = a.values(threads);
    double worst = 0.0;
    const std::size_t S = a.grid.size();
    for (std::size_t k = 0; k < S; ++k) {
        if (!a.interior_position(k)) continue;
        for (std::size_t j = 0; j < S; ++j)
            if (a.interior_momentum(j)) worst = std::max(worst, std::abs(v(k, j) - b(k, j)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// magnetic translations

Eigen::MatrixXcd magnetic_translation(const VectorPotential& A, std::span<const double> y, const PhaseSpaceGrid& g) {
    if (static_cast<int>(y.size()) != g.n) throw std::invalid_argument("magnetic_translation: wrong dimension");
    std::array<int, 2> m{0, 0};
    for (int a = 0; a < g.n; ++a) {
        const double u = y[a] / g.dx();
        m[a] = static_cast<int>(std::lround(u));
        if (std::fabs(u - m[a]) > 1e-9) throw std::invalid_argument("magnetic_translation: shift is not on the lattice");
    }
    const std::size_t S = g.size();
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(S, S);
    for (std::size_t k = 0; k < S; ++k) {
        auto kk = g.unravel(k);
        P x = g.position_point(k);
        P xy{x[0] + y[0], g.n == 2 ? x[1] + y[1] : 0.0};
        const std::size_t col = g.ravel(wrap(kk[0] + m[0], g.N), wrap(kk[1] + m[1], g.N));
        const double ph = A.is_zero() ? 0.0 : segment_phase(A, Span(x.data(), g.n), Span(xy.data(), g.n));
        T(k, col) = ph == 0.0 ? cplx(1.0) : std::polar(1.0, -ph);
    }
    return T;
}

// ---------------------------------------------------------------------------
// kernels

KernelFunction KernelFunction::zeros(const PhaseSpaceGrid& g) {
    const std::size_t rows = g.n == 1 ? 2 * g.N : 4 * std::size_t(g.N) * g.N;
    return {g, Eigen::MatrixXcd::Zero(rows, g.size())};
}

std::size_t KernelFunction::midpoint_index(std::array<int, 2> s) const {
    const int M = 2 * grid.N;
    if (grid.n == 1) return wrap(s[0], M);
    return std::size_t(wrap(s[0], M)) * M + wrap(s[1], M);
}

std::size_t KernelFunction::difference_index(std::array<int, 2> d) const {
    return grid.ravel(wrap(d[0], grid.N), grid.n == 2 ? wrap(d[1], grid.N) : 0);
}

KernelFunction KernelFunction::from_function(const PhaseSpaceGrid& g,
                                             const std::function<cplx(Span, Span)>& fn) {
    KernelFunction F = zeros(g);
    const int M = 2 * g.N, H = g.N / 2;
    const int m1 = g.n == 2 ? M : 1, h1 = g.n == 2 ? g.N : 1;
    for (int s0 = 0; s0 < M; ++s0)
        for (int s1 = 0; s1 < m1; ++s1) {
            P q{g.half_position(s0), g.n == 2 ? g.half_position(s1) : 0.0};
            for (int e0 = 0; e0 < g.N; ++e0)
                for (int e1 = 0; e1 < h1; ++e1) {
                    const int d0 = e0 - H, d1 = g.n == 2 ? e1 - H : 0;
                    P v{d0 * g.dx(), d1 * g.dx()};
                    F.values(F.midpoint_index({s0, s1}), F.difference_index({d0, d1})) =
                        fn(Span(q.data(), g.n), Span(v.data(), g.n));
                }
        }
    return F;
}

double KernelFunction::l1_norm() const {
    double total = 0.0;
    for (Eigen::Index c = 0; c < values.cols(); ++c) total += values.col(c).cwiseAbs().maxCoeff();
    return total * grid.cell();
}

KernelFunction involution(const KernelFunction& F) {
    KernelFunction out = F;
    const PhaseSpaceGrid& g = F.grid;
    for (std::size_t c = 0; c < g.size(); ++c) {
        auto d = g.unravel(c);
        const std::size_t neg = F.difference_index({-d[0], -d[1]});
        out.values.col(c) = F.values.col(neg).conjugate();
    }
    return out;
}

HalfLatticeSymbol HalfLatticeSymbol::sample(const Symbol& f, const PhaseSpaceGrid& g) {
    KernelFunction shape = KernelFunction::zeros(g);
    HalfLatticeSymbol out{g, Eigen::MatrixXcd(shape.values.rows(), g.size())};
    const int M = 2 * g.N;
    for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
        const int s0 = g.n == 1 ? int(r) : int(r / M), s1 = g.n == 1 ? 0 : int(r % M);
        P q{g.half_position(s0), g.n == 2 ? g.half_position(s1) : 0.0};
        for (std::size_t j = 0; j < g.size(); ++j) {
            P xi = g.momentum_point(j);
            out.values(r, j) = f(Span(q.data(), g.n), Span(xi.data(), g.n));
        }
    }
    return out;
}

Eigen::MatrixXcd HalfLatticeSymbol::at_nodes() const {
    const std::size_t S = grid.size();
    const int M = 2 * grid.N;
    Eigen::MatrixXcd out(S, S);
    for (std::size_t k = 0; k < S; ++k) {
        auto kk = grid.unravel(k);
        const std::size_t r = grid.n == 1 ? std::size_t(2 * kk[0]) : std::size_t(2 * kk[0]) * M + 2 * kk[1];
        out.row(k) = values.row(r);
    }
    return out;
}

HalfLatticeSymbol partial_fourier(const KernelFunction& F) {
    const PhaseSpaceGrid& g = F.grid;
    const std::size_t S = g.size();
    HalfLatticeSymbol out{g, Eigen::MatrixXcd(F.values.rows(), S)};
    std::vector<cplx> buf(S);
    for (Eigen::Index r = 0; r < F.values.rows(); ++r) {
        for (std::size_t c = 0; c < S; ++c) {
            auto d = g.unravel(c);
            buf[c] = parity(d[0] + d[1]) * F.values(r, c);
        }
        for (int a = 0; a < g.n; ++a) detail::dft_axis(buf, g.n, g.N, a, +1);
        for (std::size_t j = 0; j < S; ++j) out.values(r, j) = g.cell() * buf[j];
    }
    return out;
}

KernelFunction partial_fourier_inverse(const HalfLatticeSymbol& f) {
    const PhaseSpaceGrid& g = f.grid;
    const std::size_t S = g.size();
    KernelFunction F = KernelFunction::zeros(g);
    const double scale = 1.0 / (double(S) * g.cell());
    std::vector<cplx> buf(S);
    for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
        for (std::size_t j = 0; j < S; ++j) buf[j] = f.values(r, j);
        for (int a = 0; a < g.n; ++a) detail::dft_axis(buf, g.n, g.N, a, -1);
        for (std::size_t c = 0; c < S; ++c) {
            auto d = g.unravel(c);
            F.values(r, c) = scale * parity(d[0] + d[1]) * buf[c];
        }
    }
    return F;
}

MagneticOperator rep_A(const KernelFunction& F, const VectorPotential& A) {
    return rep_A(F, A, phase_table(A, F.grid));
}

MagneticOperator rep_A(const KernelFunction& F, const VectorPotential& A, const PhaseTable& table) {
    if (!(F.grid == table.grid)) throw std::invalid_argument("rep_A: grid mismatch");
    const PhaseSpaceGrid& g = F.grid;
    const std::size_t S = g.size();
    MagneticOperator M{g, Eigen::MatrixXcd(S, S), A, "rep"};
    const double cell = g.cell();
    const int N = g.N, H = N / 2;
    // torus midpoint x_k + v/2 per axis, both antipodal ones at |d| = N/2
    auto mids = [&](int k, int l, std::array<int, 2>& s, double& w) {
        const int d = wrap(l - k + H, N) - H;
        s = {2 * k + d, 2 * k + d};
        w = 1.0;
        if (d == -H) {
            s[1] = 2 * k + H;
            w = 0.5;
        }
    };
    for (std::size_t k = 0; k < S; ++k) {
        auto kk = g.unravel(k);
        for (std::size_t l = 0; l < S; ++l) {
            auto ll = g.unravel(l);
            const std::size_t di = F.difference_index({ll[0] - kk[0], ll[1] - kk[1]});
            std::array<int, 2> s0, s1{0, 0};
            double w0, w1 = 1.0;
            mids(kk[0], ll[0], s0, w0);
            if (g.n == 2) mids(kk[1], ll[1], s1, w1);
            cplx v = 0.0;
            for (int a = 0; a < (w0 < 1.0 ? 2 : 1); ++a)
                for (int b = 0; b < (w1 < 1.0 ? 2 : 1); ++b)
                    v += (w0 * w1) * F.values(F.midpoint_index({s0[a], s1[b]}), di);
            v *= cell;
            const double ph = table.gamma(k, l);
            if (ph != 0.0) v *= std::polar(1.0, -ph);
            M.matrix(k, l) = v;
        }
    }
    return M;
}

KernelFunction twisted_product(const KernelFunction& F, const KernelFunction& G, const MagneticField& B, int threads) {
    if (!(F.grid == G.grid)) throw std::invalid_argument("twisted_product: grid mismatch");
    const PhaseSpaceGrid& g = F.grid;
    const int N = g.N, H = N / 2, n = g.n;
    const double dx = g.dx(), cell = g.cell();
    KernelFunction out = KernelFunction::zeros(g);

    // constant fields: omega depends only on the integer wedge y ^ (w - y)
    const bool trivial = B.is_zero() || n == 1;
    const bool constant = !trivial && B.polynomial_degree() == 0;
    double b = 0.0;
    std::vector<cplx> wedge_phase;
    const int wmax = 2 * N * N;
    if (constant) {
        P o{0.0, 0.0};
        b = B.component(0, 1, Span(o.data(), 2));
        wedge_phase.resize(2 * wmax + 1);
        for (int c = -wmax; c <= wmax; ++c) wedge_phase[c + wmax] = std::polar(1.0, -0.5 * b * dx * dx * c);
    }

    const std::size_t rows = out.values.rows();
    const int M2 = 2 * N;
    const int span1 = n == 2 ? N : 1;
    parallel_for(
        rows,
        [&](std::size_t r) {
            const int s0 = n == 1 ? int(r) : int(r / M2), s1 = n == 1 ? 0 : int(r % M2);
            for (int w0 = -H; w0 < H; ++w0)
                for (int wi = 0; wi < span1; ++wi) {
                    const int w1 = n == 2 ? wi - H : 0;
                    cplx acc = 0.0;
                    for (int y0 = -H; y0 < H; ++y0)
                        for (int yi = 0; yi < span1; ++yi) {
                            const int y1 = n == 2 ? yi - H : 0;
                            const int z0 = w0 - y0, z1 = w1 - y1;
                            const cplx fv = F.values(F.midpoint_index({s0 + y0 - w0, s1 + y1 - w1}),
                                                     F.difference_index({y0, y1}));
                            if (fv == cplx(0.0)) continue;
                            const cplx gv = G.values(G.midpoint_index({s0 + y0, s1 + y1}), G.difference_index({z0, z1}));
                            cplx om = 1.0;
                            if (constant) {
                                om = wedge_phase[y0 * z1 - y1 * z0 + wmax];
                            } else if (!trivial) {
                                P q{g.half_position(s0 - w0), g.half_position(s1 - w1)};
                                P y{y0 * dx, y1 * dx}, z{z0 * dx, z1 * dx};
                                om = omega_cocycle(B, Span(q.data(), 2), Span(y.data(), 2), Span(z.data(), 2));
                            }
                            acc += fv * gv * om;
                        }
                    out.values(r, out.difference_index({w0, w1})) = cell * acc;
                }
        },
        threads);
    return out;
}

}  // namespace magweyl
