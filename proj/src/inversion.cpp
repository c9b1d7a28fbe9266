#include "magweyl/inversion.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "magweyl/parallel.hpp"

namespace magweyl {

namespace {

std::string fmt_z(cplx z) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g%+.6gi", z.real(), z.imag());
    return buf;
}

Eigen::MatrixXcd identity(const PhaseSpaceGrid& g) {
    return Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
}

double view_sup(const Eigen::MatrixXcd& M, const VectorPotential& A, const PhaseTable& table, int threads) {
    return interior_sup(dequantize(MagneticOperator{table.grid, M, A, ""}, table), threads);
}

struct Pieces {
    Eigen::MatrixXcd P;   // Op(f - z)
    Eigen::MatrixXcd Q0;  // Op((f - z)^{-1})
    Eigen::MatrixXcd R;   // P Q0 - 1
};

Pieces pieces(const Symbol& f, cplx z, const VectorPotential& A, const PhaseTable& table, int threads) {
    const Symbol fz = shift(f, z);
    Pieces p;
    p.P = quantize(fz, A, table, threads).matrix;
    p.Q0 = quantize(pointwise_inverse(fz), A, table, threads).matrix;
    p.R = p.P * p.Q0 - identity(table.grid);
    return p;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t m = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

std::string jap_power(double m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "jap(xi)^(%.17g)", m);
    return buf;
}

}  // namespace

double interior_sup(const SymbolSamples& s, int threads) {
    const std::size_t S = s.grid.size();
    return SymbolSamples::interior_distance(s, Eigen::MatrixXcd::Zero(S, S), threads);
}

void check_invertible(const Symbol& f, cplx z, const PhaseSpaceGrid& grid, const InversionOptions& opt) {
    if (!f.real) throw std::invalid_argument("inversion: symbol " + f.label + " is not real-valued");
    if (!(f.m > 0.0)) throw std::invalid_argument("inversion: symbol " + f.label + " must have order m > 0");
    if (!is_elliptic(f, opt.ellipticity_radius, opt.ellipticity_constant, grid))
        throw std::invalid_argument("inversion: symbol " + f.label + " is not elliptic on the sampled grid");
    if (z.imag() == 0.0) {
        const double inf = sampled_infimum(f, grid);
        if (z.real() > inf - 1.0)
            throw std::invalid_argument("inversion: real z = " + fmt_z(z) + " must satisfy z <= inf f - 1 = " +
                                        std::to_string(inf - 1.0));
    }
}

double norm_Rz(const Symbol& f, cplx z, const VectorPotential& A, const PhaseTable& table, int threads) {
    return operator_norm(pieces(f, z, A, table, threads).R);
}

double norm_Rz(const Symbol& f, cplx z, const VectorPotential& A, const PhaseSpaceGrid& grid, int threads) {
    return norm_Rz(f, z, A, phase_table(A, grid, threads), threads);
}

InverseResult neumann_invert(const Symbol& f, cplx z, const VectorPotential& A, const PhaseTable& table,
                             const InversionOptions& opt) {
    check_invertible(f, z, table.grid, opt);
    Pieces p = pieces(f, z, A, table, opt.threads);
    InverseResult out;
    out.z = z;
    out.norm_Rz = operator_norm(p.R);
    if (!(out.norm_Rz < 1.0))
        throw NeumannDivergence("neumann_invert: |R_z| = " + std::to_string(out.norm_Rz) + " >= 1 at z = " +
                                fmt_z(z) + "; take |z| larger and extend by the resolvent identity");

    const Eigen::MatrixXcd I = identity(table.grid);
    Eigen::MatrixXcd term = I;  // (-R)^k
    Eigen::MatrixXcd sum = I;
    for (int k = 0;; ++k) {
        out.matrix = p.Q0 * sum;
        out.terms = k + 1;
        const Eigen::MatrixXcd E = p.P * out.matrix - I;
        out.operator_residual = E.norm();
        out.residual = view_sup(E, A, table, opt.threads);
        out.residual_history.push_back(out.residual);
        if ((out.residual <= opt.tol && out.operator_residual <= opt.operator_tol) || out.terms >= opt.k_max) break;
        term = -(p.R * term);
        sum += term;
    }
    out.samples = dequantize(MagneticOperator{table.grid, out.matrix, A, ""}, table);
    out.samples.label = "(" + f.label + " - (" + fmt_z(z) + "))^(-1)";
    return out;
}

InverseResult neumann_invert(const Symbol& f, cplx z, const VectorPotential& A, const PhaseSpaceGrid& grid,
                             const InversionOptions& opt) {
    return neumann_invert(f, z, A, phase_table(A, grid, opt.threads), opt);
}

// ---------------------------------------------------------------------------

Regularizer build_regularizer(double m, const VectorPotential& A, const PhaseTable& table,
                              const RegularizerSearch& search) {
    const PhaseSpaceGrid& g = table.grid;
    Regularizer r;
    r.m = m;
    if (m == 0.0) {
        const Eigen::MatrixXcd I = identity(g);
        r.r_m = dequantize(MagneticOperator{g, I, A, "1"}, table);
        r.r_minus_m = r.r_m;
        return r;
    }
    const double am = std::fabs(m);
    double lambda = search.lambda0;
    for (int d = 0;; ++d) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " + %.17g", lambda);
        Symbol p = Symbol::parse(jap_power(am) + buf, g.n, am);
        const double nr = norm_Rz(p, 0.0, A, table, search.inversion.threads);
        if (nr < search.target) {
            InverseResult inv = neumann_invert(p, 0.0, A, table, search.inversion);
            SymbolSamples fwd = dequantize(quantize(p, A, table, search.inversion.threads), table);
            fwd.label = p.label;
            r.lambda = lambda;
            r.doublings = d;
            r.norm_R = nr;
            r.r_m = m > 0 ? fwd : inv.samples;
            r.r_minus_m = m > 0 ? inv.samples : fwd;
            return r;
        }
        if (d >= search.max_doublings)
            throw std::runtime_error("build_regularizer: lambda search reached " + std::to_string(lambda) +
                                     " without |R| < " + std::to_string(search.target));
        lambda *= 2.0;
    }
}

// ---------------------------------------------------------------------------

OrderFit order_check_inverse(const SymbolSamples& s, std::size_t x_node, const std::vector<std::size_t>& xi_nodes,
                             int threads) {
    const Eigen::MatrixXcd v = s.values(threads);
    std::vector<double> lx, ly;
    for (std::size_t j : xi_nodes) {
        const auto xi = s.grid.momentum_point(j);
        double r2 = 1.0;
        for (int a = 0; a < s.grid.n; ++a) r2 += xi[a] * xi[a];
        lx.push_back(0.5 * std::log(r2));
        ly.push_back(std::log(std::abs(v(static_cast<Eigen::Index>(x_node), static_cast<Eigen::Index>(j)))));
    }
    if (lx.size() < 4) throw std::invalid_argument("order_check_inverse: need at least 4 ray nodes");
    double lo = lx[0], hi = lx[0];
    for (double t : lx) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    const double cut = 0.5 * (lo + hi);
    OrderFit fit;
    for (std::size_t i = 0; i < lx.size(); ++i)
        if (lx[i] >= cut) {
            fit.log_jxi.push_back(lx[i]);
            fit.log_abs.push_back(ly[i]);
        }
    fit.slope = fit_slope(fit.log_jxi, fit.log_abs);
    return fit;
}

// ---------------------------------------------------------------------------

MagneticOperator affiliated_calculus(const Symbol& f, const VectorPotential& A, const PhaseTable& table,
                                     const std::function<cplx(double)>& eta, int threads) {
    if (!f.real) throw std::invalid_argument("affiliated_calculus: symbol " + f.label + " is not real-valued");
    if (!(f.m > 0.0)) throw std::invalid_argument("affiliated_calculus: symbol " + f.label + " must have order m > 0");
    MagneticOperator H = quantize(f, A, table, threads);
    const double defect = hermitian_defect(H.matrix);
    if (defect > 1e-10)
        throw std::runtime_error("affiliated_calculus: quantization of " + f.label +
                                 " is not Hermitian (defect " + std::to_string(defect) + ")");
    Eigen::MatrixXcd Hs = 0.5 * (H.matrix + H.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hs);
    if (es.info() != Eigen::Success) throw std::runtime_error("affiliated_calculus: eigensolver failed");
    const Eigen::Index S = Hs.rows();
    Eigen::VectorXcd e(S);
    for (Eigen::Index i = 0; i < S; ++i) e(i) = eta(es.eigenvalues()(i));
    const Eigen::MatrixXcd& U = es.eigenvectors();
    H.matrix = U * e.asDiagonal() * U.adjoint();
    H.symbol_tag = "eta(" + f.label + ")";
    return H;
}

MagneticOperator affiliated_calculus(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& grid,
                                     const std::function<cplx(double)>& eta, int threads) {
    return affiliated_calculus(f, A, phase_table(A, grid, threads), eta, threads);
}

// ---------------------------------------------------------------------------

namespace {

// (1 - h X)^{-1} X by its Neumann series; |h X| <= 1/2 keeps it short.
Eigen::MatrixXcd march_step(const Eigen::MatrixXcd& X, cplx h) {
    Eigen::MatrixXcd term = X, sum = X;
    const double scale = X.norm();
    for (int k = 0; k < 200; ++k) {
        term = h * (X * term);
        sum += term;
        if (term.norm() <= 1e-17 * scale) break;
    }
    return sum;
}

void march(Eigen::MatrixXcd& X, cplx& zc, cplx target, double fraction, int& steps, int max_steps) {
    while (zc != target) {
        const double hmax = fraction / operator_norm(X);
        cplx d = target - zc;
        const bool last = std::abs(d) <= hmax;
        if (!last) d *= hmax / std::abs(d);
        X = march_step(X, d);
        zc = last ? target : zc + d;
        if (++steps > max_steps) throw std::runtime_error("resolvent march: step cap reached");
    }
}

}  // namespace

ResolventFamily ResolventFamily::build(const Symbol& f, const VectorPotential& A, const PhaseTable& table,
                                       const std::vector<cplx>& zs, const ResolventOptions& opt) {
    ResolventFamily fam{f, A, table, {}};
    const InversionOptions& io = opt.inversion;
    std::optional<InverseResult> seed;
    for (cplx z : zs) {
        ResolventEntry e;
        e.z = z;
        bool direct = false;
        if (z.imag() != 0.0 || z.real() <= sampled_infimum(f, table.grid) - 1.0) {
            check_invertible(f, z, table.grid, io);
            try {
                InverseResult r = neumann_invert(f, z, A, table, io);
                e.matrix = std::move(r.matrix);
                e.method = "neumann";
                e.terms = r.terms;
                e.residual = r.residual;
                direct = true;
            } catch (const NeumannDivergence&) {
            }
        } else {
            throw std::invalid_argument("ResolventFamily: real z = " + fmt_z(z) + " is not below inf f - 1");
        }
        if (!direct) {
            if (!seed) {
                // real seed far enough below the spectrum for Neumann
                double z0 = sampled_infimum(f, table.grid) - 1.0;
                for (int d = 0;; ++d) {
                    if (norm_Rz(f, z0, A, table, io.threads) < 1.0) break;
                    if (d >= 60) throw std::runtime_error("ResolventFamily: no convergent real seed");
                    z0 -= std::ldexp(1.0, d);
                }
                seed = neumann_invert(f, z0, A, table, io);
            }
            // vertical leg first, then horizontal, so the path keeps away from the real axis
            Eigen::MatrixXcd X = seed->matrix;
            cplx zc = seed->z;
            int steps = 0;
            march(X, zc, cplx(seed->z.real(), z.imag()), opt.step_fraction, steps, opt.max_steps);
            march(X, zc, z, opt.step_fraction, steps, opt.max_steps);
            const Eigen::MatrixXcd P = quantize(shift(f, z), A, table, io.threads).matrix;
            e.matrix = std::move(X);
            e.method = "march from " + fmt_z(seed->z);
            e.terms = steps;
            e.residual = view_sup(P * e.matrix - identity(table.grid), A, table, io.threads);
        }
        fam.entries.push_back(std::move(e));
    }
    return fam;
}

SymbolSamples ResolventFamily::samples(std::size_t i) const {
    SymbolSamples s = dequantize(MagneticOperator{table.grid, entries.at(i).matrix, A, ""}, table);
    s.label = "r_z at z = " + fmt_z(entries[i].z);
    return s;
}

double ResolventFamily::resolvent_equation_residual(int threads) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            const auto& a = entries[i];
            const auto& b = entries[j];
            Eigen::MatrixXcd D = a.matrix - b.matrix - (a.z - b.z) * (a.matrix * b.matrix);
            worst = std::max(worst, view_sup(D, A, table, threads));
        }
    return worst;
}

double ResolventFamily::adjoint_residual(int threads) const {
    double worst = 0.0;
    for (const auto& a : entries)
        for (const auto& b : entries)
            if (a.z.imag() > 0.0 && b.z == std::conj(a.z)) {
                Eigen::MatrixXcd D = a.matrix.adjoint() - b.matrix;
                worst = std::max(worst, view_sup(D, A, table, threads));
            }
    return worst;
}

std::size_t ResolventFamily::conjugate_pairs() const {
    std::size_t c = 0;
    for (const auto& a : entries)
        for (const auto& b : entries)
            if (a.z.imag() > 0.0 && b.z == std::conj(a.z)) ++c;
    return c;
}

}  // namespace magweyl
