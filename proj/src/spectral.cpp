#include "magweyl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>

#include "magweyl/parallel.hpp"

namespace magweyl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorPotential gauge_for(const MagneticField& B, int n) {
    if (B.is_zero()) return VectorPotential::zero(n);
    return transversal_gauge(B);
}

bool field_vanishes(const MagneticField& B, const PhaseSpaceGrid& g) {
    if (B.is_zero()) return true;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto p = g.position_point(k);
        for (const auto& c : B.components)
            if (std::abs(c(std::span<const double>(p.data(), g.n))) > 1e-12) return false;
    }
    return true;
}

double re_at(const Symbol& f, int n, const std::array<double, 2>& xi) {
    const std::array<double, 2> x{0.0, 0.0};
    return f(std::span<const double>(x.data(), n), std::span<const double>(xi.data(), n)).real();
}

// minimum of sign * Re f(0, xi) over the box |xi_a| <= xi_max
double box_minimum(const Symbol& f, const PhaseSpaceGrid& g, int refine, double sign) {
    const int n = f.n;
    const double xmax = 0.5 * g.N * g.dxi();
    const double h = g.dxi() / refine;
    const int M = static_cast<int>(std::ceil(xmax / h));
    auto val = [&](const std::array<double, 2>& xi) { return sign * re_at(f, n, xi); };

    std::array<double, 2> best{0.0, 0.0};
    double bv = val(best);
    const int M1 = n == 2 ? M : 0;
    for (int i = -M; i <= M; ++i)
        for (int j = -M1; j <= M1; ++j) {
            const std::array<double, 2> xi{i * h, j * h};
            const double v = val(xi);
            if (v < bv) bv = v, best = xi;
        }

    // coordinate Brent sweeps around the best sample
    const int bits = std::numeric_limits<double>::digits / 2;
    for (int sweep = 0; sweep < (n == 2 ? 8 : 1); ++sweep)
        for (int a = 0; a < n; ++a) {
            auto line = [&](double t) {
                auto p = best;
                p[a] = t;
                return val(p);
            };
            const double lo = std::max(-xmax, best[a] - h), hi = std::min(xmax, best[a] + h);
            auto r = boost::math::tools::brent_find_minima(line, lo, hi, bits);
            if (r.second < bv) bv = r.second, best[a] = r.first;
        }
    return bv;
}

double merge_tolerance(const Symbol& fq, const PhaseSpaceGrid& g, bool constant) {
    std::vector<SymbolFn> grads;
    for (int a = 0; a < fq.n; ++a) {
        MultiIndex al{0, 0};
        al[a] = 1;
        grads.push_back(fq.derivative({0, 0}, al));
    }
    const std::size_t npos = constant ? 1 : g.size();
    std::vector<double> row_max(npos, 0.0);
    parallel_for(npos, [&](std::size_t k) {
        const auto x = constant ? std::array<double, 2>{0.0, 0.0} : g.position_point(k);
        double m = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            const auto xi = g.momentum_point(j);
            double s = 0.0;
            for (const auto& d : grads)
                s += std::norm(d(std::span<const double>(x.data(), g.n), std::span<const double>(xi.data(), g.n)));
            m = std::max(m, std::sqrt(s));
        }
        row_max[k] = m;
    });
    return 2.0 * g.dxi() * *std::max_element(row_max.begin(), row_max.end());
}

}  // namespace

SpectrumResult spectrum(const MagneticOperator& M, const SpectrumOptions& opt) {
    SpectrumResult out;
    out.grid = M.grid;
    out.hermitian_defect = hermitian_defect(M.matrix);
    if (!(out.hermitian_defect <= opt.hermitian_tol)) {
        std::ostringstream os;
        os << "spectrum: operator is not Hermitian (relative asymmetry " << out.hermitian_defect << ")";
        throw NonHermitian(os.str(), out.hermitian_defect);
    }
    const Eigen::MatrixXcd H = 0.5 * (M.matrix + M.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        H, opt.eigenvectors || opt.keep_eigenvectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver did not converge");
    out.eigenvalues = es.eigenvalues();
    if (opt.eigenvectors || opt.keep_eigenvectors) {
        const auto& V = es.eigenvectors();
        out.localization.resize(V.cols());
        for (Eigen::Index i = 0; i < V.cols(); ++i)
            out.localization[i] = localization_score(V.col(i), M.grid, opt.interior_fraction);
        if (opt.keep_eigenvectors) out.eigenvectors = V;
    }
    return out;
}

double localization_score(const Eigen::Ref<const Eigen::VectorXcd>& v, const PhaseSpaceGrid& grid, double fraction) {
    const double r = 0.5 * fraction * grid.L;
    double in = 0.0, all = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w = std::norm(v[k]);
        all += w;
        const auto p = grid.position_point(k);
        if (std::abs(p[0]) <= r && (grid.n == 1 || std::abs(p[1]) <= r)) in += w;
    }
    return all > 0 ? in / all : 0.0;
}

std::vector<double> landau_reference(double b, int k_max) {
    if (!(b > 0)) throw std::invalid_argument("landau_reference: need b > 0");
    if (k_max < 0) throw std::invalid_argument("landau_reference: need k_max >= 0");
    std::vector<double> out;
    for (int k = 0; k <= k_max; ++k) out.push_back((2 * k + 1) * b);
    return out;
}

std::vector<Cluster> clusters(const std::vector<double>& sorted, double gap, std::size_t min_size) {
    std::vector<Cluster> out;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] - sorted[j - 1] <= gap) ++j;
        if (j - i >= min_size) {
            Cluster c;
            c.lo = sorted[i];
            c.hi = sorted[j - 1];
            c.count = j - i;
            double s = 0.0;
            for (std::size_t k = i; k < j; ++k) s += sorted[k];
            c.mean = s / c.count;
            out.push_back(c);
        }
        i = j;
    }
    return out;
}

std::vector<Cluster> localized_clusters(const SpectrumResult& s, double gap, double min_score, std::size_t min_size) {
    if (s.localization.size() != static_cast<std::size_t>(s.eigenvalues.size()))
        throw std::invalid_argument("localized_clusters: spectrum computed without eigenvectors");
    std::vector<double> v;
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
        if (s.localization[i] >= min_score) v.push_back(s.eigenvalues[i]);
    return clusters(v, gap, min_size);
}

std::vector<Interval> merge_intervals(std::vector<Interval> pieces, double tol) {
    std::stable_sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (auto& p : pieces) {
        if (!out.empty() && p.lo <= out.back().hi + tol) {
            auto& q = out.back();
            q.hi = std::max(q.hi, p.hi);
            for (auto& o : p.orbits)
                if (std::find(q.orbits.begin(), q.orbits.end(), o) == q.orbits.end()) q.orbits.push_back(o);
        } else {
            out.push_back(std::move(p));
        }
    }
    return out;
}

double EssentialSpectrumResult::lower_edge() const { return intervals.empty() ? kInf : intervals.front().lo; }

bool EssentialSpectrumResult::contains(double lambda, double tol) const {
    for (const auto& I : intervals)
        if (lambda >= I.lo - tol && lambda <= I.hi + tol) return true;
    return false;
}

Interval range_closure(const Symbol& f, const PhaseSpaceGrid& grid, int refine) {
    if (refine < 1) throw std::invalid_argument("range_closure: refine must be >= 1");
    Interval I;
    I.lo = box_minimum(f, grid, refine, 1.0);
    I.hi = f.m > 0 ? kInf : -box_minimum(f, grid, refine, -1.0);
    return I;
}

EssentialSpectrumResult essential_spectrum(const Symbol& f, const CoefficientAlgebra& algebra, const MagneticField& B,
                                           const PhaseSpaceGrid& grid, const EssentialOptions& opt) {
    if (!f.real) throw std::invalid_argument("essential_spectrum: symbol must be real");
    if (!(f.m > 0)) throw std::invalid_argument("essential_spectrum: need order m > 0");
    if (!is_elliptic(f, 3.0, 0.25, grid)) throw std::invalid_argument("essential_spectrum: symbol is not elliptic");
    if (algebra.quasi_orbits.empty()) throw std::invalid_argument("essential_spectrum: algebra has no quasi-orbits");

    EssentialSpectrumResult out;
    std::vector<Interval> all;
    for (const auto& Q : algebra.quasi_orbits) {
        OrbitSpectrum o;
        o.orbit = Q.label;
        o.f_Q = project_quasiorbit(f, Q);
        o.B_Q = project_field(B, Q);
        const bool flat = field_vanishes(o.B_Q, grid);
        o.constant_coefficients = flat && has_constant_coefficients(o.f_Q, grid);

        const auto A_Q = flat ? VectorPotential::zero(grid.n) : transversal_gauge(o.B_Q);
        o.lattice = spectrum(quantize(o.f_Q, A_Q, grid, opt.threads));
        o.merge_tol = opt.merge_tol ? *opt.merge_tol : merge_tolerance(o.f_Q, grid, o.constant_coefficients);

        if (o.constant_coefficients) {
            Interval r = range_closure(o.f_Q, grid, opt.range_refine);
            r.orbits = {Q.label};
            o.range = r;
            o.intervals = {r};
        } else {
            std::vector<Interval> pts;
            for (Eigen::Index i = 0; i < o.lattice.eigenvalues.size(); ++i)
                pts.push_back({o.lattice.eigenvalues[i], o.lattice.eigenvalues[i], {Q.label}});
            o.intervals = merge_intervals(std::move(pts), o.merge_tol);
            // the top of a lattice spectrum is the momentum cutoff
            if (f.m > 0 && !o.intervals.empty()) o.intervals.back().hi = kInf;
        }
        out.merge_tol = std::max(out.merge_tol, o.merge_tol);
        all.insert(all.end(), o.intervals.begin(), o.intervals.end());
        out.orbits.push_back(std::move(o));
    }
    out.intervals = merge_intervals(std::move(all), out.merge_tol);
    return out;
}

BulkReport compare_bulk_vs_essential(const Symbol& f, const CoefficientAlgebra& algebra, const MagneticField& B,
                                     const PhaseSpaceGrid& grid, const BulkOptions& opt) {
    BulkReport r;
    r.tolerance = opt.tolerance;
    r.essential = essential_spectrum(f, algebra, B, grid, opt.essential);
    SpectrumOptions so;
    so.eigenvectors = true;
    r.bulk = spectrum(quantize(f, gauge_for(B, grid.n), grid, opt.essential.threads), so);

    const double edge = r.essential.lower_edge();
    for (Eigen::Index i = 0; i < r.bulk.eigenvalues.size(); ++i) {
        const BulkEigen e{r.bulk.eigenvalues[i], r.bulk.localization[i]};
        if (e.value < edge - opt.tolerance) {
            r.candidates.push_back(e);
            if (e.localization < opt.min_localization) r.candidates_localized = false;
        } else if (e.localization < opt.min_localization && !r.essential.contains(e.value, opt.tolerance)) {
            r.delocalized_outside.push_back(e);
        }
    }
    return r;
}

}  // namespace magweyl
