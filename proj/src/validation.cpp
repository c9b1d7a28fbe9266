#include "magweyl/validation.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

namespace magweyl {

double gauge_covariance_residual(const Symbol& f, const VectorPotential& A, const ScalarField& psi,
                                 const PhaseSpaceGrid& grid, bool wrong, int threads) {
    const auto A2 = gauge_shift(A, psi);
    auto op = [&](const VectorPotential& a) {
        return wrong ? wrong_quantize(f, a, grid, threads).matrix : quantize(f, a, grid, threads).matrix;
    };
    const Eigen::MatrixXcd M1 = op(A), M2 = op(A2);
    Eigen::VectorXcd u(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto p = grid.position_point(k);
        u[k] = std::polar(1.0, psi(std::span<const double>(p.data(), grid.n)));
    }
    const Eigen::MatrixXcd conj_M1 = u.asDiagonal() * M1 * u.conjugate().asDiagonal();
    return operator_norm(M2 - conj_M1) / operator_norm(M1);
}

std::vector<Symbol> s00_family(int n, double L, int count, std::uint64_t seed) {
    if (n != 1 && n != 2) throw std::invalid_argument("s00_family: n must be 1 or 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> P(-2, 2);
    const double dk = 2 * std::numbers::pi / L;
    std::vector<Symbol> out;
    char buf[160];
    for (int i = 0; i < count; ++i) {
        std::string e;
        for (int t = 0; t < 3; ++t) {
            std::string arg;
            for (int a = 0; a < n; ++a) {
                std::snprintf(buf, sizeof buf, "%s%.17g*x%d + %.17g*xi%d", a ? " + " : "", P(rng) * dk, a + 1,
                              1.5 * U(rng), a + 1);
                arg += buf;
            }
            std::snprintf(buf, sizeof buf, "%s%.17g*cos(%s + %.17g)", t ? " + " : "", U(rng), arg.c_str(),
                          std::numbers::pi * U(rng));
            e += buf;
        }
        Symbol s = Symbol::parse(e, n, 0.0, 0.0, 0.0);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<double> s00_seminorms(const std::vector<Symbol>& family, const PhaseSpaceGrid& region, int order) {
    const int n = region.n;
    std::vector<std::pair<MultiIndex, MultiIndex>> idx;
    for (int a0 = 0; a0 <= order; ++a0)
        for (int a1 = 0; a1 <= (n == 2 ? order : 0); ++a1)
            for (int b0 = 0; b0 <= order; ++b0)
                for (int b1 = 0; b1 <= (n == 2 ? order : 0); ++b1)
                    if (a0 + a1 + b0 + b1 <= order) idx.push_back({{a0, a1}, {b0, b1}});
    std::vector<double> out;
    for (const auto& f : family) {
        double s = 0.0;
        for (const auto& [a, alpha] : idx) s = std::max(s, seminorm(f, alpha, a, region));
        out.push_back(s);
    }
    return out;
}

CVFit calderon_vaillancourt_fit(const std::vector<Symbol>& family, const std::vector<double>& seminorms,
                                const VectorPotential& A, const PhaseSpaceGrid& grid, int threads) {
    if (family.empty() || seminorms.size() != family.size())
        throw std::invalid_argument("calderon_vaillancourt_fit: need one seminorm per symbol");
    const auto table = phase_table(A, grid, threads);
    CVFit fit;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const double nm = quantize(family[i], A, table, threads).norm();
        fit.norms.push_back(nm);
        if (seminorms[i] > 0) fit.constant = std::max(fit.constant, nm / seminorms[i]);
    }
    return fit;
}

}  // namespace magweyl
