#pragma once

#include <cstdint>
#include <vector>

#include "magweyl/quantize.hpp"

namespace magweyl {

// |Op^{A + d psi}(f) - e^{i psi} Op^A(f) e^{-i psi}| / |Op^A(f)| in operator
// norm; wrong = true uses the non-covariant quantization on both sides.
double gauge_covariance_residual(const Symbol& f, const VectorPotential& A, const ScalarField& psi,
                                 const PhaseSpaceGrid& grid, bool wrong = false, int threads = 0);

// Real symbols in S^0_{0,0}: sums of three terms c cos(p.x + q.xi + phi) with
// p on the dual lattice of the box (so the coefficients are periodic on it),
// |q_a| <= 1.5 and |c| <= 1. Deterministic in the seed.
std::vector<Symbol> s00_family(int n, double L, int count, std::uint64_t seed);

// s(f) = max over |a| + |alpha| <= order of the seminorm sampled on region.
std::vector<double> s00_seminorms(const std::vector<Symbol>& family, const PhaseSpaceGrid& region, int order = 2);

struct CVFit {
    double constant = 0.0;      // max over the family of |Op(f)| / s(f)
    std::vector<double> norms;  // |Op^A(f)|
};

// Norm-versus-seminorm constant on `grid`. The seminorms do not depend on
// the grid, so a refinement study reuses them.
CVFit calderon_vaillancourt_fit(const std::vector<Symbol>& family, const std::vector<double>& seminorms,
                                const VectorPotential& A, const PhaseSpaceGrid& grid, int threads = 0);

}  // namespace magweyl
