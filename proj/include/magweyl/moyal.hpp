#pragma once

#include <span>
#include <vector>

#include "magweyl/quantize.hpp"

namespace magweyl {

// f #B g = dequantize(Op^A(f) Op^A(g)). Both factors are quantized in the
// same gauge, so the stripped kernel of the result does not depend on it.
SymbolSamples moyal_pullback(const Symbol& f, const Symbol& g, const VectorPotential& A, const PhaseTable& table,
                             int threads = 0);
SymbolSamples moyal_pullback(const Symbol& f, const Symbol& g, const VectorPotential& A, const PhaseSpaceGrid& grid,
                             int threads = 0);
SymbolSamples moyal_pullback(const SymbolSamples& f, const SymbolSamples& g, const VectorPotential& A,
                             const PhaseTable& table);

// Lattice for the direct product integral: `points` nodes per axis with
// spacing sqrt(pi / points), centred on the evaluation point. With this
// spacing the phase e^{2i y.zeta} is a discrete Fourier kernel, so g = 1
// reproduces f exactly.
struct DirectQuadrature {
    int points = 16;
};

// pi^{-2n} int dY dZ e^{-2i sigma(Y,Z)} e^{-i Gamma_B(x, y, z)} f(X - Y) g(X - Z),
// sigma(Y, Z) = z.eta - y.zeta, evaluated by lattice quadrature.
// X = (x, xi) has 2n entries. Both factors must decay.
cplx moyal_direct(const Symbol& f, const Symbol& g, const MagneticField& B, std::span<const double> X,
                  const DirectQuadrature& quad = {});

// ---------------------------------------------------------------------------
// asymptotic development

struct Rational {
    long num = 0, den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// One term of h_l: C_ab d^{beta-a}_y d^{alpha-b}_z omega(x,0,0) d^a_x d^alpha_xi f d^b_x d^beta_xi g,
// C_ab = (i/2)^l * coefficient.
struct ExpansionContribution {
    MultiIndex a, b, alpha, beta;
    Rational coefficient;  // (-1)^{|a|+|b|+|beta|} / (a! b! (alpha-b)! (beta-a)!)
    MultiIndex y_order() const { return {beta[0] - a[0], beta[1] - a[1]}; }
    MultiIndex z_order() const { return {alpha[0] - b[0], alpha[1] - b[1]}; }
};

struct ExpansionTerm {
    int n = 1;
    int l = 0;
    std::vector<ExpansionContribution> contributions;
};

constexpr int kMaxExpansionOrder = 3;

ExpansionTerm expansion_structure(int n, int l);

// d^mu_y d^nu_z omega_B(x, 0, 0) for |mu| + |nu| <= 3. Up to that order
// omega = 1 - i Gamma and Gamma = 2 B(x)(y^z) - (2/3)(y^z) grad B(x).(y + z),
// so only B and its gradient at x enter.
struct FluxJet {
    int n = 1;
    std::vector<cplx> values;  // indexed by the exponents of (y, z)
    cplx operator()(const MultiIndex& mu, const MultiIndex& nu) const;
};

FluxJet flux_jet(const MagneticField& B, std::span<const double> x);

cplx expansion_term(const Symbol& f, const Symbol& g, const FluxJet& jet, int l, std::span<const double> x,
                    std::span<const double> xi);
cplx expansion_term(const Symbol& f, const Symbol& g, const MagneticField& B, int l, std::span<const double> x,
                    std::span<const double> xi);
// h_l at the grid nodes (rows positions, cols momenta)
Eigen::MatrixXcd expansion_term(const Symbol& f, const Symbol& g, const MagneticField& B, int l,
                                const PhaseSpaceGrid& grid, int threads = 0);

struct RemainderFit {
    double slope = 0.0;
    bool vanishing = false;           // |R| <= 1e-9 max(1, |h_0|) at all but at most one sample
    bool low_dynamic_range = false;   // fewer than 4 usable samples or <xi> spanning less than a factor 3
    std::vector<double> log_jxi, log_remainder;
};

// Momentum nodes on the ray xi = t e_axis, t > 0, inside the central half.
std::vector<std::size_t> positive_ray(const PhaseSpaceGrid& grid, int axis = 0);

// Least-squares slope of log|R_N| against log<xi> with
// R_N = (f #B g) - sum_{l<N} h_l at position node x_node, along xi_nodes.
// A must be a gauge for B.
RemainderFit remainder_order(const Symbol& f, const Symbol& g, const MagneticField& B, const VectorPotential& A,
                             const PhaseSpaceGrid& grid, int N, std::size_t x_node,
                             const std::vector<std::size_t>& xi_nodes, int threads = 0);

}  // namespace magweyl
