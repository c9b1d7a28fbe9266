#pragma once

#include <array>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "magweyl/grid.hpp"
#include "magweyl/magnetics.hpp"
#include "magweyl/symbols.hpp"

namespace magweyl {

// Dense grid operator produced by a quantization.
struct MagneticOperator {
    PhaseSpaceGrid grid;
    Eigen::MatrixXcd matrix;
    VectorPotential gauge;
    std::string symbol_tag;

    double norm() const;  // largest singular value
};

double operator_norm(const Eigen::MatrixXcd& M);
// Frobenius distance between M and its adjoint, relative to |M|_F.
double hermitian_defect(const Eigen::MatrixXcd& M);

// gamma(k, l) = circulation of A along the straight segment [x_k, x_l].
struct PhaseTable {
    PhaseSpaceGrid grid;
    Eigen::MatrixXd gamma;

    // Table of A + d psi, reusing this one (psi differences are exact).
    PhaseTable gauge_shifted(const ScalarField& psi) const;
};

PhaseTable phase_table(const VectorPotential& A, const PhaseSpaceGrid& grid, int threads = 0);

// M[k,l] = N^{-n} sum_j e^{i v.xi_j} f(x_l + v/2, xi_j) e^{-i gamma(k,l)}, v the
// minimal image of x_k - x_l and the midpoint wrapped into the box. At
// |v_a| = L/2 the two antipodal midpoints share weight 1/2. gamma is still
// taken on the straight segment [x_k, x_l].
MagneticOperator quantize(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& grid, int threads = 0);
MagneticOperator quantize(const Symbol& f, const VectorPotential& A, const PhaseTable& table, int threads = 0);

// Same construction with f(q, xi - A(q)) and no circulation phase.
MagneticOperator wrong_quantize(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& grid,
                                int threads = 0);

// Output of dequantize: the gauge-stripped kernel K = M e^{+i gamma}, which
// determines M exactly, plus a pointwise view on the integer nodes.
//
// The view at (x_k, xi_j) is sum_v w(v) e^{i v.xi_j} K(row = q - v/2, col = q + v/2)
// with w(v) = exp(-(|v|/sigma)^p), |v| <= 0.45 L. Odd
// differences are interpolated to the node from the neighbouring half-nodes
// (8-point Lagrange). It is accurate on interior positions and on the
// central half of the momenta.
//
// The default window (sigma = 0.2 L, p = 4) tames the slowly decaying
// lattice kernels of symbols that grow in xi, at the price of a relative
// bias ~ (v/sigma)^4 on kernels spread over v. The flat window suits
// decaying symbols whose kernels have died out well before 0.45 L.
struct ViewWindow {
    double sigma = 0.2;  // in units of L
    int power = 4;
    static ViewWindow flat() { return {0.35, 16}; }
};

struct SymbolSamples {
    PhaseSpaceGrid grid;
    Eigen::MatrixXcd kernel;
    std::string label;

    // rows: position node index, cols: momentum index
    Eigen::MatrixXcd values(int threads = 0, ViewWindow window = {}) const;
    double interior_radius() const { return 0.275 * grid.L - 3.0 * grid.dx(); }
    bool interior_position(std::size_t idx) const;
    bool interior_momentum(std::size_t idx) const;
    // sup over interior positions and central momenta of |a - b|
    static double interior_distance(const SymbolSamples& a, const Eigen::MatrixXcd& b_values, int threads = 0);
};

SymbolSamples dequantize(const MagneticOperator& M, const VectorPotential& A);
SymbolSamples dequantize(const MagneticOperator& M, const PhaseTable& table);

MagneticOperator quantize(const SymbolSamples& f, const VectorPotential& A, const PhaseTable& table);
MagneticOperator quantize(const SymbolSamples& f, const VectorPotential& A);

// Grid samples of a symbol at the nodes (rows positions, cols momenta).
Eigen::MatrixXcd node_samples(const Symbol& f, const PhaseSpaceGrid& grid);

// [T(y) u](x_k) = e^{-i Gamma^A([x_k, x_k + y])} u(x_k + y), the shift taken
// periodically on the grid and the segment taken straight in R^n.
Eigen::MatrixXcd magnetic_translation(const VectorPotential& A, std::span<const double> y, const PhaseSpaceGrid& grid);

// ---------------------------------------------------------------------------
// kernels F(q; v) on half-lattice midpoints q_s = -L/2 + s dx/2, s in [0, 2N)
// (periodic with period L) and differences v = d dx, d in Z_N.

struct KernelFunction {
    PhaseSpaceGrid grid;
    Eigen::MatrixXcd values;  // rows: flat s index over (2N)^n, cols: flat d index over N^n (d mod N)

    static KernelFunction zeros(const PhaseSpaceGrid& grid);
    // fn(q, v) with v taken as the minimal image in [-L/2, L/2)
    static KernelFunction from_function(const PhaseSpaceGrid& grid,
                                        const std::function<cplx(std::span<const double>, std::span<const double>)>& fn);

    std::size_t midpoint_index(std::array<int, 2> s) const;
    std::size_t difference_index(std::array<int, 2> d) const;
    double l1_norm() const;  // sum_v dx^n sup_q |F(q; v)|
};

// F^(q; v) = conj F(q; -v)
KernelFunction involution(const KernelFunction& F);

// Samples on the half-lattice midpoints times the momentum lattice.
struct HalfLatticeSymbol {
    PhaseSpaceGrid grid;
    Eigen::MatrixXcd values;  // rows: (2N)^n midpoints, cols: N^n momenta

    static HalfLatticeSymbol sample(const Symbol& f, const PhaseSpaceGrid& grid);
    // restriction to the integer nodes (even midpoint indices)
    Eigen::MatrixXcd at_nodes() const;
};

// f(q, xi) = sum_v dx^n e^{i v.xi} F(q; v), and its exact inverse.
HalfLatticeSymbol partial_fourier(const KernelFunction& F);
KernelFunction partial_fourier_inverse(const HalfLatticeSymbol& f);

// [Rep(F) u](x) = sum_y dx^n e^{-i Gamma^A([x,y])} F((x+y)/2; y - x) u(y)
MagneticOperator rep_A(const KernelFunction& F, const VectorPotential& A, const PhaseTable& table);
MagneticOperator rep_A(const KernelFunction& F, const VectorPotential& A);

// (F o G)(q; w) = sum_y dx^n F(q + (y-w)/2; y) G(q + y/2; w - y) omega^B(q - w/2; y, w - y),
// all indices wrapped.
KernelFunction twisted_product(const KernelFunction& F, const KernelFunction& G, const MagneticField& B,
                               int threads = 0);

}  // namespace magweyl
