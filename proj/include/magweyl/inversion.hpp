#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "magweyl/quantize.hpp"

namespace magweyl {

// Thrown when |R_z| >= 1; move z further from the spectrum (or march there).
class NeumannDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InversionOptions {
    int k_max = 200;
    double tol = 1e-10;           // sampled sup of (f - z) # result - 1 on the interior
    double operator_tol = 1e-10;  // Frobenius norm of Op(f - z) X - 1, which bounds the operator norm
    // ellipticity test |f| >= C <xi>^m for |xi| > R
    double ellipticity_radius = 3.0;
    double ellipticity_constant = 0.25;
    int threads = 0;
};

struct InverseResult {
    SymbolSamples samples;
    Eigen::MatrixXcd matrix;  // the inverse quantized in the working gauge
    cplx z;
    int terms = 0;
    double residual = 0.0;           // sampled sup of (f - z) # result - 1 on the interior
    double operator_residual = 0.0;  // |Op(f - z) X - 1|_F
    double norm_Rz = 0.0;
    std::vector<double> residual_history;  // after each term
};

// R_z = (f - z) # (f - z)^{-1} - 1 with the pointwise inverse; returns the
// operator norm of its quantization.
double norm_Rz(const Symbol& f, cplx z, const VectorPotential& A, const PhaseTable& table, int threads = 0);
double norm_Rz(const Symbol& f, cplx z, const VectorPotential& A, const PhaseSpaceGrid& grid, int threads = 0);

// (f - z)^{-1} # sum_k (-R_z)^k, summed until both residuals are below their
// tolerances or k_max terms are used. The seam of a non-periodic gauge
// converges slower than the interior, hence the global test.
InverseResult neumann_invert(const Symbol& f, cplx z, const VectorPotential& A, const PhaseTable& table,
                             const InversionOptions& opt = {});
InverseResult neumann_invert(const Symbol& f, cplx z, const VectorPotential& A, const PhaseSpaceGrid& grid,
                             const InversionOptions& opt = {});

// Throws std::invalid_argument unless f is real, elliptic of order m > 0 and
// z is nonreal or z <= inf f - 1 (sampled).
void check_invertible(const Symbol& f, cplx z, const PhaseSpaceGrid& grid, const InversionOptions& opt = {});

// ---------------------------------------------------------------------------
// regularizers p_{m,lambda} = <xi>^m + lambda, r_m and r_{-m}

struct RegularizerSearch {
    double lambda0 = 1.0;
    double target = 0.5;  // norm_Rz(p_{m,lambda}, 0) must fall below this
    int max_doublings = 40;
    InversionOptions inversion{};
};

struct Regularizer {
    double m = 0.0;
    double lambda = 0.0;  // 0 for m = 0
    int doublings = 0;
    double norm_R = 0.0;
    SymbolSamples r_m, r_minus_m;
};

Regularizer build_regularizer(double m, const VectorPotential& A, const PhaseTable& table,
                              const RegularizerSearch& search = {});

// ---------------------------------------------------------------------------

struct OrderFit {
    double slope = 0.0;
    std::vector<double> log_jxi, log_abs;
};

// Least-squares slope of log|s(x_node, xi)| against log<xi> over the upper
// half (in log<xi>) of the given ray; the lower half is pre-asymptotic.
OrderFit order_check_inverse(const SymbolSamples& s, std::size_t x_node, const std::vector<std::size_t>& xi_nodes,
                             int threads = 0);

// eta(Op^A(f)) by the spectral theorem for the Hermitian matrix.
MagneticOperator affiliated_calculus(const Symbol& f, const VectorPotential& A, const PhaseTable& table,
                                     const std::function<cplx(double)>& eta, int threads = 0);
MagneticOperator affiliated_calculus(const Symbol& f, const VectorPotential& A, const PhaseSpaceGrid& grid,
                                     const std::function<cplx(double)>& eta, int threads = 0);

// ---------------------------------------------------------------------------
// resolvent family z -> (f - z)^{(-1)}

struct ResolventOptions {
    InversionOptions inversion{};
    double step_fraction = 0.5;  // march steps satisfy |dz| |R(z)| <= step_fraction
    int max_steps = 10000;
};

struct ResolventEntry {
    cplx z;
    Eigen::MatrixXcd matrix;
    std::string method;  // "neumann" or "march from <z0>"
    int terms = 0;       // Neumann terms, or march steps
    double residual = 0.0;
};

class ResolventFamily {
public:
    Symbol f;
    VectorPotential A;
    PhaseTable table;
    std::vector<ResolventEntry> entries;

    // Neumann where |R_z| < 1, otherwise marched from a convergent real seed
    // with Phi(r_z) = (1 - (z - z0) Phi(r_z0))^{-1} Phi(r_z0).
    static ResolventFamily build(const Symbol& f, const VectorPotential& A, const PhaseTable& table,
                                 const std::vector<cplx>& zs, const ResolventOptions& opt = {});

    SymbolSamples samples(std::size_t i) const;
    // max over stored pairs of the sampled sup of
    // Phi(r_z) - Phi(r_z') - (z - z') Phi(r_z) # Phi(r_z')
    double resolvent_equation_residual(int threads = 0) const;
    // max over stored conjugate pairs of the sampled sup of Phi(r_z)^# - Phi(r_conj z)
    double adjoint_residual(int threads = 0) const;
    std::size_t conjugate_pairs() const;
};

// Sampled sup over interior positions and central momenta of the view.
double interior_sup(const SymbolSamples& s, int threads = 0);

}  // namespace magweyl
