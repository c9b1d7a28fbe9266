#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "magweyl/expression.hpp"
#include "magweyl/grid.hpp"
#include "magweyl/magnetics.hpp"

namespace magweyl {

using MultiIndex = std::array<int, 2>;
using SymbolFn = std::function<cplx(std::span<const double> x, std::span<const double> xi)>;

inline int order(const MultiIndex& a) { return a[0] + a[1]; }

class DerivativeUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluable phase-space function f(x, xi) with order/type metadata.
class Symbol {
public:
    int n = 1;
    double m = 0.0;
    double rho = 1.0;
    double delta = 0.0;
    bool real = true;
    bool x_dependent = true;
    std::string label;
    SymbolFn f;
    // Analytic partial derivatives d_x^a d_xi^alpha; empty when unavailable.
    std::function<std::optional<SymbolFn>(const MultiIndex& a, const MultiIndex& alpha)> derivative_provider;
    std::optional<Expression> expression;

    cplx operator()(std::span<const double> x, std::span<const double> xi) const { return f(x, xi); }

    // Analytic when possible, else central differences for total order <= 2.
    SymbolFn derivative(const MultiIndex& a, const MultiIndex& alpha) const;

    static Symbol from_expression(const Expression& e, int n, double m, double rho = 1.0, double delta = 0.0,
                                  bool real = true);
    static Symbol parse(const std::string& text, int n, double m, double rho = 1.0, double delta = 0.0);
    static Symbol constant(cplx c, int n);
    static Symbol from_function(SymbolFn fn, int n, double m, bool x_dependent = true, bool real = false,
                                std::string label = "user function");
};

// Pointwise algebra. Results keep analytic derivatives only when both inputs
// are expressions; otherwise the finite-difference fallback applies.
Symbol operator+(const Symbol& f, const Symbol& g);
Symbol operator-(const Symbol& f, const Symbol& g);
Symbol operator*(const Symbol& f, const Symbol& g);
Symbol shift(const Symbol& f, cplx z);  // f - z
Symbol conj(const Symbol& f);
Symbol pointwise_inverse(const Symbol& f);  // 1/f, order -m

// f on the torus of the grid without the coefficient jump at the seam:
// f_s = chi f + (1 - chi) f(0, .), chi = 1 for all |x_a| <= inner L and
// vanishing to all orders at |x_a| = L/2 (product of C-infinity steps).
// No analytic derivatives.
Symbol seam_blend(const Symbol& f, const PhaseSpaceGrid& grid, double inner = 0.35);

// sup over the grid nodes x_k and lattice momenta xi_j of
// <xi>^{-m + rho|alpha| - delta|a|} |d_x^a d_xi^alpha f|.
double seminorm(const Symbol& f, const MultiIndex& alpha, const MultiIndex& a, const PhaseSpaceGrid& region);

// Sampled test of |f| >= C <xi>^m for |xi| > R.
bool is_elliptic(const Symbol& f, double R, double C, const PhaseSpaceGrid& region);

// Smallest sampled value of Re f (used for the z <= inf f - 1 test).
double sampled_infimum(const Symbol& f, const PhaseSpaceGrid& region);

// ---------------------------------------------------------------------------
// coefficient algebras and quasi-orbits

enum class AlgebraKind { ConstantCoefficients, VanishingAtInfinityPlusConstants, AsymptoticLimitsPerDirection, Periodic };

// lim_{t -> inf} of the coefficients along x + t*direction.
struct DirectionalLimit {
    std::array<double, 2> direction{1.0, 0.0};
    double distance = 1e10;  // evaluation distance standing in for the limit
};

// Sample of the translation hull: x -> x + shift.
struct Translation {
    std::array<double, 2> shift{0.0, 0.0};
};

struct Identity {};

struct QuasiOrbit {
    std::string label;
    std::variant<std::monostate, Identity, DirectionalLimit, Translation> rule;
};

struct CoefficientAlgebra {
    AlgebraKind kind = AlgebraKind::ConstantCoefficients;
    std::vector<QuasiOrbit> quasi_orbits;
    std::vector<std::array<double, 2>> lattice;  // Periodic only

    static CoefficientAlgebra constant_coefficients();
    static CoefficientAlgebra vanishing_at_infinity(int n);
    static CoefficientAlgebra asymptotic_limits_1d();
    static CoefficientAlgebra asymptotic_directions(const std::vector<std::array<double, 2>>& directions);
    static CoefficientAlgebra periodic(const std::vector<std::array<double, 2>>& lattice, int translates_per_axis);
};

class MissingLimitRule : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Symbol project_quasiorbit(const Symbol& f, const QuasiOrbit& Q);
MagneticField project_field(const MagneticField& B, const QuasiOrbit& Q);

// True when f has no sampled x-dependence on the grid (within 1e-13 relative).
bool has_constant_coefficients(const Symbol& f, const PhaseSpaceGrid& region);

}  // namespace magweyl
