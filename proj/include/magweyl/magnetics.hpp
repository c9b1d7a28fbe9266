#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magweyl/expression.hpp"

namespace magweyl {

using cplx = std::complex<double>;

// Real function of position with an optional analytic gradient.
struct ScalarField {
    std::function<double(std::span<const double>)> f;
    std::function<void(std::span<const double>, std::span<double>)> gradient;  // may be empty
    int polynomial_degree = -1;  // -1: unknown or not a polynomial
    std::string label;
    std::optional<Expression> expression;

    double operator()(std::span<const double> x) const { return f(x); }
    // Analytic gradient when available, else central differences with
    // step 1e-5 (1 + |x_j|).
    void grad(std::span<const double> x, std::span<double> out) const;

    static ScalarField constant(double c);
    static ScalarField from_expression(const Expression& e);
    static ScalarField parse(const std::string& text) { return from_expression(parse_expression(text)); }
};

enum class FieldClass { Polynomial, BoundedSmooth, InAlgebra };

// Antisymmetric 2-form; only j < k components are stored, in the order
// (0,1), (0,2), (1,2), ...
struct MagneticField {
    int n = 2;
    std::vector<ScalarField> components;
    FieldClass field_class = FieldClass::BoundedSmooth;

    double component(int j, int k, std::span<const double> x) const;
    bool is_zero() const { return components.empty(); }
    int polynomial_degree() const;  // max over components, -1 if any is not polynomial

    static MagneticField zero(int n);
    static MagneticField constant(double b);  // n = 2
    static MagneticField planar(const ScalarField& b12, FieldClass cls = FieldClass::BoundedSmooth);
    static MagneticField parse(const std::string& b12);
};

struct FluxQuadrature {
    int order = 8;
    double tolerance = 1e-12;
};

// A = base + sum of gradients of the gauge functions in `shifts`.
// The base is either explicit components or the transversal gauge of a field.
struct VectorPotential {
    int n = 2;
    std::vector<ScalarField> components;  // explicit base; empty means zero or transversal
    std::optional<MagneticField> transversal_of;
    FluxQuadrature quad;
    std::vector<ScalarField> shifts;
    std::string label;

    void evaluate(std::span<const double> x, std::span<double> out) const;
    bool is_zero() const { return components.empty() && !transversal_of && shifts.empty(); }

    static VectorPotential zero(int n);
    static VectorPotential explicit_components(std::vector<ScalarField> comps);
};

double flux_triangle(const MagneticField& B, std::span<const double> v0, std::span<const double> v1,
                     std::span<const double> v2, const FluxQuadrature& quad = {});

// Explicit double integral for the low-index flux phase Gamma_B(x, y, z).
double gamma_B(const MagneticField& B, std::span<const double> x, std::span<const double> y,
               std::span<const double> z, const FluxQuadrature& quad = {});

cplx omega_low(const MagneticField& B, std::span<const double> x, std::span<const double> y,
               std::span<const double> z, const FluxQuadrature& quad = {});

// Gauss-Legendre line integral of A along the oriented segment [x, y].
double circulation(const VectorPotential& A, std::span<const double> x, std::span<const double> y,
                   const FluxQuadrature& quad = {});

// Same quantity as circulation(), evaluated the cheap way: for a transversal
// base it is the flux through <0, x, y>, gauge shifts contribute psi(y) - psi(x).
double segment_phase(const VectorPotential& A, std::span<const double> x, std::span<const double> y);

VectorPotential transversal_gauge(const MagneticField& B, const FluxQuadrature& quad = {});
VectorPotential gauge_shift(const VectorPotential& A, const ScalarField& psi);

// Flux 2-cocycle e^{-i flux<q, q+x, q+x+y>}.
cplx omega_cocycle(const MagneticField& B, std::span<const double> q, std::span<const double> x,
                   std::span<const double> y, const FluxQuadrature& quad = {});

}  // namespace magweyl
