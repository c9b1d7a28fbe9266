#pragma once

#include <vector>

namespace magweyl {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre on [a, b]; exact for polynomials of degree 2*order - 1.
QuadratureRule gauss_legendre(int order, double a = 0.0, double b = 1.0);

// Gauss-Jacobi for the weight (t - a) on [a, b]; exact for p(t)*(t - a) with
// deg p <= 2*order - 1.
QuadratureRule gauss_jacobi_linear(int order, double a = 0.0, double b = 1.0);

// Smallest order integrating a polynomial of the given degree exactly;
// falls back to `order` when degree < 0 (not a polynomial).
int exact_order(int degree, int order);

}  // namespace magweyl
