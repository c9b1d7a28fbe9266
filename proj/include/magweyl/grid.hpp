#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

namespace magweyl {

using cplx = std::complex<double>;

// Box [-L/2, L/2)^n with N nodes per axis and the dual momentum lattice.
//
// Fourier convention (symmetric, unitary for the weighted norms):
//   fourier:          u^(xi_j) = dx^n (2 pi)^{-n/2} sum_k e^{+i x_k.xi_j} u(x_k)
//   inverse_fourier:  u(x_k)   = dxi^n (2 pi)^{-n/2} sum_j e^{-i x_k.xi_j} u^(xi_j)
// Position norms carry the weight dx^n, momentum norms dxi^n. With this
// choice e^{-x^2/2} maps to e^{-xi^2/2}.
//
// Flat indices run over axis 0 slowest: idx = k0*N + k1.
struct PhaseSpaceGrid {
    int n = 1;
    double L = 1.0;
    int N = 4;

    double dx() const { return L / N; }
    double dxi() const { return 2.0 * 3.14159265358979323846 / L; }
    std::size_t size() const { return n == 1 ? static_cast<std::size_t>(N) : static_cast<std::size_t>(N) * N; }
    double cell() const { return n == 1 ? dx() : dx() * dx(); }          // dx^n
    double dual_cell() const { return n == 1 ? dxi() : dxi() * dxi(); }  // dxi^n

    double position(int k) const { return -0.5 * L + k * dx(); }
    double momentum(int j) const { return (j - N / 2) * dxi(); }
    double half_position(int s) const { return -0.5 * L + 0.5 * s * dx(); }  // (x_k + x_l)/2 with s = k + l

    std::array<int, 2> unravel(std::size_t idx) const {
        if (n == 1) return {static_cast<int>(idx), 0};
        return {static_cast<int>(idx / N), static_cast<int>(idx % N)};
    }
    std::size_t ravel(int k0, int k1 = 0) const {
        return n == 1 ? static_cast<std::size_t>(k0) : static_cast<std::size_t>(k0) * N + k1;
    }
    std::array<double, 2> position_point(std::size_t idx) const {
        auto k = unravel(idx);
        return {position(k[0]), n == 2 ? position(k[1]) : 0.0};
    }
    std::array<double, 2> momentum_point(std::size_t idx) const {
        auto j = unravel(idx);
        return {momentum(j[0]), n == 2 ? momentum(j[1]) : 0.0};
    }

    bool operator==(const PhaseSpaceGrid& o) const { return n == o.n && L == o.L && N == o.N; }
};

// n in {1,2}; L > 0; N even, >= 4, and of the form 2^a 3^b.
PhaseSpaceGrid make_grid(int n, double L, int N);

enum class Domain { Position, Momentum };

struct GridFunction {
    PhaseSpaceGrid grid;
    Eigen::VectorXcd values;
    Domain domain = Domain::Position;

    double norm() const;  // weighted discrete L2 norm
};

GridFunction sample(const PhaseSpaceGrid& grid, const std::function<cplx(std::span<const double>)>& u);

GridFunction fourier(const GridFunction& u);
GridFunction inverse_fourier(const GridFunction& u);
GridFunction spectral_derivative(const GridFunction& u, int axis);

// Band-limited trigonometric interpolation (Nyquist mode split symmetrically).
cplx interpolate(const GridFunction& u, std::span<const double> point);

namespace detail {
// In-place unscaled DFT along one axis of an N^n array:
// sign = +1 computes sum_k e^{+2 pi i k j/N} a_k, sign = -1 the conjugate kernel.
void dft_axis(std::span<cplx> data, int n, int N, int axis, int sign);
}  // namespace detail

}  // namespace magweyl
