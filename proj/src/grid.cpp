#include "magweyl/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace magweyl {

namespace {

bool smooth_size(int N) {
    if (N < 4 || N % 2 != 0) return false;
    while (N % 2 == 0) N /= 2;
    while (N % 3 == 0) N /= 3;
    return N == 1;
}

double parity(int k) { return (k & 1) ? -1.0 : 1.0; }

void check_same(const PhaseSpaceGrid& g) {
    if (g.n != 1 && g.n != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
}

}  // namespace

PhaseSpaceGrid make_grid(int n, double L, int N) {
    if (n != 1 && n != 2) throw std::invalid_argument("grid dimension must be 1 or 2, got " + std::to_string(n));
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("box length must be positive");
    if (!smooth_size(N))
        throw std::invalid_argument("points per axis must be even, >= 4 and of the form 2^a 3^b, got " +
                                    std::to_string(N));
    return PhaseSpaceGrid{n, L, N};
}

double GridFunction::norm() const {
    double w = domain == Domain::Position ? grid.cell() : grid.dual_cell();
    return std::sqrt(w * values.squaredNorm());
}

GridFunction sample(const PhaseSpaceGrid& grid, const std::function<cplx(std::span<const double>)>& u) {
    GridFunction g{grid, Eigen::VectorXcd(grid.size()), Domain::Position};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto p = grid.position_point(i);
        g.values[i] = u(std::span<const double>(p.data(), grid.n));
    }
    return g;
}

namespace detail {

void dft_axis(std::span<cplx> data, int n, int N, int axis, int sign) {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<cplx> in(N), out(N);
    const std::size_t stride = (n == 2 && axis == 0) ? N : 1;
    const std::size_t lines = (n == 1) ? 1 : N;
    for (std::size_t line = 0; line < lines; ++line) {
        std::size_t base = (n == 1) ? 0 : (axis == 0 ? line : line * N);
        for (int k = 0; k < N; ++k) in[k] = data[base + k * stride];
        if (sign > 0) fft.inv(out, in);
        else fft.fwd(out, in);
        for (int k = 0; k < N; ++k) data[base + k * stride] = out[k];
    }
}

}  // namespace detail

// The node offsets x_0 = -L/2 and xi_0 = -N/2 dxi reduce the transform to a
// plain DFT with (-1)^k and (-1)^(j - N/2) twiddles.
GridFunction fourier(const GridFunction& u) {
    const auto& g = u.grid;
    check_same(g);
    std::vector<cplx> a(u.values.data(), u.values.data() + u.values.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto k = g.unravel(i);
        a[i] *= parity(k[0] + (g.n == 2 ? k[1] : 0));
    }
    for (int ax = 0; ax < g.n; ++ax) detail::dft_axis(a, g.n, g.N, ax, +1);
    const double scale = g.cell() / std::pow(2.0 * std::numbers::pi, 0.5 * g.n);
    GridFunction r{g, Eigen::VectorXcd(a.size()), Domain::Momentum};
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto j = g.unravel(i);
        int s = j[0] - g.N / 2 + (g.n == 2 ? j[1] - g.N / 2 : 0);
        r.values[i] = a[i] * (scale * parity(s));
    }
    return r;
}

GridFunction inverse_fourier(const GridFunction& u) {
    const auto& g = u.grid;
    check_same(g);
    std::vector<cplx> a(u.values.data(), u.values.data() + u.values.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto j = g.unravel(i);
        int s = j[0] - g.N / 2 + (g.n == 2 ? j[1] - g.N / 2 : 0);
        a[i] *= parity(s);
    }
    for (int ax = 0; ax < g.n; ++ax) detail::dft_axis(a, g.n, g.N, ax, -1);
    const double scale = g.dual_cell() / std::pow(2.0 * std::numbers::pi, 0.5 * g.n);
    GridFunction r{g, Eigen::VectorXcd(a.size()), Domain::Position};
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto k = g.unravel(i);
        r.values[i] = a[i] * (scale * parity(k[0] + (g.n == 2 ? k[1] : 0)));
    }
    return r;
}

GridFunction spectral_derivative(const GridFunction& u, int axis) {
    if (axis < 0 || axis >= u.grid.n) throw std::invalid_argument("derivative axis out of range");
    GridFunction h = fourier(u);
    const auto& g = u.grid;
    for (Eigen::Index i = 0; i < h.values.size(); ++i) {
        int j = g.unravel(i)[axis];
        // the Nyquist mode has no symmetric partner; drop it
        h.values[i] *= (j == 0) ? cplx(0.0) : cplx(0.0, -g.momentum(j));
    }
    return inverse_fourier(h);
}

cplx interpolate(const GridFunction& u, std::span<const double> point) {
    const auto& g = u.grid;
    if (static_cast<int>(point.size()) != g.n) throw std::invalid_argument("interpolation point has wrong dimension");
    for (double p : point)
        if (!(p >= -0.5 * g.L && p <= 0.5 * g.L)) throw std::out_of_range("interpolation point outside the box");
    GridFunction h = u.domain == Domain::Position ? fourier(u) : u;
    // per-axis factors e^{-i p xi_j}, Nyquist replaced by cos
    std::array<std::vector<cplx>, 2> w;
    for (int ax = 0; ax < g.n; ++ax) {
        w[ax].resize(g.N);
        for (int j = 0; j < g.N; ++j) {
            double xi = g.momentum(j);
            w[ax][j] = (j == 0) ? cplx(std::cos(point[ax] * xi)) : std::exp(cplx(0.0, -point[ax] * xi));
        }
    }
    cplx s = 0.0;
    for (Eigen::Index i = 0; i < h.values.size(); ++i) {
        auto j = g.unravel(i);
        cplx f = w[0][j[0]];
        if (g.n == 2) f *= w[1][j[1]];
        s += f * h.values[i];
    }
    return s * (g.dual_cell() / std::pow(2.0 * std::numbers::pi, 0.5 * g.n));
}

}  // namespace magweyl
