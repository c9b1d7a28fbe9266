#include "magweyl/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include <Eigen/Eigenvalues>

namespace magweyl {

namespace {

// Golub-Welsch for the Jacobi weight (1-x)^alpha (1+x)^beta on [-1, 1].
QuadratureRule golub_welsch(int order, double alpha, double beta) {
    if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    const double ab = alpha + beta;
    for (int k = 0; k < order; ++k) {
        double d = 2.0 * k + ab;
        J(k, k) = (k == 0 && ab == 0.0) ? (beta - alpha) / (ab + 2.0)
                                        : (beta * beta - alpha * alpha) / (d * (d + 2.0));
        if (k + 1 < order) {
            double kk = k + 1.0;
            double dd = 2.0 * kk + ab;
            double b = 4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (dd * dd * (dd + 1.0) * (dd - 1.0));
            J(k, k + 1) = J(k + 1, k) = std::sqrt(b);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) * std::tgamma(beta + 1.0) /
                       std::tgamma(ab + 2.0);
    QuadratureRule r;
    for (int k = 0; k < order; ++k) {
        r.nodes.push_back(es.eigenvalues()(k));
        double v = es.eigenvectors()(0, k);
        r.weights.push_back(mu0 * v * v);
    }
    return r;
}

const QuadratureRule& reference_rule(int order, int beta) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(order, beta);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, golub_welsch(order, 0.0, beta)).first;
    return it->second;
}

}  // namespace

QuadratureRule gauss_legendre(int order, double a, double b) {
    QuadratureRule r = reference_rule(order, 0);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        r.nodes[i] = a + 0.5 * (b - a) * (r.nodes[i] + 1.0);
        r.weights[i] *= 0.5 * (b - a);
    }
    return r;
}

QuadratureRule gauss_jacobi_linear(int order, double a, double b) {
    // t - a = (b - a)(1 + x)/2 and dt = (b - a)/2 dx
    QuadratureRule r = reference_rule(order, 1);
    const double h = 0.5 * (b - a);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        r.nodes[i] = a + h * (r.nodes[i] + 1.0);
        r.weights[i] *= h * h;
    }
    return r;
}

int exact_order(int degree, int order) {
    if (degree < 0) return order;
    return std::max(1, (degree + 2) / 2);
}

}  // namespace magweyl
