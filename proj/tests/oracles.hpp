#pragma once

// Test-only numerical oracles, independent of the library's evaluation paths:
// adaptive Simpson quadrature, Gauss-Hermite moments for dense Gaussian
// covariances, and small statistics helpers.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// ---- adaptive Simpson -------------------------------------------------------

namespace detail {

template <typename F>
double simpson(F&& f, double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive(F&& f, double a, double b, double fa, double fm, double fb, double whole,
                double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

} // namespace detail

template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-10, int depth = 40) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    return detail::adaptive(f, a, b, fa, fm, fb, whole, tol, depth);
}

inline std::complex<double> integrate_complex(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    double tol = 1e-10) {
    const double re = integrate([&](double t) { return f(t).real(); }, a, b, tol);
    const double im = integrate([&](double t) { return f(t).imag(); }, a, b, tol);
    return {re, im};
}

// ---- Gauss-Hermite moments --------------------------------------------------

// Nodes/weights for integral of e^{-x^2} f(x) dx via the Golub-Welsch
// tridiagonal eigenproblem.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussHermite(int n) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = std::sqrt(i / 2.0);
            J(i, i - 1) = b;
            J(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        const double mu0 = std::sqrt(M_PI);
        nodes.resize(n);
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            nodes[i] = es.eigenvalues()(i);
            const double v0 = es.eigenvectors()(0, i);
            weights[i] = mu0 * v0 * v0;
        }
    }
};

// E[prod_i eta_{idx[i]}] for eta ~ N(0, cov), exact for polynomial integrands
// given enough nodes.  idx entries are 0-based into cov.
inline double gaussian_moment(const Eigen::MatrixXd& cov, const std::vector<int>& idx,
                              int nodes_per_dim = 8) {
    const int d = static_cast<int>(cov.rows());
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    const GaussHermite gh(nodes_per_dim);

    double total = 0.0;
    std::vector<int> digit(d, 0);
    const long count = static_cast<long>(std::pow(nodes_per_dim, d));
    for (long it = 0; it < count; ++it) {
        long rem = it;
        double weight = 1.0;
        Eigen::VectorXd g(d);
        for (int k = 0; k < d; ++k) {
            const int j = rem % nodes_per_dim;
            rem /= nodes_per_dim;
            g(k) = std::sqrt(2.0) * gh.nodes[j];
            weight *= gh.weights[j] / std::sqrt(M_PI);
        }
        const Eigen::VectorXd eta = L * g;
        double prod = 1.0;
        for (int i : idx) prod *= eta(i);
        total += weight * prod;
    }
    return total;
}

// E[f(mu + sigma g)] for scalar standard normal g.
inline double gaussian_expect(const std::function<double(double)>& f, double mu, double var,
                              int n_nodes = 80) {
    const GaussHermite gh(n_nodes);
    double total = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
        total += gh.weights[i] / std::sqrt(M_PI) *
                 f(mu + std::sqrt(2.0 * var) * gh.nodes[i]);
    return total;
}

// ---- small stats helpers ----------------------------------------------------

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace oracles
