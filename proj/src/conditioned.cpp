#include "qpath/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qpath {

namespace {

double checked_atanh(double z, const char* who) {
    if (!(std::abs(z) < 1.0))
        throw BoundaryDivergenceError(std::string(who) + ": atanh singular at |z| >= 1 (z = " +
                                      std::to_string(z) + ")");
    return std::atanh(z);
}

// d^m/du^m tanh(u) represented as a polynomial in tau = tanh(u):
// d/du tau^k = k tau^{k-1} (1 - tau^2).
std::vector<double> differentiate_in_tanh(const std::vector<double>& poly) {
    std::vector<double> out(poly.size() + 1, 0.0);
    for (std::size_t k = 1; k < poly.size(); ++k) {
        const double c = poly[k] * static_cast<double>(k);
        if (c == 0.0) continue;
        out[k - 1] += c;
        out[k + 1] -= c;
    }
    while (out.size() > 1 && out.back() == 0.0) out.pop_back();
    return out;
}

double eval_poly(const std::vector<double>& poly, double tau) {
    double acc = 0.0;
    for (std::size_t k = poly.size(); k-- > 0;) acc = acc * tau + poly[k];
    return acc;
}

// Coefficients of A^m in the Gaussian-smoothing series of f(u + eta),
// eta ~ N(0, A): term_m = f^{(2m)}(u) / (2^m m!).
std::vector<double> series_coeffs(std::vector<double> poly, double tau, int order) {
    std::vector<double> coeffs;
    double fact = 1.0;
    for (int m = 0; m <= order; ++m) {
        if (m > 0) {
            poly = differentiate_in_tanh(differentiate_in_tanh(poly));
            fact *= 2.0 * m;
        }
        coeffs.push_back(eval_poly(poly, tau) / fact);
    }
    return coeffs;
}

SeriesValue sum_with_ratio_test(const std::vector<double>& coeffs, double A) {
    SeriesValue out;
    double prev = 0.0;
    bool have_prev = false;
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
        const double term = coeffs[m] * std::pow(A, static_cast<double>(m));
        out.value += term;
        ++out.terms_used;
        if (m >= 2 && have_prev && std::abs(term) > std::abs(prev) && term != 0.0)
            out.truncation_warning = true;
        if (term != 0.0) {
            prev = term;
            have_prev = true;
        }
    }
    return out;
}

double fluctuation_variance(double t, double T, const ModelParams& params) {
    return (t / params.tau_m) * (1.0 - t / T);
}

} // namespace

double optimal_path_u(double z_I, double z_F, double T, double t) {
    const double uI = checked_atanh(z_I, "optimal_path_u");
    const double uF = checked_atanh(z_F, "optimal_path_u");
    return (t / T) * (uF - uI) + uI;
}

double final_state_pdf(double z_F, double z_I, double T, const ModelParams& params) {
    const double uI = checked_atanh(z_I, "final_state_pdf");
    const double uF = checked_atanh(z_F, "final_state_pdf");
    const double tm = params.tau_m;
    const double rbar = (tm / T) * (uF - uI);
    const double log_ratio = 0.5 * (std::log1p(-z_I * z_I) - std::log1p(-z_F * z_F));
    return std::sqrt(tm / (2.0 * M_PI * T)) / (1.0 - z_F * z_F) *
           std::exp(-T * (rbar * rbar + 1.0) / (2.0 * tm) + log_ratio);
}

double m_inverse_element(std::size_t j, std::size_t k, std::size_t n,
                         const ModelParams& params) {
    if (j < 1 || k < 1 || j > n - 1 || k > n - 1)
        throw std::out_of_range("m_inverse_element: indices must lie in [1, n-1]");
    if (k < j) std::swap(j, k);
    return (params.dt / params.tau_m) * static_cast<double>(j) *
           static_cast<double>(n - k) / static_cast<double>(n);
}

namespace {

double wick_recurse(std::vector<std::size_t>& idx, std::size_t n, const ModelParams& params) {
    if (idx.empty()) return 1.0;
    // Pair the last element with each earlier one.
    const std::size_t last = idx.back();
    idx.pop_back();
    double total = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t partner = idx[i];
        std::swap(idx[i], idx.back());
        const std::size_t saved = idx.back();
        idx.pop_back();
        total += m_inverse_element(std::min(partner, last), std::max(partner, last), n, params) *
                 wick_recurse(idx, n, params);
        idx.push_back(saved);
        std::swap(idx[i], idx.back());
    }
    idx.push_back(last);
    return total;
}

} // namespace

double wick_moment(const std::vector<std::size_t>& indices, std::size_t n,
                   const ModelParams& params) {
    if (indices.empty()) throw ConfigError("wick_moment: index set must be nonempty");
    if (indices.size() % 2 != 0) return 0.0;
    std::vector<std::size_t> idx = indices;
    return wick_recurse(idx, n, params);
}

SeriesValue conditional_mean_z(double t, double z_I, double z_F, double T,
                               const ModelParams& params, int order) {
    const double u = optimal_path_u(z_I, z_F, T, t);
    const double A = fluctuation_variance(t, T, params);
    const std::vector<double> tanh_poly{0.0, 1.0};
    return sum_with_ratio_test(series_coeffs(tanh_poly, std::tanh(u), order), A);
}

SeriesValue conditional_var_z(double t, double z_I, double z_F, double T,
                              const ModelParams& params, int order) {
    const double u = optimal_path_u(z_I, z_F, T, t);
    const double A = fluctuation_variance(t, T, params);
    const double tau = std::tanh(u);

    // Organize <z^2> - <z>^2 by powers of A so that the order-1 truncation is
    // exactly the first-order closed form.
    const std::vector<double> mean_c = series_coeffs({0.0, 1.0}, tau, order);
    const std::vector<double> sq_c = series_coeffs({0.0, 0.0, 1.0}, tau, order);
    std::vector<double> var_c(order + 1, 0.0);
    for (int m = 0; m <= order; ++m) {
        double square = 0.0;
        for (int i = 0; i <= m; ++i) square += mean_c[i] * mean_c[m - i];
        var_c[m] = sq_c[m] - square;
    }
    return sum_with_ratio_test(var_c, A);
}

double conditional_zz_corr(double t_j, double t_k, double z_I, double z_F, double T,
                           const ModelParams& params) {
    if (t_k < t_j) std::swap(t_j, t_k);
    const double uj = optimal_path_u(z_I, z_F, T, t_j);
    const double uk = optimal_path_u(z_I, z_F, T, t_k);
    const double sech2_j = 1.0 - std::tanh(uj) * std::tanh(uj);
    const double sech2_k = 1.0 - std::tanh(uk) * std::tanh(uk);
    return (t_j / params.tau_m) * (1.0 - t_k / T) * sech2_j * sech2_k;
}

ConditionedStats postselect(const EnsembleResult& ens, const Postselection& sel,
                            const ModelParams& params) {
    sel.validate();
    if (ens.n_traj == 0) throw ConfigError("postselect: empty ensemble");

    ConditionedStats out;
    out.n_checkpoints = ens.grid.steps.size();
    out.times = ens.grid.times(params);

    for (std::size_t i = 0; i < ens.n_traj; ++i)
        if (std::abs(ens.final_states[i].z - sel.z_F) <= sel.tolerance)
            out.accepted.push_back(i);

    out.acceptance_fraction =
        static_cast<double>(out.accepted.size()) / static_cast<double>(ens.n_traj);

    if (out.accepted.empty()) {
        const double predicted =
            final_state_pdf(sel.z_F, 0.0, params.total_time(), params) * 2.0 * sel.tolerance;
        throw EmptySelectionError(
            "postselect: no trajectory within the window; Eq.-based acceptance estimate "
            "(from z_I = 0) is about " +
            std::to_string(predicted));
    }

    const std::size_t n_ck = out.n_checkpoints;
    const std::size_t m = out.accepted.size();
    out.mean.assign(n_ck, 0.0);
    out.var.assign(n_ck, 0.0);
    out.stderr_mean.assign(n_ck, 0.0);
    out.corr.assign(n_ck * n_ck, 0.0);

    for (std::size_t c = 0; c < n_ck; ++c) {
        double sum = 0.0;
        for (std::size_t i : out.accepted) sum += ens.z_at(i, c);
        out.mean[c] = sum / static_cast<double>(m);
    }
    for (std::size_t a = 0; a < n_ck; ++a) {
        for (std::size_t b = a; b < n_ck; ++b) {
            double acc = 0.0;
            for (std::size_t i : out.accepted)
                acc += (ens.z_at(i, a) - out.mean[a]) * (ens.z_at(i, b) - out.mean[b]);
            const double cov = m > 1 ? acc / static_cast<double>(m - 1) : 0.0;
            out.corr[a * n_ck + b] = cov;
            out.corr[b * n_ck + a] = cov;
        }
        out.var[a] = out.corr[a * n_ck + a];
        out.stderr_mean[a] = std::sqrt(out.var[a] / static_cast<double>(m));
    }
    return out;
}

namespace {

// Continuum action evaluated exactly on the piecewise-linear u-interpolant:
// the tanh term telescopes to ln cosh at the boundaries, so only the kinetic
// sum depends on the interior points.
double pl_action(const std::vector<double>& u, double dt, double tau_m) {
    double kinetic = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double du = u[k + 1] - u[k];
        kinetic += du * du;
    }
    const double T = dt * static_cast<double>(u.size() - 1);
    const auto lncosh = [](double x) { return std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - M_LN2; };
    return -(tau_m / (2.0 * dt)) * kinetic + (lncosh(u.back()) - lncosh(u.front())) -
           T / (2.0 * tau_m);
}

} // namespace

ActionDecomposition action_decomposition_check(const std::vector<double>& z_path, double z_I,
                                               double z_F, const ModelParams& params) {
    if (z_path.size() < 2)
        throw ConfigError("action_decomposition_check: path needs at least 2 points");
    if (std::abs(z_path.front() - z_I) > 1e-12 || std::abs(z_path.back() - z_F) > 1e-12)
        throw EndpointMismatchError("action_decomposition_check: path endpoints differ from "
                                    "(z_I, z_F)");

    const std::size_t n = z_path.size() - 1;
    const double T = params.dt * static_cast<double>(n);

    std::vector<double> u(z_path.size());
    for (std::size_t k = 0; k < z_path.size(); ++k)
        u[k] = checked_atanh(z_path[k], "action_decomposition_check");

    std::vector<double> ubar(z_path.size());
    for (std::size_t k = 0; k < z_path.size(); ++k)
        ubar[k] = optimal_path_u(z_I, z_F, T, params.dt * static_cast<double>(k));

    ActionDecomposition out;
    out.s_full = pl_action(u, params.dt, params.tau_m);
    out.s_opt = pl_action(ubar, params.dt, params.tau_m);

    double quad = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double d = (u[k + 1] - ubar[k + 1]) - (u[k] - ubar[k]);
        quad += d * d;
    }
    out.quad_residual = (params.tau_m / (2.0 * params.dt)) * quad;

    const double lhs = out.s_full;
    const double rhs = out.s_opt - out.quad_residual;
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
    if (std::abs(lhs - rhs) > 1e-8 * scale)
        throw NumericalConsistencyError("action decomposition identity violated");
    return out;
}

} // namespace qpath
