#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "qpath/conditioned.hpp"

using namespace qpath;

namespace {

ModelParams qnd(double dt = 0.006, std::size_t n = 100) {
    ModelParams p;
    p.tau_m = 1.0;
    p.dt = dt;
    p.n_steps = n;
    return p;
}

// Tridiagonal fluctuation matrix (tau_m/dt) * tridiag(-1, 2, -1), (n-1)^2.
Eigen::MatrixXd m_matrix(std::size_t n, const ModelParams& p) {
    const auto d = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        M(i, i) = 2.0;
        if (i > 0) M(i, i - 1) = -1.0;
        if (i + 1 < d) M(i, i + 1) = -1.0;
    }
    return (p.tau_m / p.dt) * M;
}

Eigen::MatrixXd m_inverse_dense(std::size_t n, const ModelParams& p) {
    const auto d = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd Minv(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            Minv(i, j) = m_inverse_element(i + 1, j + 1, n, p);
    return Minv;
}

// 99th percentile of chi^2 with the given dof (Wilson-Hilferty).
double chi2_crit_99(double dof) {
    const double z = 2.3263478740408408;
    const double a = 2.0 / (9.0 * dof);
    const double c = 1.0 - a + z * std::sqrt(a);
    return dof * c * c * c;
}

} // namespace

TEST_CASE("optimal_path_u: boundary interpolation and reference slope") {
    const double zF = std::cos(M_PI / 4.0);
    const double T = 0.6;
    CHECK(optimal_path_u(0.0, zF, T, 0.0) == doctest::Approx(0.0));
    CHECK(optimal_path_u(0.0, zF, T, T) == doctest::Approx(std::atanh(zF)));
    CHECK(optimal_path_u(0.0, zF, T, 0.3) == doctest::Approx(0.5 * std::atanh(zF)));
    CHECK(optimal_path_u(0.4, 0.4, T, 0.123) == doctest::Approx(std::atanh(0.4)));
    CHECK_THROWS_AS(optimal_path_u(1.0, 0.0, T, 0.0), BoundaryDivergenceError);
}

TEST_CASE("final_state_pdf: symmetry and quadrature normalization") {
    const auto p = qnd();
    for (double zf : {0.1, 0.5, 0.9})
        CHECK(final_state_pdf(zf, 0.0, 0.6, p) ==
              doctest::Approx(final_state_pdf(-zf, 0.0, 0.6, p)).epsilon(1e-12));

    for (double zi : {0.0, 0.5}) {
        for (double T : {0.2, 0.6}) {
            const double total = oracles::integrate(
                [&](double zf) { return final_state_pdf(zf, zi, T, p); }, -1.0 + 1e-12,
                1.0 - 1e-12, 1e-9);
            CHECK(std::abs(total - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("final_state_pdf: Monte Carlo histogram agrees (chi-square)") {
    const auto p = qnd();
    EnsembleOptions opts;
    opts.sim = SimOptions::for_scheme(UpdateScheme::exact_operator());
    CheckpointGrid grid;
    grid.steps = {p.n_steps};
    const auto ens =
        simulate_ensemble(100000, BlochState{0, 0, 0}, p, FeedbackSpec::none(), 123, grid, opts);

    const int n_bins = 25;
    const double lo = -0.95, hi = 0.95;
    std::vector<double> observed(n_bins + 2, 0.0);
    for (const auto& s : ens.final_states) {
        if (s.z < lo)
            observed[0] += 1.0;
        else if (s.z >= hi)
            observed[n_bins + 1] += 1.0;
        else
            observed[1 + static_cast<int>((s.z - lo) / (hi - lo) * n_bins)] += 1.0;
    }
    std::vector<double> expected(n_bins + 2, 0.0);
    const double T = p.total_time();
    auto pdf = [&](double zf) { return final_state_pdf(zf, 0.0, T, p); };
    expected[0] = 100000.0 * oracles::integrate(pdf, -1.0 + 1e-12, lo, 1e-10);
    expected[n_bins + 1] = 100000.0 * oracles::integrate(pdf, hi, 1.0 - 1e-12, 1e-10);
    for (int b = 0; b < n_bins; ++b) {
        const double a = lo + (hi - lo) * b / n_bins;
        const double c = lo + (hi - lo) * (b + 1) / n_bins;
        expected[1 + b] = 100000.0 * oracles::integrate(pdf, a, c, 1e-10);
    }
    double chi2 = 0.0;
    int dof = -1;
    for (std::size_t b = 0; b < expected.size(); ++b) {
        if (expected[b] < 5.0) continue;  // drop sparse tail bins
        chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
        ++dof;
    }
    CHECK(chi2 < chi2_crit_99(static_cast<double>(dof)));  // p > 0.01
}

TEST_CASE("m_inverse_element: diagonal value, symmetry, and M M^{-1} = I") {
    const auto p = qnd();
    CHECK(m_inverse_element(1, 1, 2, p) == doctest::Approx(p.dt / (2.0 * p.tau_m)));

    for (std::size_t n : {std::size_t(6), std::size_t(8)}) {
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t k = 1; k < n; ++k)
                CHECK(m_inverse_element(j, k, n, p) == m_inverse_element(k, j, n, p));
        const Eigen::MatrixXd prod = m_matrix(n, p) * m_inverse_dense(n, p);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(prod.rows(), prod.cols());
        CHECK((prod - I).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK_THROWS_AS(m_inverse_element(0, 1, 8, p), std::out_of_range);
    CHECK_THROWS_AS(m_inverse_element(1, 8, 8, p), std::out_of_range);
}

TEST_CASE("wick_moment: pair correlation and four-point pairing sum") {
    const auto p = qnd();
    const std::size_t n = 10;
    const double T = static_cast<double>(n) * p.dt;  // the wick grid's horizon
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t k = j; k < n; ++k) {
            const double tj = j * p.dt;
            const double tk = k * p.dt;
            CHECK(wick_moment({j, k}, n, p) ==
                  doctest::Approx((tj / p.tau_m) * (1.0 - tk / T)).epsilon(1e-12));
        }
    }
    const double four = wick_moment({2, 3, 5, 7}, n, p);
    auto mi = [&](std::size_t a, std::size_t b) { return m_inverse_element(a, b, n, p); };
    CHECK(four == doctest::Approx(mi(2, 3) * mi(5, 7) + mi(2, 5) * mi(3, 7) +
                                  mi(2, 7) * mi(3, 5)).epsilon(1e-12));
    CHECK(wick_moment({1, 2, 3}, n, p) == 0.0);
    CHECK(wick_moment({4}, n, p) == 0.0);
}

TEST_CASE("wick_moment: double-factorial law for repeated indices") {
    const auto p = qnd();
    const std::size_t n = 12;
    const std::size_t j = 5;
    const double mjj = m_inverse_element(j, j, n, p);
    CHECK(wick_moment({j, j}, n, p) == doctest::Approx(mjj));
    CHECK(wick_moment({j, j, j, j}, n, p) == doctest::Approx(3.0 * mjj * mjj));
    CHECK(wick_moment({j, j, j, j, j, j}, n, p) == doctest::Approx(15.0 * mjj * mjj * mjj));
}

TEST_CASE("wick_moment: dense Gaussian-moment oracle for all small multisets") {
    const auto p = qnd(0.05, 5);
    std::mt19937_64 rng(99);
    for (std::size_t n : {std::size_t(3), std::size_t(4), std::size_t(5)}) {
        const Eigen::MatrixXd cov = m_inverse_dense(n, p);
        std::uniform_int_distribution<std::size_t> pick(1, n - 1);
        for (int size : {2, 4, 6}) {
            for (int rep = 0; rep < 12; ++rep) {
                std::vector<std::size_t> idx;
                std::vector<int> idx0;
                for (int i = 0; i < size; ++i) {
                    const std::size_t j = pick(rng);
                    idx.push_back(j);
                    idx0.push_back(static_cast<int>(j - 1));
                }
                const double expected = oracles::gaussian_moment(cov, idx0, 8);
                const double got = wick_moment(idx, n, p);
                CHECK(std::abs(got - expected) < 1e-8 * std::max(1.0, std::abs(expected)));
            }
        }
    }
    // The specific reference case n = 4, indices {1,1,2,2}.
    const std::size_t n4 = 4;
    const Eigen::MatrixXd cov4 = m_inverse_dense(n4, p);
    CHECK(std::abs(wick_moment({1, 1, 2, 2}, n4, p) -
                   oracles::gaussian_moment(cov4, {0, 0, 1, 1}, 8)) < 1e-8);
}

TEST_CASE("conditional_mean_z: boundary pinning and first-order closed form") {
    const auto p = qnd();
    const double zF = std::cos(M_PI / 4.0);
    const double T = 0.6;
    for (int order : {1, 2, 4, 6}) {
        CHECK(conditional_mean_z(0.0, 0.0, zF, T, p, order).value == doctest::Approx(0.0));
        CHECK(conditional_mean_z(T, 0.0, zF, T, p, order).value ==
              doctest::Approx(zF).epsilon(1e-12));
    }
    // Order 1 is exactly tanh(u) - A sech^2(u) tanh(u), A = (t/tau_m)(1-t/T).
    for (double t : {0.1, 0.3, 0.5}) {
        const double u = optimal_path_u(0.0, zF, T, t);
        const double A = (t / p.tau_m) * (1.0 - t / T);
        const double sech2 = 1.0 - std::tanh(u) * std::tanh(u);
        const double expected = std::tanh(u) - A * sech2 * std::tanh(u);
        CHECK(conditional_mean_z(t, 0.0, zF, T, p, 1).value ==
              doctest::Approx(expected).epsilon(1e-13));
    }
    // Odd symmetry: z_I = z_F = 0 gives zero at every order.
    for (double t : {0.1, 0.3, 0.5})
        CHECK(conditional_mean_z(t, 0.0, 0.0, T, p, 5).value == doctest::Approx(0.0));
}

TEST_CASE("conditional series: Gaussian-smoothing oracle at high order") {
    // The exact conditional law is z = tanh(u + eta), eta ~ N(0, A); the
    // series is asymptotic, so compare Gauss-Hermite integration against a
    // deep truncation (order 10) and check the truncation improves on order 2.
    const auto p = qnd();
    const double T = 0.3;
    for (double zF : {0.2, 0.6}) {
        for (double t : {0.06, 0.15, 0.24}) {
            const double u = optimal_path_u(0.1, zF, T, t);
            const double A = (t / p.tau_m) * (1.0 - t / T);
            const double mean_oracle =
                oracles::gaussian_expect([](double x) { return std::tanh(x); }, u, A);
            const double sq_oracle = oracles::gaussian_expect(
                [](double x) { return std::tanh(x) * std::tanh(x); }, u, A);
            const double var_oracle = sq_oracle - mean_oracle * mean_oracle;
            const auto mean10 = conditional_mean_z(t, 0.1, zF, T, p, 10);
            const auto var10 = conditional_var_z(t, 0.1, zF, T, p, 10);
            // Truncation error of an asymptotic series ~ first omitted term.
            const double mean_tail = std::abs(conditional_mean_z(t, 0.1, zF, T, p, 11).value -
                                              mean10.value);
            const double var_tail =
                std::abs(conditional_var_z(t, 0.1, zF, T, p, 11).value - var10.value);
            CHECK(std::abs(mean10.value - mean_oracle) < 5.0 * mean_tail + 1e-9);
            CHECK(std::abs(var10.value - var_oracle) < 5.0 * var_tail + 1e-9);
            const auto mean2 = conditional_mean_z(t, 0.1, zF, T, p, 2);
            CHECK(std::abs(mean10.value - mean_oracle) <=
                  std::abs(mean2.value - mean_oracle) + 1e-12);
        }
    }
}

TEST_CASE("conditional_var_z: pinned ends, midpoint peak, first-order form") {
    const auto p = qnd();
    const double T = 0.6;
    for (int order : {1, 3, 5}) {
        CHECK(conditional_var_z(0.0, 0.0, 0.5, T, p, order).value == doctest::Approx(0.0));
        CHECK(conditional_var_z(T, 0.0, 0.5, T, p, order).value == doctest::Approx(0.0));
    }
    // z_I = z_F = 0: first order gives exactly A = T/(4 tau_m) at t = T/2.
    CHECK(conditional_var_z(T / 2.0, 0.0, 0.0, T, p, 1).value ==
          doctest::Approx(T / (4.0 * p.tau_m)).epsilon(1e-13));
    const double vm = conditional_var_z(T / 2.0, 0.0, 0.0, T, p, 1).value;
    CHECK(conditional_var_z(T / 4.0, 0.0, 0.0, T, p, 1).value < vm);
    CHECK(conditional_var_z(3.0 * T / 4.0, 0.0, 0.0, T, p, 1).value < vm);
}

TEST_CASE("conditional series: ratio-test warning on the asymptotic tail") {
    const auto p = qnd();
    // Large fluctuation variance A makes the (asymptotic) series blow up.
    const auto res = conditional_mean_z(4.0, 0.0, 0.5, 8.0, p, 12);
    CHECK(res.truncation_warning);
    const auto ok = conditional_mean_z(0.05, 0.0, 0.5, 0.3, p, 4);
    CHECK(!ok.truncation_warning);
}

TEST_CASE("conditional_zz_corr: zero at t_j = 0, linear in t_k, symmetric") {
    const auto p = qnd();
    const double T = 0.6;
    CHECK(conditional_zz_corr(0.0, 0.3, 0.0, 0.5, T, p) == doctest::Approx(0.0));
    CHECK(conditional_zz_corr(0.2, T, 0.0, 0.5, T, p) == doctest::Approx(0.0));
    const double tj = 0.12;
    const double c1 = conditional_zz_corr(tj, 0.3, 0.0, 0.0, T, p);
    const double c2 = conditional_zz_corr(tj, 0.4, 0.0, 0.0, T, p);
    const double c3 = conditional_zz_corr(tj, 0.5, 0.0, 0.0, T, p);
    CHECK(c1 > c2);
    CHECK(c2 > c3);
    CHECK((c1 - c2) == doctest::Approx(c2 - c3).epsilon(1e-10));
    CHECK(conditional_zz_corr(0.4, 0.1, 0.0, 0.5, T, p) ==
          doctest::Approx(conditional_zz_corr(0.1, 0.4, 0.0, 0.5, T, p)));
}

TEST_CASE("postselect: tolerance >= 2 reproduces unconditioned statistics") {
    const auto p = qnd();
    EnsembleOptions opts;
    opts.sim = SimOptions::for_scheme(UpdateScheme::exact_operator());
    const auto grid = CheckpointGrid::uniform(p.n_steps, 6);
    const auto ens =
        simulate_ensemble(5000, BlochState{0, 0, 0}, p, FeedbackSpec::none(), 17, grid, opts);
    const auto uncond = ensemble_z_stats(ens);
    const auto all = postselect(ens, Postselection{0.0, 2.5}, p);
    CHECK(all.acceptance_fraction == 1.0);
    for (std::size_t c = 0; c < grid.steps.size(); ++c) {
        CHECK(all.mean[c] == doctest::Approx(uncond.mean[c]).epsilon(1e-12));
        CHECK(all.var[c] == doctest::Approx(uncond.var[c]).epsilon(1e-12));
    }
}

TEST_CASE("postselect: acceptance fraction matches the quadrature of the final-state pdf") {
    const auto p = qnd();
    EnsembleOptions opts;
    opts.sim = SimOptions::for_scheme(UpdateScheme::exact_operator());
    CheckpointGrid grid;
    grid.steps = {0, p.n_steps / 2, p.n_steps};
    const std::size_t n = 200000;
    const auto ens =
        simulate_ensemble(n, BlochState{0, 0, 0}, p, FeedbackSpec::none(), 19, grid, opts);
    const double zF = std::cos(M_PI / 4.0);
    const Postselection sel{zF, 0.02};
    const auto stats = postselect(ens, sel, p);
    const double predicted = oracles::integrate(
        [&](double z) { return final_state_pdf(z, 0.0, p.total_time(), p); },
        zF - sel.tolerance, zF + sel.tolerance, 1e-10);
    const double se = std::sqrt(predicted * (1.0 - predicted) / static_cast<double>(n));
    CHECK(std::abs(stats.acceptance_fraction - predicted) < 3.0 * se + 1e-4);
}

TEST_CASE("postselect: shrinking tolerance converges toward the analytic mean") {
    const auto p = qnd();
    EnsembleOptions opts;
    opts.sim = SimOptions::for_scheme(UpdateScheme::exact_operator());
    const auto grid = CheckpointGrid::uniform(p.n_steps, 11);
    const auto ens = simulate_ensemble(200000, BlochState{0, 0, 0}, p, FeedbackSpec::none(), 23,
                                       grid, opts);
    const double zF = std::cos(M_PI / 4.0);
    const double T = p.total_time();
    auto iae = [&](double tol) {
        const auto stats = postselect(ens, Postselection{zF, tol}, p);
        double acc = 0.0;
        for (std::size_t c = 0; c < stats.times.size(); ++c)
            acc += std::abs(stats.mean[c] -
                            conditional_mean_z(stats.times[c], 0.0, zF, T, p, 1).value);
        return acc;
    };
    CHECK(iae(0.02) < iae(0.08));
}

TEST_CASE("postselect: empty window raises EmptySelectionError") {
    const auto p = qnd();
    EnsembleOptions opts;
    opts.sim = SimOptions::for_scheme(UpdateScheme::exact_operator());
    CheckpointGrid grid;
    grid.steps = {p.n_steps};
    const auto ens =
        simulate_ensemble(50, BlochState{0, 0, 0}, p, FeedbackSpec::none(), 29, grid, opts);
    CHECK_THROWS_AS(postselect(ens, Postselection{0.9999 - 1e-4, 1e-9}, p),
                    EmptySelectionError);
}

TEST_CASE("action decomposition: optimal path, random perturbations, positivity") {
    const auto p = qnd(0.01, 60);
    const double zI = 0.1;
    const double zF = 0.55;
    const double T = p.dt * 60;

    std::vector<double> opt_path;
    for (std::size_t k = 0; k <= 60; ++k)
        opt_path.push_back(std::tanh(optimal_path_u(zI, zF, T, k * p.dt)));
    const auto on_opt = action_decomposition_check(opt_path, zI, zF, p);
    CHECK(on_opt.quad_residual == doctest::Approx(0.0));
    CHECK(on_opt.s_full == doctest::Approx(on_opt.s_opt));

    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> path(61);
        for (std::size_t k = 0; k <= 60; ++k) {
            double u = optimal_path_u(zI, zF, T, k * p.dt);
            if (k != 0 && k != 60) u += noise(rng);
            path[k] = std::tanh(u);
        }
        const auto dec = action_decomposition_check(path, zI, zF, p);  // asserts internally
        CHECK(dec.quad_residual >= 0.0);
        const double lhs = dec.s_full;
        const double rhs = dec.s_opt - dec.quad_residual;
        CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
    }

    std::vector<double> bad(61, 0.2);
    CHECK_THROWS_AS(action_decomposition_check(bad, zI, zF, p), EndpointMismatchError);
}
