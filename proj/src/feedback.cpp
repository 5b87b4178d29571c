#include "qpath/feedback.hpp"

#include <cmath>

namespace qpath {

double coarse_grained_step(double delta_theta, const PhaseLockConfig& cfg,
                           const ModelParams& params, Rng& rng) {
    cfg.validate();
    const double dt = cfg.coarse_dt();
    std::normal_distribution<double> normal(0.0, 1.0);
    const double xi = normal(rng) * std::sqrt(1.0 / (2.0 * params.tau_m * dt));
    return delta_theta + dt * (-cfg.F * cfg.delta_d * delta_theta + xi);
}

double kz_analytic(double tau, const PhaseLockConfig& cfg, const ModelParams& params) {
    if (tau < 0.0) throw ConfigError("kz_analytic: tau must be >= 0");
    const double carrier = 0.5 * std::cos(cfg.delta_d * tau);
    const double k = cfg.F * cfg.delta_d;
    if (k == 0.0) return carrier * std::exp(-tau / (4.0 * params.tau_m));
    const double exponent = std::expm1(-k * tau) / (4.0 * params.tau_m * k);
    return carrier * std::exp(exponent);
}

double kz_envelope_limit(const PhaseLockConfig& cfg, const ModelParams& params) {
    const double k = cfg.F * cfg.delta_d;
    if (k == 0.0) return 0.0;
    return 0.5 * std::exp(-1.0 / (4.0 * params.tau_m * k));
}

KzEstimate kz_empirical(const EnsembleResult& ens, const ModelParams& params,
                        const std::vector<std::size_t>& tau_steps, std::size_t burn_in_steps) {
    const std::size_t n_ck = ens.grid.steps.size();
    if (n_ck < 2) throw ConfigError("kz_empirical: ensemble grid too small");
    for (std::size_t c = 0; c + 1 < n_ck; ++c)
        if (ens.grid.steps[c + 1] != ens.grid.steps[c] + 1)
            throw ConfigError("kz_empirical: requires a stride-1 checkpoint grid");
    if (burn_in_steps >= n_ck)
        throw ConfigError("kz_empirical: burn-in exceeds the run length");

    const std::size_t n_traj = ens.n_traj;
    KzEstimate out;
    out.tau.reserve(tau_steps.size());
    out.value.reserve(tau_steps.size());
    out.stderr_value.reserve(tau_steps.size());

    for (std::size_t lag : tau_steps) {
        if (burn_in_steps + lag >= n_ck)
            throw ConfigError("kz_empirical: lag exceeds the sampled window");
        const std::size_t t_count = n_ck - lag - burn_in_steps;

        // Per-trajectory time averages, then a jackknife over trajectories.
        std::vector<double> per_traj(n_traj, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < n_traj; ++i) {
            double acc = 0.0;
            for (std::size_t c = burn_in_steps; c + lag < n_ck; ++c)
                acc += ens.z_at(i, c) * ens.z_at(i, c + lag);
            per_traj[i] = acc / static_cast<double>(t_count);
            total += per_traj[i];
        }
        const double mean = total / static_cast<double>(n_traj);
        double jk = 0.0;
        for (std::size_t i = 0; i < n_traj; ++i) {
            const double loo = (total - per_traj[i]) / static_cast<double>(n_traj - 1);
            jk += (loo - mean) * (loo - mean);
        }
        const double se = std::sqrt(jk * static_cast<double>(n_traj - 1) /
                                    static_cast<double>(n_traj));

        out.tau.push_back(static_cast<double>(lag) * params.dt);
        out.value.push_back(mean);
        out.stderr_value.push_back(se);
    }
    return out;
}

} // namespace qpath
