#pragma once

// feedback.hpp — the Rabi-stabilization loop: coarse-grained phase-difference
// dynamics over one oscillation period, the analytic correlation function
// K_z(tau), and its estimate from full trajectory simulation.

#include <vector>

#include "qpath/model.hpp"
#include "qpath/rng.hpp"
#include "qpath/trajectory.hpp"

namespace qpath {

struct PhaseLockConfig {
    double delta_d{20.0};  // target oscillation frequency
    double F{0.3};         // dimensionless feedback factor

    double coarse_dt() const noexcept { return 2.0 * M_PI / delta_d; }

    void validate() const {
        if (!(delta_d > 0.0)) throw ConfigError("phase-lock: delta_d must be > 0");
        if (F * delta_d < 0.0) throw ConfigError("phase-lock: F delta_d must be >= 0");
    }
};

// One Euler-Maruyama step of the coarse-grained phase difference over one
// oscillation period dt~ = 2 pi / delta_d:
//   d(dtheta) = -F delta_d dtheta dt~ + xi~ dt~,  Var[xi~] = 1/(2 tau_m dt~).
double coarse_grained_step(double delta_theta, const PhaseLockConfig& cfg,
                           const ModelParams& params, Rng& rng);

// K_z(tau) = (cos(delta_d tau)/2) exp{ (e^{-F delta_d tau} - 1)/(4 tau_m F delta_d) }.
// The F -> 0 limit (cos(delta_d tau)/2) e^{-tau/(4 tau_m)} is returned
// analytically instead of dividing by zero.
double kz_analytic(double tau, const PhaseLockConfig& cfg, const ModelParams& params);

// tau -> infinity envelope amplitude (1/2) e^{-1/(4 tau_m F delta_d)}.
double kz_envelope_limit(const PhaseLockConfig& cfg, const ModelParams& params);

struct KzEstimate {
    std::vector<double> tau;
    std::vector<double> value;
    std::vector<double> stderr_value;  // leave-one-trajectory-out jackknife
};

// Time-and-ensemble averaged <z(t) z(t+tau)> on a tau grid given in steps of
// the ensemble's dense checkpoint grid.  The first burn_in_steps checkpoints
// are discarded; the ensemble must have been generated with phase-lock
// feedback on a stride-1 checkpoint grid.
KzEstimate kz_empirical(const EnsembleResult& ens, const ModelParams& params,
                        const std::vector<std::size_t>& tau_steps, std::size_t burn_in_steps);

} // namespace qpath
