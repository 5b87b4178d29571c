#pragma once

// mlp.hpp — most-likely-path machinery for the direct-linear-feedback qubit on
// the great circle z = cos(theta), y = sin(theta): the extremal ODE system,
// its conserved stochastic Hamiltonian, constant-energy phase portraits,
// attractor angles, a shooting solver for the boundary-value problem, and the
// discrete extremal difference step used to verify the continuum solver.

#include <optional>
#include <vector>

#include "qpath/model.hpp"
#include "qpath/trajectory.hpp"

namespace qpath {

struct PhasePoint {
    double theta{0.0};
    double p_theta{0.0};
};

struct ExtremalRates {
    double theta_dot{0.0};
    double p_theta_dot{0.0};
    double r{0.0};  // stationary readout
};

// r = p Delta1 tau_m - p sin(theta) + cos(theta),
// theta_dot = Delta0 + Delta1 r - r sin(theta)/tau_m,
// p_dot     = p r cos(theta)/tau_m + r sin(theta)/tau_m.
// Requires direct-linear feedback.
ExtremalRates extremal_rhs(const PhasePoint& p, const ModelParams& params,
                           const FeedbackSpec& fb);

// H = (p Delta1 tau_m + cos(theta) - p sin(theta))^2 / (2 tau_m)
//     + p Delta0 - 1/(2 tau_m); conserved along extremal solutions.
double stochastic_hamiltonian(const PhasePoint& p, const ModelParams& params,
                              const FeedbackSpec& fb);

// Critical stochastic energy -1/(2 tau_m): below it no real portrait curve
// exists (for Delta0 = 0).
double critical_energy(const ModelParams& params);

struct PortraitCurve {
    double E{0.0};
    int branch_sign{+1};
    // Contiguous segments of the curve, split at the poles sin(theta) =
    // Delta1 tau_m (the attractor lines).
    std::vector<std::vector<PhasePoint>> segments;
    std::vector<double> poles;
};

// p(theta, E) = (-cos(theta) + sign * sqrt(1 + 2 E tau_m)) / (Delta1 tau_m - sin(theta))
// sampled over [theta_min, theta_max]; requires Delta0 = 0 and E >= E_c.
PortraitCurve portrait_curve(double E, const ModelParams& params, const FeedbackSpec& fb,
                             int branch_sign, std::size_t n_theta = 2048,
                             double theta_min = 0.0, double theta_max = 2.0 * M_PI);

// Stabilized angles in [0, 2 pi) for Delta0 = 0: sin(theta) = Delta1 tau_m.
// |Delta1 tau_m| > 1 yields an empty list (no attractors), = 1 the single
// coalesced angle.
std::vector<double> attractors(const ModelParams& params, const FeedbackSpec& fb);

struct MlpBoundary {
    double theta_initial{0.0};
    std::optional<double> theta_final;  // set exactly one of these two
    bool p_final_zero{false};
    double T{1.0};
};

struct MlpSolution {
    std::vector<double> t;
    std::vector<double> theta;
    std::vector<double> p_theta;
    std::vector<double> r;
    double p0{0.0};
    double energy{0.0};
    double energy_drift{0.0};    // max relative drift of H along the path
    double log_likelihood{0.0};  // integral of -(r^2 - 2 r cos(theta) + 1)/(2 tau_m)
    int branch_id{0};
};

struct MlpScan {
    double p0_min{-10.0};
    double p0_max{10.0};
    std::size_t n_scan{400};
    double abs_tol{1e-9};
    double rel_tol{1e-9};
    std::size_t n_output{512};
};

struct MlpResult {
    std::vector<MlpSolution> branches;  // sorted by log-likelihood, best first
    // (p0, residual) landscape from the scan, for diagnosing empty results.
    std::vector<std::pair<double, double>> residual_scan;
};

// Shooting over p_theta(0): integrates the extremal system with an adaptive
// Dormand-Prince 5(4) pair, brackets every sign change of the boundary
// residual on the scan grid, refines by bisection, and deduplicates branches
// by energy.  theta is kept unwrapped during integration.
MlpResult solve_mlp(const MlpBoundary& boundary, const ModelParams& params,
                    const FeedbackSpec& fb, const MlpScan& scan = {});

struct DiscreteExtremalResult {
    double q_next{0.0};
    double p_prev{0.0};
    double r_residual{0.0};  // stationarity defect p (1 - q_next^2) - (r - q)
};

// One step of the discrete extremal difference system for the plain-measurement
// z coordinate: forward map q -> tanh(atanh q + r dt/tau_m), backward map for
// the conjugate variable, and the readout stationarity residual.
DiscreteExtremalResult discrete_extremal_step(double q, double p, double r,
                                              const ModelParams& params);

} // namespace qpath
