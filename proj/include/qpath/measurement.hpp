#pragma once

// measurement.hpp — readout probability model, readout sampling, the state
// update schemes (exact operator composition, Stratonovich delta-t expansion,
// Ito white-noise), and the action density.
//
// All updates act on the Bloch 3-vector directly; the 2x2 Kraus/unitary/
// dephasing maps have exact Bloch-space expressions which are folded in here.

#include <cstddef>

#include "qpath/model.hpp"
#include "qpath/rng.hpp"

namespace qpath {

// Time-averaged detector output over one dt.  Typical magnitude is
// (tau_m/dt)^{1/2}.
struct Readout {
    double r{0.0};
};

struct UpdateScheme {
    enum class Kind { ExactOperator, Stratonovich, Ito, SplitOperator };

    Kind kind{Kind::ExactOperator};
    int pieces{10};  // split-operator interleave count

    static UpdateScheme exact_operator() { return {Kind::ExactOperator, 1}; }
    static UpdateScheme stratonovich() { return {Kind::Stratonovich, 1}; }
    static UpdateScheme ito() { return {Kind::Ito, 1}; }
    static UpdateScheme split_operator(int m = 10) {
        if (m < 1) throw ConfigError("split-operator: pieces must be >= 1");
        return {Kind::SplitOperator, m};
    }

    const char* name() const noexcept {
        switch (kind) {
            case Kind::ExactOperator: return "exact-operator";
            case Kind::Stratonovich: return "stratonovich";
            case Kind::Ito: return "ito";
            case Kind::SplitOperator: return "split-operator";
        }
        return "?";
    }
};

// P(r|z): two-Gaussian mixture
//   (dt/2 pi tau_m)^{1/2} [ e^{-dt (r-1)^2 / 2 tau_m} (1+z)/2
//                         + e^{-dt (r+1)^2 / 2 tau_m} (1-z)/2 ].
double readout_pdf(double r, double z, const ModelParams& params);

// Draw the branch s = +1 with probability (1+z)/2, else s = -1, then a
// Gaussian of mean s and variance tau_m/dt.
double sample_readout(double z, const ModelParams& params, Rng& rng);

// White-noise readout r = z + sqrt(tau_m) * xi with xi ~ N(0, 1/dt).  This is
// the broad-detector approximation used by the Ito scheme; never substituted
// silently for the exact mixture.
double sample_readout_white_noise(double z, const ModelParams& params, Rng& rng);

// rho_{k+1} = O_gamma U_dt M_r [rho_k], with
//   M_r   Gaussian measurement operator (Kraus form, renormalized),
//   U_dt  unitary for H = (epsilon/2) sigma_z - (delta_eff/2) sigma_x,
//   O_gamma extra dephasing e^{-gamma dt} on x, y.
// For scheme = split-operator(m), M and U are each divided into m pieces and
// applied alternately (measurement piece first), then O_gamma once.
BlochState update_exact(const BlochState& state, double r, const ModelParams& params,
                        double delta_eff, const UpdateScheme& scheme);

constexpr double kClipTol = 1e-6;

// One Euler-Maruyama step of
//   dx = -Gamma x dt - x z xi dt / sqrt(tau_m)
//   dy = -Gamma y dt + delta z dt - y z xi dt / sqrt(tau_m)
//   dz = -delta y dt + (1 - z^2) xi dt / sqrt(tau_m)
// with xi drawn from a Gaussian of variance 1/dt.  Overshoot outside the unit
// ball below clip_tol is clipped back to the sphere; beyond it, StepSizeError.
// Note the inherent Euler overshoot from a pure state is O(dt/tau_m) per step,
// so callers stepping on the sphere must scale clip_tol accordingly.
BlochState update_ito(const BlochState& state, double xi, const ModelParams& params,
                      double delta_eff, double clip_tol = kClipTol);

// One explicit Euler step of the delta-t expansion driven by the readout r:
//   dx = (-gamma x - epsilon y - x z r / tau_m) dt
//   dy = (-gamma y + epsilon x + delta z - y z r / tau_m) dt
//   dz = (-delta y + (1 - z^2) r / tau_m) dt
// Same clipping contract as update_ito.
BlochState update_stratonovich(const BlochState& state, double r, const ModelParams& params,
                               double delta_eff, double clip_tol = kClipTol);

// Log-likelihood density increment F dt = -dt (r^2 - 2 r z + 1) / (2 tau_m).
inline double action_increment(const BlochState& state, double r, const ModelParams& params) {
    return -params.dt * (r * r - 2.0 * r * state.z + 1.0) / (2.0 * params.tau_m);
}

} // namespace qpath
