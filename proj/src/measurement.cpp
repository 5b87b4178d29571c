#include "qpath/measurement.hpp"

#include <cmath>
#include <string>

namespace qpath {

namespace {

void check_z(double z) {
    if (std::abs(z) > 1.0 + kPhysicalityTol)
        throw UnphysicalStateError("readout model: |z| > 1 (z = " + std::to_string(z) + ")");
}

// Gaussian measurement back-action over an interval with exponent a = r*h/tau_m:
//   z -> (z cosh a + sinh a)/(cosh a + z sinh a),  x,y -> x,y/(cosh a + z sinh a).
// Written against the dominant Gaussian branch so large |a| cannot overflow.
BlochState measurement_kraus(const BlochState& q, double a) {
    const double abs_a = std::abs(a);
    const double b = std::exp(-2.0 * abs_a);
    const double hi = (a >= 0.0 ? 1.0 + q.z : 1.0 - q.z) / 2.0;
    const double lo = (a >= 0.0 ? 1.0 - q.z : 1.0 + q.z) / 2.0;
    if (hi == 0.0) {
        // Pinned at the disfavored pointer state; trace = e^{-|a|}.
        if (abs_a > 690.0)
            throw UnderflowError("measurement operator: norm collapse (trace below 1e-300)");
        return q;
    }
    const double denom = hi + b * lo;  // = (cosh a + z sinh a) e^{-|a|}
    if (denom <= 0.0 || abs_a + std::log(denom) < -690.0)
        throw UnderflowError("measurement operator: norm collapse (trace below 1e-300)");
    const double scale = std::exp(-abs_a) / denom;
    const double zp = (a >= 0.0 ? hi - b * lo : b * lo - hi) / denom;
    return BlochState{q.x * scale, q.y * scale, zp};
}

// Bloch rotation for H = (epsilon/2) sigma_z - (delta/2) sigma_x over time h:
// precession q' = R(axis, |h_vec| h) q with h_vec = (-delta, 0, epsilon).
BlochState unitary_rotation(const BlochState& q, double delta_eff, double epsilon, double h) {
    const double hx = -delta_eff;
    const double hz = epsilon;
    const double mag = std::hypot(hx, hz);
    if (mag == 0.0) return q;
    const double angle = mag * h;
    const double nx = hx / mag;
    const double nz = hz / mag;
    const double c = std::cos(angle);
    const double s = std::sin(angle);

    // Rodrigues with axis (nx, 0, nz)
    const double dot = nx * q.x + nz * q.z;
    BlochState out;
    out.x = q.x * c + (-nz * q.y) * s + nx * dot * (1.0 - c);
    out.y = q.y * c + (nz * q.x - nx * q.z) * s;
    out.z = q.z * c + (nx * q.y) * s + nz * dot * (1.0 - c);
    return out;
}

BlochState dephase(const BlochState& q, double gamma, double h) {
    if (gamma == 0.0) return q;
    const double f = std::exp(-gamma * h);
    return BlochState{q.x * f, q.y * f, q.z};
}

BlochState clip_or_throw(BlochState q, double clip_tol) {
    const double n = std::sqrt(q.norm2());
    if (n <= 1.0) return q;
    if (n - 1.0 < clip_tol) {
        q.x /= n;
        q.y /= n;
        q.z /= n;
        return q;
    }
    throw StepSizeError("state left the unit ball by " + std::to_string(n - 1.0) +
                        "; reduce dt");
}

} // namespace

double readout_pdf(double r, double z, const ModelParams& params) {
    check_z(z);
    const double dt = params.dt;
    const double tm = params.tau_m;
    const double norm = std::sqrt(dt / (2.0 * M_PI * tm));
    const double gp = std::exp(-dt * (r - 1.0) * (r - 1.0) / (2.0 * tm));
    const double gm = std::exp(-dt * (r + 1.0) * (r + 1.0) / (2.0 * tm));
    return norm * (gp * (1.0 + z) / 2.0 + gm * (1.0 - z) / 2.0);
}

double sample_readout(double z, const ModelParams& params, Rng& rng) {
    check_z(z);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = (unif(rng) < (1.0 + z) / 2.0) ? 1.0 : -1.0;
    return s + std::sqrt(params.tau_m / params.dt) * normal(rng);
}

double sample_readout_white_noise(double z, const ModelParams& params, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double xi = normal(rng) / std::sqrt(params.dt);
    return z + std::sqrt(params.tau_m) * xi;
}

BlochState update_exact(const BlochState& state, double r, const ModelParams& params,
                        double delta_eff, const UpdateScheme& scheme) {
    BlochState q = state;
    if (scheme.kind == UpdateScheme::Kind::SplitOperator) {
        const int m = scheme.pieces;
        const double h = params.dt / m;
        const double a = r * h / params.tau_m;
        for (int i = 0; i < m; ++i) {
            q = measurement_kraus(q, a);
            q = unitary_rotation(q, delta_eff, params.epsilon, h);
        }
    } else {
        q = measurement_kraus(q, r * params.dt / params.tau_m);
        q = unitary_rotation(q, delta_eff, params.epsilon, params.dt);
    }
    return dephase(q, params.gamma, params.dt);
}

BlochState update_ito(const BlochState& state, double xi, const ModelParams& params,
                      double delta_eff, double clip_tol) {
    const double g = params.total_dephasing();
    const double dt = params.dt;
    const double noise = xi * dt / std::sqrt(params.tau_m);
    const BlochState& q = state;

    BlochState out;
    out.x = q.x + (-g * q.x) * dt - q.x * q.z * noise;
    out.y = q.y + (-g * q.y + delta_eff * q.z) * dt - q.y * q.z * noise;
    out.z = q.z + (-delta_eff * q.y) * dt + (1.0 - q.z * q.z) * noise;
    return clip_or_throw(out, clip_tol);
}

BlochState update_stratonovich(const BlochState& state, double r, const ModelParams& params,
                               double delta_eff, double clip_tol) {
    const double dt = params.dt;
    const double tm = params.tau_m;
    const BlochState& q = state;

    BlochState out;
    out.x = q.x + dt * (-params.gamma * q.x - params.epsilon * q.y - q.x * q.z * r / tm);
    out.y = q.y + dt * (-params.gamma * q.y + params.epsilon * q.x + delta_eff * q.z -
                        q.y * q.z * r / tm);
    out.z = q.z + dt * (-delta_eff * q.y + (1.0 - q.z * q.z) * r / tm);
    return clip_or_throw(out, clip_tol);
}

} // namespace qpath
