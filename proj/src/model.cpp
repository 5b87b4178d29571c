#include "qpath/model.hpp"

#include <cmath>

namespace qpath {

DiagonalFrame eigensystem(const ModelParams& params) {
    params.validate();
    const double g = params.total_dephasing();
    const double d = params.delta;

    const double disc = g * g - 4.0 * d * d;
    const double scale = std::max(g * g, 4.0 * d * d);
    if (std::abs(disc) <= 1e-12 * scale)
        throw DegenerateEigenvalueError("eigensystem: Gamma = 2*delta makes Omega = 0");

    DiagonalFrame f;
    f.gamma_total = g;
    f.delta = d;
    f.omega = std::sqrt(cplx(disc, 0.0));
    f.lambda1 = cplx(-g, 0.0);
    f.lambda2 = -(g + f.omega) / 2.0;
    f.lambda3 = -(g - f.omega) / 2.0;
    f.alpha = -1.0 / std::sqrt(params.tau_m);

    const double sqrt_tm = std::sqrt(params.tau_m);
    f.kappa1 = cplx(0.0, 0.0);
    f.kappa2 = (-g + f.omega) / (2.0 * sqrt_tm * f.omega);
    f.kappa3 = (g + f.omega) / (2.0 * sqrt_tm * f.omega);

    if (d != 0.0) {
        f.beta1_ = (g + f.omega) / (2.0 * d);
        f.beta2_ = (g - f.omega) / (2.0 * d);
        f.has_beta_ = true;
    }
    return f;
}

std::array<cplx, 3> to_diagonal(const BlochState& state, const DiagonalFrame& frame,
                                const ModelParams& params) {
    if (params.delta == 0.0)
        throw FrameDegenerateError("to_diagonal: transform undefined for delta = 0");
    const double g = frame.gamma_total;
    const cplx om = frame.omega;
    const double d = params.delta;

    const cplx u = state.x;
    const cplx v = (2.0 * state.y * d - g * state.z + om * state.z) / (2.0 * om);
    const cplx w = (-2.0 * state.y * d + g * state.z + om * state.z) / (2.0 * om);
    return {u, v, w};
}

BlochState from_diagonal(cplx u, cplx v, cplx w, const DiagonalFrame& frame) {
    const cplx x = u;
    const cplx y = frame.beta1() * v + frame.beta2() * w;
    const cplx z = v + w;

    const double imag = std::max({std::abs(x.imag()), std::abs(y.imag()), std::abs(z.imag())});
    if (imag > kImagTol)
        throw NumericalConsistencyError("from_diagonal: residual imaginary part " +
                                        std::to_string(imag));
    return BlochState{x.real(), y.real(), z.real()};
}

} // namespace qpath
