#pragma once

// model.hpp — parameter records, unit conventions, and the transforms between
// Bloch coordinates and the diagonalized (u,v,w) frame.
//
// All rates and times are kept in caller units; there is no hidden tau_m = 1
// normalization anywhere in the library.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

#include "qpath/errors.hpp"

namespace qpath {

using cplx = std::complex<double>;

constexpr double kPhysicalityTol = 1e-9;
constexpr double kImagTol = 1e-9;
constexpr double kRoundTripTol = 1e-12;

// Qubit state as a 3-vector on/inside the Bloch sphere.
struct BlochState {
    double x{0.0};
    double y{0.0};
    double z{0.0};

    double norm2() const noexcept { return x * x + y * y + z * z; }
    bool physical(double tol = kPhysicalityTol) const noexcept { return norm2() <= 1.0 + tol; }
};

// Measurement/Hamiltonian/dephasing rates and the time grid.
//
// tau_m   characteristic measurement time
// dt      step size
// gamma   extra dephasing rate
// epsilon sigma_z Hamiltonian coefficient
// delta   Rabi frequency (sigma_x coefficient, with the -delta/2 sign convention)
struct ModelParams {
    double tau_m{1.0};
    double dt{1e-3};
    double gamma{0.0};
    double epsilon{0.0};
    double delta{0.0};
    std::size_t n_steps{1000};

    double total_time() const noexcept { return static_cast<double>(n_steps) * dt; }

    // Total dephasing rate Gamma = gamma + 1/(2 tau_m).
    double total_dephasing() const noexcept { return gamma + 0.5 / tau_m; }

    // Quantum efficiency eta = 1/(2 tau_m Gamma), in (0, 1] for gamma >= 0.
    double efficiency() const noexcept { return 1.0 / (2.0 * tau_m * total_dephasing()); }

    void validate() const {
        if (!(tau_m > 0.0)) throw ConfigError("ModelParams: tau_m must be > 0");
        if (!(dt > 0.0)) throw ConfigError("ModelParams: dt must be > 0");
        if (n_steps == 0) throw ConfigError("ModelParams: n_steps must be >= 1");
        if (gamma < 0.0) throw ConfigError("ModelParams: gamma must be >= 0 (efficiency would exceed 1)");
    }
};

// Eigen-structure of the linear drift and the couplings of the transformed
// noise terms.  Built by eigensystem(); complex throughout because the
// underdamped regime Gamma < 2*delta makes Omega imaginary.
struct DiagonalFrame {
    cplx lambda1{};
    cplx lambda2{};
    cplx lambda3{};
    cplx omega{};
    double alpha{};  // -1/sqrt(tau_m)
    cplx kappa1{};
    cplx kappa2{};
    cplx kappa3{};

    double gamma_total{};  // Gamma, kept for the inverse transform
    double delta{};

    cplx beta1() const {
        require_beta();
        return beta1_;
    }
    cplx beta2() const {
        require_beta();
        return beta2_;
    }
    bool has_beta() const noexcept { return has_beta_; }

    cplx beta1_{};
    cplx beta2_{};
    bool has_beta_{false};

private:
    void require_beta() const {
        if (!has_beta_)
            throw FrameDegenerateError("DiagonalFrame: beta undefined for delta = 0");
    }
};

// lambda1 = -Gamma, lambda2 = -(Gamma+Omega)/2, lambda3 = -(Gamma-Omega)/2
// with Omega = sqrt(Gamma^2 - 4 delta^2).  Throws DegenerateEigenvalueError
// when Gamma = 2*delta (Omega = 0, kappa_2/kappa_3 singular); callers scanning
// through that point should perturb delta by ~1e-9.
DiagonalFrame eigensystem(const ModelParams& params);

// u = x, v = (2 y delta - Gamma z + Omega z)/(2 Omega),
// w = (-2 y delta + Gamma z + Omega z)/(2 Omega).
// Defined only for delta != 0.
std::array<cplx, 3> to_diagonal(const BlochState& state, const DiagonalFrame& frame,
                                const ModelParams& params);

// x = u, y = beta1 v + beta2 w, z = v + w.  Residual imaginary parts above
// kImagTol raise NumericalConsistencyError.
BlochState from_diagonal(cplx u, cplx v, cplx w, const DiagonalFrame& frame);

} // namespace qpath
