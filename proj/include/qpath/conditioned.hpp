#pragma once

// conditioned.hpp — pre-/post-selected trajectory statistics for the plain
// measurement case (no Rabi drive): the closed-form optimal path, final-state
// PDF, Gaussian fluctuation moments over the tridiagonal inverse, the
// conditional mean/variance/correlation series, and the matching empirical
// estimators over simulated ensembles.

#include <cstddef>
#include <vector>

#include "qpath/model.hpp"
#include "qpath/trajectory.hpp"

namespace qpath {

// Most likely path in the u = atanh z coordinate:
//   u(t) = (t/T)(atanh z_F - atanh z_I) + atanh z_I.
// The most likely z is tanh of this.
double optimal_path_u(double z_I, double z_F, double T, double t);

// P(z_F | z_I) after time T:
//   sqrt(tau_m / 2 pi T)/(1 - z_F^2)
//     * exp{ -T (rbar^2 + 1)/(2 tau_m) + (1/2) ln[(1 - z_I^2)/(1 - z_F^2)] }
// with rbar = (tau_m/T)(atanh z_F - atanh z_I).
double final_state_pdf(double z_F, double z_I, double T, const ModelParams& params);

// Element (j,k) of the inverse of the (n-1)x(n-1) fluctuation matrix:
//   (dt/tau_m) j (n - k)/n for k >= j, symmetric otherwise.  1 <= j,k <= n-1.
double m_inverse_element(std::size_t j, std::size_t k, std::size_t n,
                         const ModelParams& params);

// Gaussian moment <eta_{j1} ... eta_{j2m}> as the sum over perfect pairings of
// products of inverse-matrix elements.  Odd-size index multisets give 0.
double wick_moment(const std::vector<std::size_t>& indices, std::size_t n,
                   const ModelParams& params);

// Series evaluations carry a non-convergence flag: the underlying expansion is
// asymptotic, so growing terms trigger a truncation warning rather than being
// summed further.
struct SeriesValue {
    double value{0.0};
    bool truncation_warning{false};
    int terms_used{0};
};

// Conditional mean of z at time t given endpoints pinned at z_I (t=0) and z_F
// (t=T).  order = 1 is the first-order (in T/tau_m) closed form
//   tanh(u) - (t/tau_m)(1 - t/T) sech^2(u) tanh(u);
// higher orders extend through eta^{2*order} with analytic tanh derivatives.
SeriesValue conditional_mean_z(double t, double z_I, double z_F, double T,
                               const ModelParams& params, int order = 4);

// Conditional variance, order = 1 gives (t/tau_m)(1 - t/T) sech^4(u).
SeriesValue conditional_var_z(double t, double z_I, double z_F, double T,
                              const ModelParams& params, int order = 4);

// First-order connected two-time correlator (symmetric in its arguments):
//   (t_j/tau_m)(1 - t_k/T) sech^2(u_j) sech^2(u_k) for t_k >= t_j.
double conditional_zz_corr(double t_j, double t_k, double z_I, double z_F, double T,
                           const ModelParams& params);

// ---- empirical side ---------------------------------------------------------

struct Postselection {
    double z_F{0.0};
    double tolerance{0.02};

    void validate() const {
        if (!(std::abs(z_F) < 1.0)) throw ConfigError("postselection: |z_F| must be < 1");
        if (!(tolerance > 0.0)) throw ConfigError("postselection: tolerance must be > 0");
    }
};

struct ConditionedStats {
    std::vector<std::size_t> accepted;    // trajectory indices
    double acceptance_fraction{0.0};
    std::vector<double> times;            // checkpoint times
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> stderr_mean;
    // Connected correlation matrix on the checkpoint grid, row-major.
    std::vector<double> corr;
    std::size_t n_checkpoints{0};

    double corr_at(std::size_t a, std::size_t b) const { return corr[a * n_checkpoints + b]; }
};

// Retain trajectories with |z(T) - z_F| <= tolerance and estimate the
// conditioned statistics on the ensemble's checkpoint grid.  Throws
// EmptySelectionError (with the Eq.-based acceptance estimate in the message)
// when nothing survives.
ConditionedStats postselect(const EnsembleResult& ens, const Postselection& sel,
                            const ModelParams& params);

// ---- action decomposition ---------------------------------------------------

struct ActionDecomposition {
    double s_full{0.0};
    double s_opt{0.0};
    double quad_residual{0.0};  // (tau_m / 2 dt) sum (eta_{k+1} - eta_k)^2, >= 0
};

// Evaluates the u-coordinate action on the piecewise-linear interpolant of the
// given z-path (n+1 points including endpoints z_I, z_F), on the optimal path,
// and the quadratic fluctuation term, asserting
//   S[path] = S[opt] - quad_residual
// to 1e-8 relative.  Endpoints must match z_I/z_F.
ActionDecomposition action_decomposition_check(const std::vector<double>& z_path, double z_I,
                                               double z_F, const ModelParams& params);

} // namespace qpath
