#pragma once

// trajectory.hpp — Monte Carlo generation of trajectory ensembles with
// feedback hooks and deterministic per-trajectory seeding.
//
// Trajectory i of an ensemble always uses seed = trajectory_seed(master, i),
// so per-trajectory data is bit-identical for any worker count.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qpath/measurement.hpp"
#include "qpath/model.hpp"

namespace qpath {

struct FeedbackSpec {
    enum class Kind { None, DirectLinear, PhaseLock };

    Kind kind{Kind::None};
    // direct-linear: Delta_eff = delta0 + delta1 * r_k (same-step readout)
    double delta0{0.0};
    double delta1{0.0};
    // phase-lock: Delta_eff = delta_d * (1 - F * (theta - delta_d t))
    double delta_d{0.0};
    double F{0.0};

    static FeedbackSpec none() { return {}; }
    static FeedbackSpec direct_linear(double d0, double d1) {
        FeedbackSpec fb;
        fb.kind = Kind::DirectLinear;
        fb.delta0 = d0;
        fb.delta1 = d1;
        return fb;
    }
    static FeedbackSpec phase_lock(double dd, double f) {
        FeedbackSpec fb;
        fb.kind = Kind::PhaseLock;
        fb.delta_d = dd;
        fb.F = f;
        return fb;
    }
};

// Full time-indexed record of one run: n+1 states, n readouts, replayable
// from (seed, config).
struct Trajectory {
    std::vector<BlochState> states;  // length n+1
    std::vector<double> readouts;    // length n
    std::uint64_t seed{0};
    UpdateScheme scheme{};
    double dt{0.0};

    std::size_t n_steps() const noexcept { return readouts.size(); }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
};

struct SimOptions {
    UpdateScheme scheme{};
    // Required acknowledgment for the Ito scheme: readouts are generated as
    // r = z + sqrt(tau_m) xi instead of the exact mixture.
    bool white_noise_readouts{false};

    static SimOptions for_scheme(const UpdateScheme& s) {
        SimOptions o;
        o.scheme = s;
        o.white_noise_readouts = (s.kind == UpdateScheme::Kind::Ito);
        return o;
    }
    void validate() const {
        if (scheme.kind == UpdateScheme::Kind::Ito && !white_noise_readouts)
            throw ConfigError("ito scheme requires white_noise_readouts = true");
        if (scheme.kind != UpdateScheme::Kind::Ito && white_noise_readouts)
            throw ConfigError("white_noise_readouts is only defined for the ito scheme");
    }
};

Trajectory simulate_one(const BlochState& initial, const ModelParams& params,
                        const FeedbackSpec& fb, const SimOptions& opts, std::uint64_t seed);

// Checkpoint grid: step indices in [0, n_steps] at which z is retained.
struct CheckpointGrid {
    std::vector<std::size_t> steps;

    static CheckpointGrid uniform(std::size_t n_steps, std::size_t count);
    static CheckpointGrid every(std::size_t n_steps, std::size_t stride);
    std::vector<double> times(const ModelParams& params) const;
};

struct EnsembleResult {
    CheckpointGrid grid;
    std::size_t n_traj{0};
    std::uint64_t master_seed{0};
    // Row-major n_traj x grid.steps.size(): z at the checkpoints.
    std::vector<double> z;
    std::vector<BlochState> final_states;

    double z_at(std::size_t traj, std::size_t ck) const {
        return z[traj * grid.steps.size() + ck];
    }
};

struct EnsembleOptions {
    SimOptions sim{};
    unsigned workers{0};  // 0 = hardware concurrency
    std::size_t memory_budget_bytes{512ull * 1024 * 1024};
};

EnsembleResult simulate_ensemble(std::size_t n_traj, const BlochState& initial,
                                 const ModelParams& params, const FeedbackSpec& fb,
                                 std::uint64_t master_seed, const CheckpointGrid& grid,
                                 const EnsembleOptions& opts = {});

// ---- summary statistics over ensemble rows -------------------------------

struct SeriesStats {
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> stderr_mean;
};

// Mean/variance of z at each checkpoint, deterministic accumulation order.
SeriesStats ensemble_z_stats(const EnsembleResult& ens);

// Covariance Cov[z(ck_a) z(ck_b)] with a batch-means standard error.
struct CovEstimate {
    double cov{0.0};
    double stderr_cov{0.0};
};
CovEstimate ensemble_z_cov(const EnsembleResult& ens, std::size_t ck_a, std::size_t ck_b,
                           std::size_t n_batches = 100);

// ---- trajectory dumps -----------------------------------------------------

enum class DumpFormat { Csv, Binary };

// One file per run: a header record with the full config line, then
// per-trajectory blocks of (t, x, y, z, r) rows (r is empty on the final row
// of a block).  The binary variant is raw little-endian with the same layout.
void dump_ensemble(std::ostream& out, DumpFormat format, const std::string& header_json,
                   std::size_t n_traj, const BlochState& initial, const ModelParams& params,
                   const FeedbackSpec& fb, const SimOptions& opts, std::uint64_t master_seed,
                   unsigned workers = 0);

} // namespace qpath
