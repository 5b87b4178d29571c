#include "qpath/trajectory.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace qpath {

namespace {

double wrap_to_pi(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
}

unsigned resolve_workers(unsigned requested) {
    if (requested != 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

struct StepContext {
    double theta_unwrapped{0.0};
    double theta_raw{0.0};
};

double effective_delta(const FeedbackSpec& fb, const ModelParams& params, double r,
                       const StepContext& ctx, double t) {
    switch (fb.kind) {
        case FeedbackSpec::Kind::None:
            return params.delta;
        case FeedbackSpec::Kind::DirectLinear:
            return fb.delta0 + fb.delta1 * r;
        case FeedbackSpec::Kind::PhaseLock: {
            const double dtheta = ctx.theta_unwrapped - fb.delta_d * t;
            return fb.delta_d * (1.0 - fb.F * dtheta);
        }
    }
    return params.delta;
}

} // namespace

Trajectory simulate_one(const BlochState& initial, const ModelParams& params,
                        const FeedbackSpec& fb, const SimOptions& opts, std::uint64_t seed) {
    params.validate();
    opts.validate();
    if (!initial.physical())
        throw UnphysicalStateError("simulate_one: initial state outside the Bloch ball");

    const std::size_t n = params.n_steps;
    Trajectory traj;
    traj.states.resize(n + 1);
    traj.readouts.resize(n);
    traj.seed = seed;
    traj.scheme = opts.scheme;
    traj.dt = params.dt;
    traj.states[0] = initial;

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double sigma = std::sqrt(params.tau_m / params.dt);
    const bool ito = opts.scheme.kind == UpdateScheme::Kind::Ito;
    // Euler steps from pure states overshoot the ball by O(dt/tau_m) per step
    // (noise-squared terms); the clip threshold must sit above that scale.
    const double clip_tol = std::max(kClipTol, 32.0 * params.dt / params.tau_m);

    StepContext ctx;
    ctx.theta_raw = std::atan2(initial.y, initial.z);
    ctx.theta_unwrapped = ctx.theta_raw;

    for (std::size_t k = 0; k < n; ++k) {
        const BlochState& q = traj.states[k];
        double r = 0.0;
        double xi = 0.0;
        if (ito) {
            xi = normal(rng) / std::sqrt(params.dt);
            r = q.z + std::sqrt(params.tau_m) * xi;
        } else {
            const double s = (unif(rng) < (1.0 + q.z) / 2.0) ? 1.0 : -1.0;
            r = s + sigma * normal(rng);
        }
        traj.readouts[k] = r;

        const double t_k = static_cast<double>(k) * params.dt;
        const double delta_eff = effective_delta(fb, params, r, ctx, t_k);

        try {
            switch (opts.scheme.kind) {
                case UpdateScheme::Kind::ExactOperator:
                case UpdateScheme::Kind::SplitOperator:
                    traj.states[k + 1] = update_exact(q, r, params, delta_eff, opts.scheme);
                    break;
                case UpdateScheme::Kind::Stratonovich:
                    traj.states[k + 1] = update_stratonovich(q, r, params, delta_eff, clip_tol);
                    break;
                case UpdateScheme::Kind::Ito:
                    traj.states[k + 1] = update_ito(q, xi, params, delta_eff, clip_tol);
                    break;
            }
        } catch (const StepSizeError& e) {
            throw StepSizeError("step " + std::to_string(k) + ": " + e.what());
        } catch (const UnderflowError& e) {
            throw UnderflowError("step " + std::to_string(k) + ": " + e.what());
        }

        if (fb.kind == FeedbackSpec::Kind::PhaseLock) {
            const double raw = std::atan2(traj.states[k + 1].y, traj.states[k + 1].z);
            ctx.theta_unwrapped += wrap_to_pi(raw - ctx.theta_raw);
            ctx.theta_raw = raw;
        }
    }
    return traj;
}

CheckpointGrid CheckpointGrid::uniform(std::size_t n_steps, std::size_t count) {
    CheckpointGrid g;
    if (count == 0) return g;
    if (count == 1) {
        g.steps.push_back(n_steps);
        return g;
    }
    g.steps.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t s = (i * n_steps) / (count - 1);
        if (g.steps.empty() || g.steps.back() != s) g.steps.push_back(s);
    }
    return g;
}

CheckpointGrid CheckpointGrid::every(std::size_t n_steps, std::size_t stride) {
    CheckpointGrid g;
    if (stride == 0) stride = 1;
    for (std::size_t s = 0; s <= n_steps; s += stride) g.steps.push_back(s);
    if (g.steps.back() != n_steps) g.steps.push_back(n_steps);
    return g;
}

std::vector<double> CheckpointGrid::times(const ModelParams& params) const {
    std::vector<double> t;
    t.reserve(steps.size());
    for (auto s : steps) t.push_back(static_cast<double>(s) * params.dt);
    return t;
}

EnsembleResult simulate_ensemble(std::size_t n_traj, const BlochState& initial,
                                 const ModelParams& params, const FeedbackSpec& fb,
                                 std::uint64_t master_seed, const CheckpointGrid& grid,
                                 const EnsembleOptions& opts) {
    if (n_traj == 0) throw ConfigError("simulate_ensemble: n_traj must be >= 1");
    const std::size_t n_ck = grid.steps.size();
    const std::size_t bytes = n_traj * (n_ck * sizeof(double) + sizeof(BlochState));
    if (bytes > opts.memory_budget_bytes)
        throw ResourceLimitError(
            "ensemble checkpoint storage (" + std::to_string(bytes) +
            " bytes) exceeds the memory budget; use the trajectory dump sink or coarsen "
            "the checkpoint grid");

    EnsembleResult res;
    res.grid = grid;
    res.n_traj = n_traj;
    res.master_seed = master_seed;
    res.z.resize(n_traj * n_ck);
    res.final_states.resize(n_traj);

    const unsigned workers = resolve_workers(opts.workers);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto worker_fn = [&]() {
        constexpr std::size_t chunk = 32;
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n_traj || failed.load()) return;
            const std::size_t end = std::min(begin + chunk, n_traj);
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    Trajectory t = simulate_one(initial, params, fb, opts.sim,
                                                trajectory_seed(master_seed, i));
                    for (std::size_t c = 0; c < n_ck; ++c)
                        res.z[i * n_ck + c] = t.states[grid.steps[c]].z;
                    res.final_states[i] = t.states.back();
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true))
                        error_message = "trajectory " + std::to_string(i) + ": " + e.what();
                    return;
                }
            }
        }
    };

    if (workers <= 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw StepSizeError(error_message);
    return res;
}

SeriesStats ensemble_z_stats(const EnsembleResult& ens) {
    const std::size_t n_ck = ens.grid.steps.size();
    const std::size_t n = ens.n_traj;
    SeriesStats s;
    s.mean.assign(n_ck, 0.0);
    s.var.assign(n_ck, 0.0);
    s.stderr_mean.assign(n_ck, 0.0);

    for (std::size_t c = 0; c < n_ck; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += ens.z_at(i, c);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = ens.z_at(i, c) - mean;
            ss += d * d;
        }
        const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
        s.mean[c] = mean;
        s.var[c] = var;
        s.stderr_mean[c] = std::sqrt(var / static_cast<double>(n));
    }
    return s;
}

CovEstimate ensemble_z_cov(const EnsembleResult& ens, std::size_t ck_a, std::size_t ck_b,
                           std::size_t n_batches) {
    const std::size_t n = ens.n_traj;
    if (n < 2) throw ConfigError("ensemble_z_cov: need at least 2 trajectories");
    n_batches = std::min(n_batches, n / 2);
    if (n_batches < 2) n_batches = 2;

    double sa = 0.0, sb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = ens.z_at(i, ck_a);
        const double b = ens.z_at(i, ck_b);
        sa += a;
        sb += b;
        sab += a * b;
    }
    const double nn = static_cast<double>(n);
    const double cov = sab / nn - (sa / nn) * (sb / nn);

    std::vector<double> batch_cov;
    batch_cov.reserve(n_batches);
    const std::size_t per = n / n_batches;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
        const std::size_t lo = bi * per;
        const std::size_t hi = (bi + 1 == n_batches) ? n : lo + per;
        double ba = 0.0, bb = 0.0, bab = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double a = ens.z_at(i, ck_a);
            const double b = ens.z_at(i, ck_b);
            ba += a;
            bb += b;
            bab += a * b;
        }
        const double m = static_cast<double>(hi - lo);
        batch_cov.push_back(bab / m - (ba / m) * (bb / m));
    }
    double bm = 0.0;
    for (double c : batch_cov) bm += c;
    bm /= static_cast<double>(batch_cov.size());
    double bss = 0.0;
    for (double c : batch_cov) bss += (c - bm) * (c - bm);
    const double bvar = bss / static_cast<double>(batch_cov.size() - 1);

    CovEstimate est;
    est.cov = cov;
    est.stderr_cov = std::sqrt(bvar / static_cast<double>(batch_cov.size()));
    return est;
}

namespace {

void write_traj_csv(std::ostream& out, std::size_t index, const Trajectory& t) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# traj %zu seed %llu\n", index,
                  static_cast<unsigned long long>(t.seed));
    out << buf;
    const std::size_t n = t.n_steps();
    for (std::size_t k = 0; k <= n; ++k) {
        const BlochState& q = t.states[k];
        if (k < n)
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", t.time(k), q.x,
                          q.y, q.z, t.readouts[k]);
        else
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,\n", t.time(k), q.x, q.y,
                          q.z);
        out << buf;
    }
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_traj_binary(std::ostream& out, std::size_t index, const Trajectory& t) {
    write_raw<std::uint64_t>(out, index);
    write_raw<std::uint64_t>(out, t.seed);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.n_steps()));
    const std::size_t n = t.n_steps();
    for (std::size_t k = 0; k <= n; ++k) {
        const BlochState& q = t.states[k];
        write_raw<double>(out, t.time(k));
        write_raw<double>(out, q.x);
        write_raw<double>(out, q.y);
        write_raw<double>(out, q.z);
        write_raw<double>(out, k < n ? t.readouts[k] : std::nan(""));
    }
}

} // namespace

void dump_ensemble(std::ostream& out, DumpFormat format, const std::string& header_json,
                   std::size_t n_traj, const BlochState& initial, const ModelParams& params,
                   const FeedbackSpec& fb, const SimOptions& opts, std::uint64_t master_seed,
                   unsigned workers) {
    if (format == DumpFormat::Csv) {
        out << "# qpath-trajectories v1\n";
        out << "# config: " << header_json << "\n";
        out << "# columns: t,x,y,z,r\n";
    } else {
        out.write("QPTRJB1\n", 8);
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(header_json.size()));
        out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
        write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(n_traj));
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_steps));
    }

    const unsigned nw = resolve_workers(workers);
    const std::size_t batch = std::max<std::size_t>(nw * 16, 64);
    std::vector<Trajectory> buf(std::min(batch, n_traj));

    for (std::size_t base = 0; base < n_traj; base += batch) {
        const std::size_t count = std::min(batch, n_traj - base);
        std::atomic<std::size_t> next{0};
        auto fill = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                buf[i] = simulate_one(initial, params, fb, opts,
                                      trajectory_seed(master_seed, base + i));
            }
        };
        if (nw <= 1) {
            fill();
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < nw; ++w) pool.emplace_back(fill);
            for (auto& th : pool) th.join();
        }
        for (std::size_t i = 0; i < count; ++i) {
            if (format == DumpFormat::Csv)
                write_traj_csv(out, base + i, buf[i]);
            else
                write_traj_binary(out, base + i, buf[i]);
        }
    }
}

} // namespace qpath
