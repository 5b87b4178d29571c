#include "qpath/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qpath/diagrams.hpp"
#include "qpath/feedback.hpp"
#include "qpath/mlp.hpp"

#ifndef QPATH_VERSION
#define QPATH_VERSION "qpath-dev"
#endif

namespace qpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Writer {
    fs::path dir;
    std::vector<std::string> outputs;

    std::ofstream open(const std::string& name, bool binary = false) {
        fs::create_directories(dir);
        outputs.push_back(name);
        return std::ofstream(dir / name, binary ? std::ios::binary : std::ios::out);
    }
};

} // namespace

RunConfig resolve_defaults(const RunConfig& input) {
    RunConfig cfg = input;
    // Direct-linear feedback rides on the split-operator update unless the
    // user explicitly chose a scheme.
    if (cfg.fb.kind == FeedbackSpec::Kind::DirectLinear && !cfg.ensemble.scheme_explicit) {
        cfg.ensemble.scheme = UpdateScheme::split_operator(10);
        cfg.ensemble.scheme_explicit = true;
    }
    if (cfg.mode == RunMode::FeedbackKz) {
        cfg.fb = FeedbackSpec::phase_lock(cfg.kz.delta_d, cfg.kz.F);
        if (cfg.kz.burn_in <= 0.0 && cfg.kz.F * cfg.kz.delta_d > 0.0)
            cfg.kz.burn_in = 5.0 / (cfg.kz.F * cfg.kz.delta_d);
        if (!cfg.ensemble.scheme_explicit) {
            cfg.ensemble.scheme = UpdateScheme::stratonovich();
            cfg.ensemble.scheme_explicit = true;
        }
    }
    return cfg;
}

namespace {

SimOptions sim_options(const RunConfig& cfg) {
    SimOptions o;
    o.scheme = cfg.ensemble.scheme;
    o.white_noise_readouts = cfg.ensemble.white_noise_readouts;
    return o;
}

void run_simulate(const RunConfig& cfg, Writer& w) {
    for (const auto& format : cfg.output.formats) {
        const bool binary = format == "binary";
        auto out = w.open(binary ? "trajectories.bin" : "trajectories.csv", binary);
        dump_ensemble(out, binary ? DumpFormat::Binary : DumpFormat::Csv, cfg.to_json(),
                      cfg.ensemble.n_traj, cfg.initial, cfg.params, cfg.fb, sim_options(cfg),
                      cfg.ensemble.master_seed, cfg.workers);
    }
}

void run_postselect(const RunConfig& cfg, Writer& w, json& extras) {
    const CheckpointGrid grid = CheckpointGrid::uniform(cfg.params.n_steps, cfg.checkpoint_count);
    EnsembleOptions opts;
    opts.sim = sim_options(cfg);
    opts.workers = cfg.workers;
    const EnsembleResult ens = simulate_ensemble(cfg.ensemble.n_traj, cfg.initial, cfg.params,
                                                 cfg.fb, cfg.ensemble.master_seed, grid, opts);
    const Postselection sel = *cfg.selection;
    const ConditionedStats stats = postselect(ens, sel, cfg.params);

    const double z_I = cfg.initial.z;
    const double T = cfg.params.total_time();

    auto out = w.open("stats.csv");
    out << "t,mean_analytic,mean_empirical,var_analytic,var_empirical,stderr\n";
    for (std::size_t c = 0; c < stats.times.size(); ++c) {
        const double t = stats.times[c];
        const double ma = conditional_mean_z(t, z_I, sel.z_F, T, cfg.params, 1).value;
        const double va = conditional_var_z(t, z_I, sel.z_F, T, cfg.params, 1).value;
        out << fmt(t) << ',' << fmt(ma) << ',' << fmt(stats.mean[c]) << ',' << fmt(va) << ','
            << fmt(stats.var[c]) << ',' << fmt(stats.stderr_mean[c]) << "\n";
    }

    auto corr = w.open("corr_matrix.csv");
    corr << "t";
    for (double t : stats.times) corr << ',' << fmt(t);
    corr << "\n";
    for (std::size_t a = 0; a < stats.times.size(); ++a) {
        corr << fmt(stats.times[a]);
        for (std::size_t b = 0; b < stats.times.size(); ++b)
            corr << ',' << fmt(stats.corr_at(a, b));
        corr << "\n";
    }

    extras["acceptance_fraction"] = stats.acceptance_fraction;
    extras["accepted"] = stats.accepted.size();
    extras["predicted_acceptance"] =
        final_state_pdf(sel.z_F, z_I, T, cfg.params) * 2.0 * sel.tolerance;
}

void run_correlate(const RunConfig& cfg, Writer& w) {
    const double T = cfg.params.total_time();
    std::vector<double> taus = cfg.correlate.tau_grid;
    if (taus.empty())
        for (int i = 0; i <= 16; ++i)
            taus.push_back(0.01 * cfg.params.tau_m * static_cast<double>(i));

    // Optional Monte Carlo cross-estimate on the matching grid.
    std::vector<double> mc_cov, mc_err, mc_var, mc_var_t;
    std::vector<std::size_t> lag_cks;
    const std::size_t base_step =
        static_cast<std::size_t>(std::lround(cfg.correlate.t_base / cfg.params.dt));
    if (cfg.correlate.with_monte_carlo) {
        CheckpointGrid grid;
        grid.steps.push_back(base_step);
        for (double tau : taus) {
            const auto s = base_step + static_cast<std::size_t>(std::lround(tau / cfg.params.dt));
            grid.steps.push_back(std::min<std::size_t>(s, cfg.params.n_steps));
        }
        EnsembleOptions opts;
        opts.sim = sim_options(cfg);
        opts.workers = cfg.workers;
        const EnsembleResult ens = simulate_ensemble(cfg.ensemble.n_traj, cfg.initial,
                                                     cfg.params, cfg.fb,
                                                     cfg.ensemble.master_seed, grid, opts);
        for (std::size_t i = 0; i < taus.size(); ++i) {
            const CovEstimate est = ensemble_z_cov(ens, 0, i + 1);
            mc_cov.push_back(est.cov);
            mc_err.push_back(est.stderr_cov);
        }
    }

    auto out = w.open("correlators.csv");
    out << "tau,t1,t2,cov_analytic,cov_empirical,stderr\n";
    const double t1 = static_cast<double>(base_step) * cfg.params.dt;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double t2 = std::min(t1 + taus[i], T);
        const double analytic = corr_zz(t1, t2, cfg.initial, cfg.params, T) -
                                mean_z(t1, cfg.initial, cfg.params) *
                                    mean_z(t2, cfg.initial, cfg.params);
        out << fmt(taus[i]) << ',' << fmt(t1) << ',' << fmt(t2) << ',' << fmt(analytic) << ',';
        if (!mc_cov.empty())
            out << fmt(mc_cov[i]) << ',' << fmt(mc_err[i]);
        else
            out << ',';
        out << "\n";
    }

    auto var = w.open("variance.csv");
    var << "t,var_tree,mean_tree\n";
    const std::size_t n_pts = 50;
    for (std::size_t i = 1; i <= n_pts; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(n_pts);
        var << fmt(t) << ',' << fmt(variance_tree(t, cfg.initial, cfg.params, T)) << ','
            << fmt(mean_z(t, cfg.initial, cfg.params)) << "\n";
    }
}

void run_diagrams(const RunConfig& cfg, Writer& w) {
    const DiagonalFrame frame = eigensystem(cfg.params);
    const auto init = to_diagonal(cfg.initial, frame, cfg.params);
    const double T = cfg.params.total_time();
    const double t1 = 0.75 * T;
    const double t2 = 0.25 * T;

    auto out = w.open("diagrams.txt");
    auto dump_set = [&](const std::string& title, const std::vector<Ending>& endings) {
        out << "== " << title << " ==\n";
        const auto diagrams = enumerate_tree(endings);
        out << diagrams.size() << " tree-level diagrams\n";
        for (const auto& d : diagrams) {
            out << dump_diagram(d);
            const cplx v = evaluate_diagram(d, frame, init, T);
            out << "  value: " << fmt(v.real()) << (v.imag() < 0 ? "-" : "+")
                << fmt(std::abs(v.imag())) << "i\n";
        }
        out << "\n";
    };
    dump_set("<v(t1)>", {{Flavor::V, t1}});
    dump_set("<v(t1) v(t2)>", {{Flavor::V, t1}, {Flavor::V, t2}});
    dump_set("<v(t1) xi(t2)>", {{Flavor::V, t1}, {Flavor::Xi, t2}});
    dump_set("<w(t1) xi(t2)>", {{Flavor::W, t1}, {Flavor::Xi, t2}});
}

void run_mlp(const RunConfig& cfg, Writer& w, json& extras) {
    MlpBoundary boundary;
    boundary.theta_initial = cfg.mlp.theta_initial;
    boundary.theta_final = cfg.mlp.theta_final;
    boundary.p_final_zero = cfg.mlp.p_final_zero;
    boundary.T = cfg.mlp.T;
    MlpScan scan;
    scan.p0_min = cfg.mlp.p0_min;
    scan.p0_max = cfg.mlp.p0_max;
    scan.n_scan = cfg.mlp.n_scan;

    const MlpResult res = solve_mlp(boundary, cfg.params, cfg.fb, scan);
    extras["branches"] = res.branches.size();
    extras["scan"] = {{"p0_min", scan.p0_min}, {"p0_max", scan.p0_max}, {"n_scan", scan.n_scan}};

    for (std::size_t b = 0; b < res.branches.size(); ++b) {
        const MlpSolution& sol = res.branches[b];
        auto out = w.open("mlp_branch" + std::to_string(b) + ".csv");
        out << "t,theta,p_theta,r,E\n";
        for (std::size_t k = 0; k < sol.t.size(); ++k)
            out << fmt(sol.t[k]) << ',' << fmt(sol.theta[k]) << ',' << fmt(sol.p_theta[k])
                << ',' << fmt(sol.r[k]) << ',' << fmt(sol.energy) << "\n";
        extras["branch_" + std::to_string(b)] = {{"E", sol.energy},
                                                 {"p0", sol.p0},
                                                 {"log_likelihood", sol.log_likelihood},
                                                 {"energy_drift", sol.energy_drift}};
    }
    if (res.branches.empty()) {
        auto out = w.open("mlp_residuals.csv");
        out << "p0,residual\n";
        for (auto [p0, r] : res.residual_scan) out << fmt(p0) << ',' << fmt(r) << "\n";
    }
}

void run_portrait(const RunConfig& cfg, Writer& w) {
    auto out = w.open("portrait.csv");
    out << "theta,p_theta,E,branch\n";
    for (double E : cfg.portrait.energies) {
        for (int sign : {+1, -1}) {
            const PortraitCurve c =
                portrait_curve(E, cfg.params, cfg.fb, sign, cfg.portrait.n_theta);
            for (const auto& seg : c.segments)
                for (const auto& pt : seg)
                    out << fmt(pt.theta) << ',' << fmt(pt.p_theta) << ',' << fmt(E) << ','
                        << (sign > 0 ? "+" : "-") << "\n";
        }
    }
}

void run_feedback_kz(const RunConfig& cfg, Writer& w, json& extras) {
    PhaseLockConfig pl{cfg.kz.delta_d, cfg.kz.F};
    pl.validate();

    const CheckpointGrid grid = CheckpointGrid::every(cfg.params.n_steps, 1);
    EnsembleOptions opts;
    opts.sim = sim_options(cfg);
    opts.workers = cfg.workers;
    opts.memory_budget_bytes = 2ull * 1024 * 1024 * 1024;
    const EnsembleResult ens = simulate_ensemble(cfg.ensemble.n_traj, cfg.initial, cfg.params,
                                                 cfg.fb, cfg.ensemble.master_seed, grid, opts);

    const std::size_t burn_steps =
        static_cast<std::size_t>(std::ceil(cfg.kz.burn_in / cfg.params.dt));
    std::vector<std::size_t> lags;
    for (std::size_t i = 0; i < cfg.kz.n_tau; ++i)
        lags.push_back(static_cast<std::size_t>(
            std::lround(cfg.kz.max_tau / cfg.params.dt * static_cast<double>(i) /
                        static_cast<double>(cfg.kz.n_tau - 1))));

    const KzEstimate est = kz_empirical(ens, cfg.params, lags, burn_steps);
    auto out = w.open("kz.csv");
    out << "tau,kz_analytic,kz_empirical,stderr\n";
    for (std::size_t i = 0; i < est.tau.size(); ++i)
        out << fmt(est.tau[i]) << ',' << fmt(kz_analytic(est.tau[i], pl, cfg.params)) << ','
            << fmt(est.value[i]) << ',' << fmt(est.stderr_value[i]) << "\n";
    extras["burn_in"] = cfg.kz.burn_in;
    extras["burn_in_steps"] = burn_steps;
}

} // namespace

RunOutcome run(const RunConfig& input) {
    RunOutcome outcome;
    const RunConfig cfg = resolve_defaults(input);

    const auto violations = validate(cfg);
    json verr = json::array();
    for (const auto& v : violations)
        if (!v.warning) verr.push_back({{"path", v.path}, {"message", v.message}});
    if (!verr.empty()) {
        outcome.exit_code = 2;
        outcome.error_json = json{{"error", "validation"}, {"violations", verr}}.dump(2);
        return outcome;
    }

    Writer w;
    w.dir = cfg.output.directory;
    json extras;
    const auto t_start = std::chrono::steady_clock::now();
    try {
        switch (cfg.mode) {
            case RunMode::Simulate: run_simulate(cfg, w); break;
            case RunMode::Postselect: run_postselect(cfg, w, extras); break;
            case RunMode::Correlate: run_correlate(cfg, w); break;
            case RunMode::Diagrams: run_diagrams(cfg, w); break;
            case RunMode::Mlp: run_mlp(cfg, w, extras); break;
            case RunMode::Portrait: run_portrait(cfg, w); break;
            case RunMode::FeedbackKz: run_feedback_kz(cfg, w, extras); break;
        }
    } catch (const std::exception& e) {
        outcome.exit_code = 1;
        outcome.error_json =
            json{{"error", "runtime"}, {"mode", mode_name(cfg.mode)}, {"what", e.what()}}
                .dump(2);
        return outcome;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                            .count();

    json warnings = json::array();
    for (const auto& v : violations)
        if (v.warning) warnings.push_back({{"path", v.path}, {"message", v.message}});

    json manifest;
    manifest["config"] = json::parse(cfg.to_json());
    manifest["master_seed"] = cfg.ensemble.master_seed;
    manifest["code_version"] = QPATH_VERSION;
    manifest["wall_time_s"] = wall;
    manifest["outputs"] = w.outputs;
    manifest["warnings"] = warnings;
    if (!extras.empty()) manifest["results"] = extras;
    {
        fs::create_directories(w.dir);
        std::ofstream mf(w.dir / "manifest.json");
        mf << manifest.dump(2) << "\n";
    }
    outcome.outputs = w.outputs;
    outcome.outputs.push_back("manifest.json");
    return outcome;
}

} // namespace qpath
