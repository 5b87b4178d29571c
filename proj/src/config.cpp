#include "qpath/config.hpp"

#include <cmath>

#include <json.hpp>

namespace qpath {

using nlohmann::json;

const char* mode_name(RunMode m) {
    switch (m) {
        case RunMode::Simulate: return "simulate";
        case RunMode::Postselect: return "postselect";
        case RunMode::Correlate: return "correlate";
        case RunMode::Diagrams: return "diagrams";
        case RunMode::Mlp: return "mlp";
        case RunMode::Portrait: return "portrait";
        case RunMode::FeedbackKz: return "feedback-kz";
    }
    return "?";
}

RunMode mode_from_name(const std::string& name) {
    for (RunMode m : {RunMode::Simulate, RunMode::Postselect, RunMode::Correlate,
                      RunMode::Diagrams, RunMode::Mlp, RunMode::Portrait, RunMode::FeedbackKz})
        if (name == mode_name(m)) return m;
    throw ConfigError("unknown mode: " + name);
}

namespace {

const char* scheme_name(const UpdateScheme& s) { return s.name(); }

UpdateScheme scheme_from_json(const json& j) {
    const std::string name = j.value("scheme", "exact-operator");
    if (name == "exact-operator") return UpdateScheme::exact_operator();
    if (name == "stratonovich") return UpdateScheme::stratonovich();
    if (name == "ito") return UpdateScheme::ito();
    if (name == "split-operator") return UpdateScheme::split_operator(j.value("pieces", 10));
    throw ConfigError("unknown scheme: " + name);
}

json fb_to_json(const FeedbackSpec& fb) {
    json j;
    switch (fb.kind) {
        case FeedbackSpec::Kind::None:
            j["variant"] = "none";
            break;
        case FeedbackSpec::Kind::DirectLinear:
            j["variant"] = "direct-linear";
            j["delta0"] = fb.delta0;
            j["delta1"] = fb.delta1;
            break;
        case FeedbackSpec::Kind::PhaseLock:
            j["variant"] = "phase-lock";
            j["delta_d"] = fb.delta_d;
            j["F"] = fb.F;
            break;
    }
    return j;
}

FeedbackSpec fb_from_json(const json& j) {
    const std::string v = j.value("variant", "none");
    if (v == "none") return FeedbackSpec::none();
    if (v == "direct-linear")
        return FeedbackSpec::direct_linear(j.value("delta0", 0.0), j.value("delta1", 0.0));
    if (v == "phase-lock")
        return FeedbackSpec::phase_lock(j.value("delta_d", 0.0), j.value("F", 0.0));
    throw ConfigError("unknown feedback variant: " + v);
}

} // namespace

std::string RunConfig::to_json() const {
    json j;
    j["mode"] = mode_name(mode);
    j["params"] = {{"tau_m", params.tau_m},   {"dt", params.dt},
                   {"gamma", params.gamma},   {"epsilon", params.epsilon},
                   {"delta", params.delta},   {"n_steps", params.n_steps}};
    j["initial"] = {{"x", initial.x}, {"y", initial.y}, {"z", initial.z}};
    j["feedback"] = fb_to_json(fb);
    j["ensemble"] = {{"n_traj", ensemble.n_traj},
                     {"master_seed", ensemble.master_seed},
                     {"scheme", scheme_name(ensemble.scheme)},
                     {"pieces", ensemble.scheme.pieces},
                     {"white_noise_readouts", ensemble.white_noise_readouts}};
    if (selection)
        j["selection"] = {{"z_F", selection->z_F}, {"tolerance", selection->tolerance}};
    j["checkpoints"] = {{"count", checkpoint_count}};
    j["correlate"] = {{"t_base", correlate.t_base},
                      {"tau_grid", correlate.tau_grid},
                      {"with_monte_carlo", correlate.with_monte_carlo}};
    j["mlp"] = {{"theta_initial", mlp.theta_initial},
                {"p_final_zero", mlp.p_final_zero},
                {"T", mlp.T},
                {"p0_min", mlp.p0_min},
                {"p0_max", mlp.p0_max},
                {"n_scan", mlp.n_scan}};
    if (mlp.theta_final) j["mlp"]["theta_final"] = *mlp.theta_final;
    j["portrait"] = {{"energies", portrait.energies}, {"n_theta", portrait.n_theta}};
    j["kz"] = {{"delta_d", kz.delta_d},
               {"F", kz.F},
               {"burn_in", kz.burn_in},
               {"max_tau", kz.max_tau},
               {"n_tau", kz.n_tau}};
    j["output"] = {{"directory", output.directory}, {"formats", output.formats}};
    j["workers"] = workers;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = mode_from_name(j["mode"].get<std::string>());
        if (j.contains("params")) {
            const json& p = j["params"];
            cfg.params.tau_m = p.value("tau_m", cfg.params.tau_m);
            cfg.params.dt = p.value("dt", cfg.params.dt);
            cfg.params.gamma = p.value("gamma", cfg.params.gamma);
            cfg.params.epsilon = p.value("epsilon", cfg.params.epsilon);
            cfg.params.delta = p.value("delta", cfg.params.delta);
            cfg.params.n_steps = p.value("n_steps", cfg.params.n_steps);
        }
        if (j.contains("initial")) {
            const json& q = j["initial"];
            cfg.initial = BlochState{q.value("x", 0.0), q.value("y", 0.0), q.value("z", 0.0)};
        }
        if (j.contains("feedback")) cfg.fb = fb_from_json(j["feedback"]);
        if (j.contains("ensemble")) {
            const json& e = j["ensemble"];
            cfg.ensemble.n_traj = e.value("n_traj", cfg.ensemble.n_traj);
            cfg.ensemble.master_seed = e.value("master_seed", cfg.ensemble.master_seed);
            cfg.ensemble.scheme = scheme_from_json(e);
            cfg.ensemble.scheme_explicit = e.contains("scheme");
            cfg.ensemble.white_noise_readouts =
                e.value("white_noise_readouts",
                        cfg.ensemble.scheme.kind == UpdateScheme::Kind::Ito);
        }
        if (j.contains("selection")) {
            Postselection sel;
            sel.z_F = j["selection"].value("z_F", 0.0);
            sel.tolerance = j["selection"].value("tolerance", 0.02);
            cfg.selection = sel;
        }
        if (j.contains("checkpoints"))
            cfg.checkpoint_count = j["checkpoints"].value("count", cfg.checkpoint_count);
        if (j.contains("correlate")) {
            const json& c = j["correlate"];
            cfg.correlate.t_base = c.value("t_base", cfg.correlate.t_base);
            if (c.contains("tau_grid"))
                cfg.correlate.tau_grid = c["tau_grid"].get<std::vector<double>>();
            cfg.correlate.with_monte_carlo =
                c.value("with_monte_carlo", cfg.correlate.with_monte_carlo);
        }
        if (j.contains("mlp")) {
            const json& m = j["mlp"];
            cfg.mlp.theta_initial = m.value("theta_initial", cfg.mlp.theta_initial);
            if (m.contains("theta_final")) {
                cfg.mlp.theta_final = m["theta_final"].get<double>();
                cfg.mlp.p_final_zero = false;
            }
            cfg.mlp.p_final_zero = m.value("p_final_zero", cfg.mlp.p_final_zero);
            cfg.mlp.T = m.value("T", cfg.mlp.T);
            cfg.mlp.p0_min = m.value("p0_min", cfg.mlp.p0_min);
            cfg.mlp.p0_max = m.value("p0_max", cfg.mlp.p0_max);
            cfg.mlp.n_scan = m.value("n_scan", cfg.mlp.n_scan);
        }
        if (j.contains("portrait")) {
            const json& p = j["portrait"];
            if (p.contains("energies"))
                cfg.portrait.energies = p["energies"].get<std::vector<double>>();
            cfg.portrait.n_theta = p.value("n_theta", cfg.portrait.n_theta);
        }
        if (j.contains("kz")) {
            const json& k = j["kz"];
            cfg.kz.delta_d = k.value("delta_d", cfg.kz.delta_d);
            cfg.kz.F = k.value("F", cfg.kz.F);
            cfg.kz.burn_in = k.value("burn_in", cfg.kz.burn_in);
            cfg.kz.max_tau = k.value("max_tau", cfg.kz.max_tau);
            cfg.kz.n_tau = k.value("n_tau", cfg.kz.n_tau);
        }
        if (j.contains("output")) {
            const json& o = j["output"];
            cfg.output.directory = o.value("directory", cfg.output.directory);
            if (o.contains("formats"))
                cfg.output.formats = o["formats"].get<std::vector<std::string>>();
        }
        cfg.workers = j.value("workers", 0u);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

std::vector<Violation> validate(const RunConfig& cfg) {
    std::vector<Violation> out;
    auto err = [&](std::string path, std::string msg) {
        out.push_back({std::move(path), std::move(msg), false});
    };
    auto warn = [&](std::string path, std::string msg) {
        out.push_back({std::move(path), std::move(msg), true});
    };

    if (!(cfg.params.tau_m > 0.0)) err("params.tau_m", "must be > 0");
    if (!(cfg.params.dt > 0.0)) err("params.dt", "must be > 0");
    if (cfg.params.n_steps == 0) err("params.n_steps", "must be >= 1");
    if (cfg.params.gamma < 0.0)
        err("params.gamma", "must be >= 0 (efficiency eta would exceed 1)");

    if (!cfg.initial.physical()) err("initial", "outside the Bloch ball");

    if (cfg.ensemble.n_traj == 0) err("ensemble.n_traj", "must be >= 1");
    if (cfg.ensemble.scheme.kind == UpdateScheme::Kind::SplitOperator &&
        cfg.ensemble.scheme.pieces < 1)
        err("ensemble.pieces", "must be >= 1");
    if (cfg.ensemble.scheme.kind == UpdateScheme::Kind::Ito &&
        !cfg.ensemble.white_noise_readouts)
        err("ensemble.white_noise_readouts",
            "the ito scheme requires the white-noise readout flag");
    if (cfg.ensemble.scheme.kind != UpdateScheme::Kind::Ito &&
        cfg.ensemble.white_noise_readouts)
        err("ensemble.white_noise_readouts", "only defined for the ito scheme");

    if (cfg.selection) {
        if (!(std::abs(cfg.selection->z_F) < 1.0)) err("selection.z_F", "|z_F| must be < 1");
        if (!(cfg.selection->tolerance > 0.0)) err("selection.tolerance", "must be > 0");
    }
    if (cfg.mode == RunMode::Postselect && !cfg.selection)
        err("selection", "mode=postselect requires a selection window");

    if (cfg.fb.kind == FeedbackSpec::Kind::DirectLinear) {
        if (std::abs(cfg.fb.delta1 * cfg.params.tau_m) > 1.0)
            warn("feedback.delta1", "|delta1 tau_m| > 1: no attractors exist");
    }
    if (cfg.fb.kind == FeedbackSpec::Kind::PhaseLock) {
        if (!(cfg.fb.delta_d > 0.0)) err("feedback.delta_d", "must be > 0");
        if (cfg.fb.F * cfg.fb.delta_d < 0.0) err("feedback.F", "F delta_d must be >= 0");
    }

    if (cfg.mode == RunMode::Mlp || cfg.mode == RunMode::Portrait) {
        if (cfg.fb.kind != FeedbackSpec::Kind::DirectLinear)
            err("feedback.variant", "mlp/portrait modes need direct-linear feedback");
    }
    if (cfg.mode == RunMode::Mlp && !(cfg.mlp.T > 0.0)) err("mlp.T", "must be > 0");
    if (cfg.mode == RunMode::Portrait)
        for (std::size_t i = 0; i < cfg.portrait.energies.size(); ++i)
            if (1.0 + 2.0 * cfg.portrait.energies[i] * cfg.params.tau_m < 0.0)
                err("portrait.energies[" + std::to_string(i) + "]",
                    "below the critical energy -1/(2 tau_m)");

    if (cfg.mode == RunMode::FeedbackKz) {
        if (!(cfg.kz.delta_d * cfg.params.tau_m >= 10.0))
            warn("kz.delta_d", "delta_d tau_m < 10: outside the diffusive-Rabi regime the "
                               "coarse-grained formula assumes");
        if (!(cfg.kz.F > 0.0)) err("kz.F", "must be > 0 for a stationary phase");
    }

    if (cfg.mode == RunMode::Correlate && cfg.params.delta == 0.0)
        err("params.delta", "mode=correlate needs delta != 0 (diagonal frame degenerate)");

    for (const auto& f : cfg.output.formats)
        if (f != "csv" && f != "binary") err("output.formats", "unknown format: " + f);
    return out;
}

} // namespace qpath
