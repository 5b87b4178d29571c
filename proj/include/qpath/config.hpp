#pragma once

// config.hpp — run configuration, validation, and lossless JSON round-trips
// for the CLI.  Field names mirror the model symbols (tau_m, dt, gamma,
// delta, delta0, delta1, delta_d, F).

#include <optional>
#include <string>
#include <vector>

#include "qpath/conditioned.hpp"
#include "qpath/model.hpp"
#include "qpath/trajectory.hpp"

namespace qpath {

enum class RunMode { Simulate, Postselect, Correlate, Diagrams, Mlp, Portrait, FeedbackKz };

const char* mode_name(RunMode m);
RunMode mode_from_name(const std::string& name);

struct EnsembleConfig {
    std::size_t n_traj{500000};
    std::uint64_t master_seed{20200916};
    UpdateScheme scheme{};
    bool scheme_explicit{false};
    bool white_noise_readouts{false};
};

struct OutputConfig {
    std::string directory{"out"};
    std::vector<std::string> formats{"csv"};
};

struct CorrelateConfig {
    double t_base{0.113};
    std::vector<double> tau_grid;
    bool with_monte_carlo{true};
};

struct MlpConfig {
    double theta_initial{1.2 * M_PI};
    std::optional<double> theta_final;
    bool p_final_zero{true};
    double T{10.0};
    double p0_min{-10.0};
    double p0_max{10.0};
    std::size_t n_scan{400};
};

struct PortraitConfig {
    std::vector<double> energies{-0.45, -0.32, -0.1, 0.25};
    std::size_t n_theta{2048};
};

struct KzConfig {
    double delta_d{20.0};
    double F{0.3};
    double burn_in{0.0};  // 0 resolves to 5/(F delta_d)
    double max_tau{1.0};
    std::size_t n_tau{40};
};

// Defaults reproduce the plain-measurement postselection study
// (z_I = 0, z_F = cos(pi/4), T = 0.6 tau_m, dt = 0.006 tau_m, 5e5 trajectories,
// tolerance 0.02) when mode = postselect is invoked bare.
struct RunConfig {
    RunMode mode{RunMode::Postselect};
    ModelParams params{1.0, 0.006, 0.0, 0.0, 0.0, 100};
    BlochState initial{0.0, 0.0, 0.0};
    FeedbackSpec fb{};
    EnsembleConfig ensemble{};
    std::optional<Postselection> selection;
    std::size_t checkpoint_count{21};
    CorrelateConfig correlate{};
    MlpConfig mlp{};
    PortraitConfig portrait{};
    KzConfig kz{};
    OutputConfig output{};
    unsigned workers{0};

    std::string to_json() const;                       // canonical form
    static RunConfig from_json(const std::string& s);  // throws ConfigError
};

struct Violation {
    std::string path;     // dotted field path
    std::string message;
    bool warning{false};
};

// Every violated invariant with a path to the offending field; an empty list
// (ignoring warnings) means the config is runnable.
std::vector<Violation> validate(const RunConfig& cfg);

} // namespace qpath
