// qpath command-line entry point.  See README.md for the config schema and
// the per-mode outputs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qpath/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "qpath — continuously-measured qubit trajectories, conditioned statistics,\n"
        "tree-level correlators, most-likely paths, and feedback stabilization"};

    std::string config_path;
    std::string mode;
    std::string out_dir;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned workers = 0;
    bool workers_set = false;
    bool print_config = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--mode", mode,
                   "simulate | postselect | correlate | diagrams | mlp | portrait | feedback-kz");
    app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--workers", workers, "worker threads (0 = all cores)")
        ->each([&](const std::string&) { workers_set = true; });
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", format, "csv | binary");
    app.add_flag("--print-config", print_config, "print the resolved config and exit");

    CLI11_PARSE(app, argc, argv);

    qpath::RunConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "{\"error\":\"config\",\"what\":\"cannot open " << config_path
                          << "\"}\n";
                return 2;
            }
            std::stringstream ss;
            ss << in.rdbuf();
            cfg = qpath::RunConfig::from_json(ss.str());
        }
        if (!mode.empty()) cfg.mode = qpath::mode_from_name(mode);
        if (!out_dir.empty()) cfg.output.directory = out_dir;
        if (!format.empty()) cfg.output.formats = {format};

        // Flag overrides, then environment overrides for seed and workers.
        if (seed_set) cfg.ensemble.master_seed = seed;
        if (workers_set) cfg.workers = workers;
        if (const char* env = std::getenv("QPATH_SEED"); env && !seed_set)
            cfg.ensemble.master_seed = std::strtoull(env, nullptr, 10);
        if (const char* env = std::getenv("QPATH_WORKERS"); env && !workers_set)
            cfg.workers = static_cast<unsigned>(std::strtoul(env, nullptr, 10));

        if (cfg.mode == qpath::RunMode::Postselect && !cfg.selection)
            cfg.selection = qpath::Postselection{std::cos(M_PI / 4.0), 0.02};
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"config\",\"what\":\"" << e.what() << "\"}\n";
        return 2;
    }

    if (print_config) {
        std::cout << qpath::resolve_defaults(cfg).to_json() << "\n";
        return 0;
    }

    const qpath::RunOutcome outcome = qpath::run(cfg);
    if (outcome.exit_code != 0) {
        std::cerr << outcome.error_json << "\n";
        return outcome.exit_code;
    }
    std::cout << "wrote " << cfg.output.directory << ":";
    for (const auto& f : outcome.outputs) std::cout << " " << f;
    std::cout << "\n";
    return 0;
}
