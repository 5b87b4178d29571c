#pragma once

// run.hpp — executes a validated RunConfig and writes the artifact files plus
// a manifest sufficient to reproduce them byte-for-byte.

#include <string>

#include "qpath/config.hpp"

namespace qpath {

struct RunOutcome {
    int exit_code{0};  // 0 success, 1 runtime failure, 2 validation failure
    std::string error_json;  // machine-readable error record when exit_code != 0
    std::vector<std::string> outputs;
};

// Resolve per-mode defaults that depend on other fields (split-operator for
// direct-linear feedback, kz burn-in, phase-lock feedback wiring).
RunConfig resolve_defaults(const RunConfig& cfg);

RunOutcome run(const RunConfig& cfg);

} // namespace qpath
