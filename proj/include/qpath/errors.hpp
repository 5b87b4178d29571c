#pragma once

#include <stdexcept>
#include <string>

namespace qpath {

// Thrown by the (u,v,w) frame machinery when delta = 0 (beta undefined,
// transform degenerate).
struct FrameDegenerateError : std::domain_error {
    using std::domain_error::domain_error;
};

// Gamma = 2*delta exactly: Omega = 0 makes kappa_2, kappa_3 singular.
struct DegenerateEigenvalueError : std::domain_error {
    using std::domain_error::domain_error;
};

struct UnphysicalStateError : std::domain_error {
    using std::domain_error::domain_error;
};

// State left the unit ball by more than the clipping tolerance.
struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Measurement norm collapse (trace below 1e-300).
struct UnderflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// atanh singularity at |z| >= 1.
struct BoundaryDivergenceError : std::domain_error {
    using std::domain_error::domain_error;
};

struct NumericalConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EndpointMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Portrait curve requested below the critical stochastic energy.
struct NoRealCurveError : std::domain_error {
    using std::domain_error::domain_error;
};

struct UnsupportedDiagramError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace qpath
