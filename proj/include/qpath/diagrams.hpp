#pragma once

// diagrams.hpp — tree-level diagrammatic machinery for the Rabi-driven qubit
// in the diagonal (u,v,w) frame: the 12-vertex interaction catalog, propagators
// with the left-continuous step convention (Theta(0) = 0), enumeration of all
// zero-loop pairings for a set of ending variables, and closed-form evaluation
// of the resulting nested exponential integrals.
//
// Loop corrections (L >= 1) are out of scope and rejected by construction:
// enumeration keeps only pairings whose connection graph is a forest.

#include <array>
#include <string>
#include <vector>

#include "qpath/model.hpp"

namespace qpath {

enum class Flavor { U, V, W, Xi };

const char* flavor_name(Flavor f);

// One of the 12 interaction-action terms.
//   Initial     p_{f0}          weight f_I (delta(t) collapses the integral)
//   CubicNoise  p_f f g xi      weight alpha
//   LinearNoise p_f xi          weight kappa_f (kappa_u = 0)
struct VertexKind {
    enum class Type { Initial, CubicNoise, LinearNoise };

    Type type{};
    Flavor conj{};                    // flavor of the conjugate leg
    std::array<Flavor, 2> fields{};   // CubicNoise only
    std::string label;

    bool has_noise() const noexcept { return type != Type::Initial; }
    int field_count() const noexcept { return type == Type::CubicNoise ? 2 : 0; }
};

// The full catalog: 3 initial, 6 cubic-noise, 3 linear-noise.
const std::vector<VertexKind>& vertex_catalog();

struct Ending {
    Flavor flavor{};
    double time{0.0};
};

// Legs are addressed as (node, slot).  Nodes 0..E-1 are endings (slot 0);
// nodes E.. are internal vertices with slot 0 = conjugate, 1..2 = fields,
// 3 = noise.
struct Leg {
    int node{};
    int slot{};
};

struct DiagramEdge {
    Leg field;  // later-time side for field-conjugate edges
    Leg conj;   // earlier-time side (or second noise leg)
    bool noise{false};
    Flavor flavor{};
};

struct Diagram {
    std::vector<Ending> endings;
    std::vector<int> vertex_kinds;  // catalog indices, one per internal vertex
    std::vector<DiagramEdge> edges;
    double coefficient{1.0};  // labeled-pairing count / prod(multiplicity!)
    int external_edges{0};
    int internal_edges{0};
    int vertex_count{0};
    int nu_order{0};  // E + I - V, the small-noise power
    int loops{0};     // cycle rank; always 0 at tree level
    std::string signature;
};

// All zero-loop pairings for the given ending vertices (counts are structural:
// the numeric ending times do not affect which diagrams are returned, only
// their values).  An empty ending list yields the single empty diagram of
// value 1.
std::vector<Diagram> enumerate_tree(const std::vector<Ending>& endings);

// Closed-form value: collapses the noise deltas, applies the Theta-ordering
// constraints, and evaluates the remaining time integrals of exponential
// products analytically (degenerate exponents via the t e^{lambda t} limit).
// Requires all ending times in (0, T].
cplx evaluate_diagram(const Diagram& d, const DiagonalFrame& frame,
                      const std::array<cplx, 3>& initial_uvw, double T);

// Human-readable listing (vertex kinds, edge list, orders) for golden files.
std::string dump_diagram(const Diagram& d);

// ---- closed-form correlators -----------------------------------------------

// <z(t)> = e^{-Gamma t/2} [ z_I cosh(Omega t/2)
//                           + ((z_I Gamma - 2 delta y_I)/Omega) sinh(Omega t/2) ],
// evaluated through complex Omega with a series-safe Omega -> 0 limit.
double mean_z(double t, const BlochState& initial, const ModelParams& params);

// Tree-level <z(t1) xi(t2)>; exactly 0 for t1 <= t2.
double corr_z_xi(double t1, double t2, const BlochState& initial, const ModelParams& params);

// Tree-level <z(t1) z(t2)> and <y(t1) z(t2)> summed over the four (v,w) flavor
// pairs from enumerate_tree/evaluate_diagram.  delta = 0 is rejected (use the
// conditioned-statistics module for the plain measurement case).
double corr_zz(double t1, double t2, const BlochState& initial, const ModelParams& params,
               double T);
double corr_yz(double t1, double t2, const BlochState& initial, const ModelParams& params,
               double T);

// Var[z(t)] = <z(t)^2> - <z(t)>^2 at tree level.
double variance_tree(double t, const BlochState& initial, const ModelParams& params, double T);

// t -> infinity limit of the tree-level variance:
//   (Gamma^2 + delta^2) / (2 Gamma delta^2 tau_m).
double variance_long_time_limit(const ModelParams& params);

} // namespace qpath
