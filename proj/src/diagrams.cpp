#include "qpath/diagrams.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace qpath {

const char* flavor_name(Flavor f) {
    switch (f) {
        case Flavor::U: return "u";
        case Flavor::V: return "v";
        case Flavor::W: return "w";
        case Flavor::Xi: return "xi";
    }
    return "?";
}

const std::vector<VertexKind>& vertex_catalog() {
    static const std::vector<VertexKind> catalog = [] {
        std::vector<VertexKind> c;
        using T = VertexKind::Type;
        auto add = [&](T type, Flavor conj, std::array<Flavor, 2> fields, std::string label) {
            VertexKind k;
            k.type = type;
            k.conj = conj;
            k.fields = fields;
            k.label = std::move(label);
            c.push_back(k);
        };
        // Type 1: initial vertices p_{f0}
        add(T::Initial, Flavor::U, {}, "p_u0");
        add(T::Initial, Flavor::V, {}, "p_v0");
        add(T::Initial, Flavor::W, {}, "p_w0");
        // Type 2: cubic-noise vertices alpha p_f f (v+w) xi, split per branch
        add(T::CubicNoise, Flavor::U, {Flavor::U, Flavor::V}, "p_u.u.v.xi");
        add(T::CubicNoise, Flavor::U, {Flavor::U, Flavor::W}, "p_u.u.w.xi");
        add(T::CubicNoise, Flavor::V, {Flavor::V, Flavor::V}, "p_v.v.v.xi");
        add(T::CubicNoise, Flavor::V, {Flavor::V, Flavor::W}, "p_v.v.w.xi");
        add(T::CubicNoise, Flavor::W, {Flavor::W, Flavor::V}, "p_w.w.v.xi");
        add(T::CubicNoise, Flavor::W, {Flavor::W, Flavor::W}, "p_w.w.w.xi");
        // Type 3: linear-noise vertices kappa_f p_f xi
        add(T::LinearNoise, Flavor::U, {}, "p_u.xi");
        add(T::LinearNoise, Flavor::V, {}, "p_v.xi");
        add(T::LinearNoise, Flavor::W, {}, "p_w.xi");
        return c;
    }();
    return catalog;
}

namespace {

constexpr int kNumKinds = 12;

struct LegRef {
    int node;   // node id (endings first, then vertices)
    int slot;   // 0 conj, 1..2 fields, 3 noise; endings use slot 0
    Flavor flavor;
};

// Disjoint-set with cycle detection for the forest filter.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {  // false if already connected (would close a loop)
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

struct Pairing {
    std::vector<DiagramEdge> edges;
};

struct EnumerationState {
    const std::vector<Ending>* endings;
    std::vector<int> vertices;  // catalog kind per internal vertex

    std::vector<LegRef> conj_legs;
    std::vector<LegRef> field_legs;
    std::vector<LegRef> noise_legs;

    std::vector<int> field_taken;
    std::vector<int> noise_taken;

    std::vector<DiagramEdge> edges;
    std::vector<Pairing> out;
};

int ending_count(const EnumerationState& st) {
    return static_cast<int>(st.endings->size());
}

void match_noise(EnumerationState& st, std::size_t pos) {
    while (pos < st.noise_legs.size() && st.noise_taken[pos]) ++pos;
    if (pos >= st.noise_legs.size()) {
        st.out.push_back(Pairing{st.edges});
        return;
    }
    st.noise_taken[pos] = 1;
    for (std::size_t j = pos + 1; j < st.noise_legs.size(); ++j) {
        if (st.noise_taken[j]) continue;
        st.noise_taken[j] = 1;
        DiagramEdge e;
        e.field = {st.noise_legs[pos].node, st.noise_legs[pos].slot};
        e.conj = {st.noise_legs[j].node, st.noise_legs[j].slot};
        e.noise = true;
        e.flavor = Flavor::Xi;
        st.edges.push_back(e);
        match_noise(st, pos + 1);
        st.edges.pop_back();
        st.noise_taken[j] = 0;
    }
    st.noise_taken[pos] = 0;
}

void match_conj(EnumerationState& st, std::size_t ci) {
    if (ci >= st.conj_legs.size()) {
        match_noise(st, 0);
        return;
    }
    const LegRef& conj = st.conj_legs[ci];
    for (std::size_t fi = 0; fi < st.field_legs.size(); ++fi) {
        if (st.field_taken[fi]) continue;
        if (st.field_legs[fi].flavor != conj.flavor) continue;
        st.field_taken[fi] = 1;
        DiagramEdge e;
        e.field = {st.field_legs[fi].node, st.field_legs[fi].slot};
        e.conj = {conj.node, conj.slot};
        e.noise = false;
        e.flavor = conj.flavor;
        st.edges.push_back(e);
        match_conj(st, ci + 1);
        st.edges.pop_back();
        st.field_taken[fi] = 0;
    }
}

bool is_forest(const EnumerationState& st, const Pairing& p) {
    const int nodes = ending_count(st) + static_cast<int>(st.vertices.size());
    UnionFind uf(nodes);
    for (const auto& e : p.edges)
        if (!uf.unite(e.field.node, e.conj.node)) return false;
    return true;
}

// ---- canonical signatures ---------------------------------------------------

struct Canonicalizer {
    const EnumerationState& st;
    const Pairing& p;
    // child vertex hanging off each (node, slot) field leg, -1 if none
    std::map<std::pair<int, int>, int> child_of;
    // noise partner leg of each (node, slot)
    std::map<std::pair<int, int>, std::pair<int, int>> noise_partner;
    std::map<int, std::vector<int>> canonical_children;  // vertex -> ordered child list
    std::map<int, int> noise_id;                         // node -> dfs order of its noise leg
    int next_noise_id{0};

    Canonicalizer(const EnumerationState& s, const Pairing& pr) : st(s), p(pr) {
        for (const auto& e : p.edges) {
            if (e.noise) {
                noise_partner[{e.field.node, e.field.slot}] = {e.conj.node, e.conj.slot};
                noise_partner[{e.conj.node, e.conj.slot}] = {e.field.node, e.field.slot};
            } else {
                child_of[{e.field.node, e.field.slot}] = e.conj.node;
            }
        }
    }

    const VertexKind& kind_of(int node) const {
        return vertex_catalog()[st.vertices[node - ending_count(st)]];
    }

    bool is_vertex(int node) const { return node >= ending_count(st); }

    std::string serialize_vertex(int node) {
        const VertexKind& k = kind_of(node);
        std::string s = k.label;
        if (k.type == VertexKind::Type::CubicNoise) {
            std::string c0 = serialize_child(node, 1);
            std::string c1 = serialize_child(node, 2);
            std::vector<int> order{1, 2};
            if (k.fields[0] == k.fields[1] && c1 < c0) {
                std::swap(c0, c1);
                order = {2, 1};
            }
            canonical_children[node] = order;
            s += "[" + c0 + "," + c1 + "]";
        }
        if (k.has_noise()) s += "~";
        return s;
    }

    std::string serialize_child(int node, int slot) {
        auto it = child_of.find({node, slot});
        if (it == child_of.end()) return "-";
        return serialize_vertex(it->second);
    }

    void assign_noise_ids(int node) {
        const VertexKind& k = kind_of(node);
        if (k.has_noise()) noise_id[node] = next_noise_id++;
        if (k.type == VertexKind::Type::CubicNoise)
            for (int slot : canonical_children[node]) {
                auto it = child_of.find({node, slot});
                if (it != child_of.end()) assign_noise_ids(it->second);
            }
    }

    std::string signature() {
        std::ostringstream sig;
        const int ne = ending_count(st);
        // First pass: canonical subtree strings rooted at the field endings.
        std::vector<std::string> roots(ne);
        for (int e = 0; e < ne; ++e) {
            const Ending& end = (*st.endings)[e];
            if (end.flavor == Flavor::Xi) {
                roots[e] = "xi";
                continue;
            }
            auto it = child_of.find({e, 0});
            roots[e] = std::string(flavor_name(end.flavor)) + ":" +
                       (it == child_of.end() ? "-" : serialize_vertex(it->second));
        }
        // Second pass: deterministic noise ids in canonical DFS order.
        for (int e = 0; e < ne; ++e) {
            const Ending& end = (*st.endings)[e];
            if (end.flavor == Flavor::Xi) {
                noise_id[e] = 1000 + e;  // fixed ids for noise endings
                continue;
            }
            auto it = child_of.find({e, 0});
            if (it != child_of.end()) assign_noise_ids(it->second);
        }
        std::vector<std::pair<int, int>> pairs;
        for (const auto& e : p.edges) {
            if (!e.noise) continue;
            int a = noise_id.at(e.field.node);
            int b = noise_id.at(e.conj.node);
            pairs.emplace_back(std::min(a, b), std::max(a, b));
        }
        std::sort(pairs.begin(), pairs.end());

        for (int e = 0; e < ne; ++e) sig << roots[e] << ";";
        sig << "noise:";
        for (auto& pr : pairs) sig << pr.first << "-" << pr.second << ",";
        return sig.str();
    }
};

// Feasible vertex multisets.  With E endings (E_f of them field-type), a
// cubic vertices and c initial vertices in a forest with k components:
//   c = 2a - E + 2k,  b + c = E_f + a  (per-flavor balance is checked exactly).
void candidate_multisets(const std::vector<Ending>& endings,
                         std::vector<std::vector<int>>& out) {
    const auto& catalog = vertex_catalog();
    const int E = static_cast<int>(endings.size());
    int ef = 0, exi = 0;
    std::array<int, 3> ending_fields{0, 0, 0};
    for (const auto& e : endings) {
        if (e.flavor == Flavor::Xi) {
            ++exi;
        } else {
            ++ef;
            ++ending_fields[static_cast<int>(e.flavor)];
        }
    }
    const int a_max = std::max(0, E + ef - 2);

    std::vector<int> counts(kNumKinds, 0);
    // Running totals per vertex type, pruned against the balance relations
    // (b + c = E_f + a and the forest gap) to keep the search tiny.
    int a_run = 0, bc_run = 0;
    std::function<void(int)> rec = [&](int kind) {
        if (a_run > a_max || bc_run > ef + a_max) return;
        if (kind == kNumKinds) {
            int a = 0, b = 0, c = 0;
            std::array<int, 3> conj{0, 0, 0};
            std::array<int, 3> fields = ending_fields;
            int noise = exi;
            for (int i = 0; i < kNumKinds; ++i) {
                const VertexKind& k = catalog[i];
                const int m = counts[i];
                if (m == 0) continue;
                conj[static_cast<int>(k.conj)] += m;
                if (k.type == VertexKind::Type::CubicNoise) {
                    a += m;
                    fields[static_cast<int>(k.fields[0])] += m;
                    fields[static_cast<int>(k.fields[1])] += m;
                } else if (k.type == VertexKind::Type::LinearNoise) {
                    b += m;
                } else {
                    c += m;
                }
                if (k.has_noise()) noise += m;
            }
            if (conj != fields) return;
            if (noise % 2 != 0) return;
            const int forest_gap = c - 2 * a + E;  // = 2k, need even and >= 2
            if (E > 0 && (forest_gap < 2 || forest_gap % 2 != 0)) return;
            if (E == 0 && (a || b || c)) return;
            out.push_back(counts);
            return;
        }
        const VertexKind& k = catalog[kind];
        const bool cubic = k.type == VertexKind::Type::CubicNoise;
        const int cap = cubic ? a_max : ef + a_max;  // b + c = E_f + a <= E_f + a_max
        for (int m = 0; m <= cap; ++m) {
            counts[kind] = m;
            (cubic ? a_run : bc_run) += m;
            rec(kind + 1);
            (cubic ? a_run : bc_run) -= m;
        }
        counts[kind] = 0;
    };
    rec(0);
}

} // namespace

std::vector<Diagram> enumerate_tree(const std::vector<Ending>& endings) {
    for (const auto& e : endings)
        (void)flavor_name(e.flavor);

    if (endings.empty()) {
        Diagram empty;
        empty.coefficient = 1.0;
        empty.signature = "empty";
        return {empty};
    }

    std::vector<std::vector<int>> multisets;
    candidate_multisets(endings, multisets);

    struct Group {
        Diagram rep;
        long count{0};
    };
    std::map<std::string, Group> groups;

    for (const auto& counts : multisets) {
        EnumerationState st;
        st.endings = &endings;
        for (int kind = 0; kind < kNumKinds; ++kind)
            for (int m = 0; m < counts[kind]; ++m) st.vertices.push_back(kind);

        const int ne = static_cast<int>(endings.size());
        for (int e = 0; e < ne; ++e) {
            const Flavor f = endings[e].flavor;
            if (f == Flavor::Xi)
                st.noise_legs.push_back({e, 0, Flavor::Xi});
            else
                st.field_legs.push_back({e, 0, f});
        }
        const auto& catalog = vertex_catalog();
        for (std::size_t vi = 0; vi < st.vertices.size(); ++vi) {
            const int node = ne + static_cast<int>(vi);
            const VertexKind& k = catalog[st.vertices[vi]];
            st.conj_legs.push_back({node, 0, k.conj});
            for (int s = 0; s < k.field_count(); ++s)
                st.field_legs.push_back({node, s + 1, k.fields[s]});
            if (k.has_noise()) st.noise_legs.push_back({node, 3, Flavor::Xi});
        }
        if (st.conj_legs.size() != st.field_legs.size()) continue;
        st.field_taken.assign(st.field_legs.size(), 0);
        st.noise_taken.assign(st.noise_legs.size(), 0);

        match_conj(st, 0);

        double mult_fact = 1.0;
        for (int kind = 0; kind < kNumKinds; ++kind)
            for (int m = 2; m <= counts[kind]; ++m) mult_fact *= m;

        for (const auto& pairing : st.out) {
            if (!is_forest(st, pairing)) continue;
            Canonicalizer canon(st, pairing);
            const std::string sig = canon.signature();
            auto it = groups.find(sig);
            if (it == groups.end()) {
                Diagram d;
                d.endings = endings;
                d.vertex_kinds = st.vertices;
                d.edges = pairing.edges;
                d.signature = sig;
                d.vertex_count = static_cast<int>(st.vertices.size());
                int ext = 0;
                for (const auto& e : pairing.edges)
                    if (e.field.node < ne || e.conj.node < ne) ++ext;
                d.external_edges = ext;
                d.internal_edges = static_cast<int>(pairing.edges.size()) - ext;
                d.nu_order = d.external_edges + d.internal_edges - d.vertex_count;
                d.loops = 0;
                d.coefficient = 1.0 / mult_fact;
                it = groups.emplace(sig, Group{std::move(d), 0}).first;
            }
            it->second.count += 1;
        }
    }

    std::vector<Diagram> result;
    result.reserve(groups.size());
    for (auto& [sig, g] : groups) {
        g.rep.coefficient *= static_cast<double>(g.count);
        result.push_back(std::move(g.rep));
    }
    // Stable presentation order: fewest vertices first, then signature.
    std::sort(result.begin(), result.end(), [](const Diagram& a, const Diagram& b) {
        if (a.vertex_count != b.vertex_count) return a.vertex_count < b.vertex_count;
        return a.signature < b.signature;
    });
    return result;
}

namespace {

cplx expm1_complex(cplx x) {
    if (std::abs(x) < 1e-3) {
        // x (1 + x/2 (1 + x/3 (1 + x/4 (1 + x/5))))
        return x * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0))));
    }
    return std::exp(x) - 1.0;
}

// integral of e^{mu t} dt over [lo, hi]
cplx exp_integral(cplx mu, double lo, double hi) {
    const cplx x = mu * (hi - lo);
    return std::exp(mu * lo) * (hi - lo) *
           (std::abs(x) < 1e-3 ? (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0)))
                               : expm1_complex(x) / x);
}

struct NodeTime {
    bool fixed{false};
    double time{0.0};
    int var{-1};  // integration variable index when not fixed
};

} // namespace

cplx evaluate_diagram(const Diagram& d, const DiagonalFrame& frame,
                      const std::array<cplx, 3>& initial_uvw, double T) {
    const auto& catalog = vertex_catalog();
    const int ne = static_cast<int>(d.endings.size());
    for (const auto& e : d.endings)
        if (!(e.time > 0.0) || e.time > T)
            throw ConfigError("evaluate_diagram: ending times must lie in (0, T]");

    const int n_nodes = ne + d.vertex_count;
    std::vector<NodeTime> times(n_nodes);
    for (int e = 0; e < ne; ++e) times[e] = {true, d.endings[e].time, -1};

    // Initial vertices sit at t = 0; the others start as integration variables
    // and may be pinned by a noise pairing with an xi ending.
    int n_vars = 0;
    std::vector<int> var_of_vertex(d.vertex_count, -1);
    for (int vi = 0; vi < d.vertex_count; ++vi) {
        const VertexKind& k = catalog[d.vertex_kinds[vi]];
        if (k.type == VertexKind::Type::Initial)
            times[ne + vi] = {true, 0.0, -1};
        else
            times[ne + vi] = {false, 0.0, -1};
    }

    // Collapse noise deltas: each noise edge identifies its two leg times.
    std::vector<std::pair<int, int>> var_groups;  // pair of node ids (or -1)
    for (const auto& e : d.edges) {
        if (!e.noise) continue;
        const int a = e.field.node;
        const int b = e.conj.node;
        const bool a_fixed = times[a].fixed;
        const bool b_fixed = times[b].fixed;
        if (a_fixed && b_fixed) {
            if (times[a].time != times[b].time) return cplx(0.0, 0.0);  // delta mismatch
            throw UnsupportedDiagramError(
                "evaluate_diagram: delta between two fixed times (xi-xi ending pair)");
        } else if (a_fixed || b_fixed) {
            const int fx = a_fixed ? a : b;
            const int fr = a_fixed ? b : a;
            times[fr] = {true, times[fx].time, -1};
        } else {
            const int var = n_vars++;
            times[a].var = var;
            times[b].var = var;
        }
    }
    // Unpaired-noise vertices cannot occur (legs are all paired), but a vertex
    // whose noise partner fixed it keeps fixed = true from above.
    for (int vi = 0; vi < d.vertex_count; ++vi) {
        NodeTime& nt = times[ne + vi];
        if (!nt.fixed && nt.var < 0)
            throw UnsupportedDiagramError("evaluate_diagram: dangling integration time");
    }

    // Constant weights.
    cplx value(d.coefficient, 0.0);
    for (int vi = 0; vi < d.vertex_count; ++vi) {
        const VertexKind& k = catalog[d.vertex_kinds[vi]];
        switch (k.type) {
            case VertexKind::Type::Initial:
                value *= initial_uvw[static_cast<int>(k.conj)];
                break;
            case VertexKind::Type::CubicNoise:
                value *= frame.alpha;
                break;
            case VertexKind::Type::LinearNoise:
                value *= (k.conj == Flavor::U ? frame.kappa1
                          : k.conj == Flavor::V ? frame.kappa2
                                                : frame.kappa3);
                break;
        }
    }
    if (value == cplx(0.0, 0.0)) return value;

    const auto lambda_of = [&](Flavor f) -> cplx {
        switch (f) {
            case Flavor::U: return frame.lambda1;
            case Flavor::V: return frame.lambda2;
            case Flavor::W: return frame.lambda3;
            default: throw UnsupportedDiagramError("propagator flavor");
        }
    };

    // Field-conjugate edges: fixed-fixed pairs multiply in directly (with the
    // strict Theta), edges touching a variable accumulate its exponent rate
    // and bounds.
    std::vector<cplx> var_rate(n_vars, cplx(0.0, 0.0));
    std::vector<double> var_upper(n_vars, std::numeric_limits<double>::infinity());
    std::vector<double> var_lower(n_vars, 0.0);

    for (const auto& e : d.edges) {
        if (e.noise) continue;
        const NodeTime& tf = times[e.field.node];
        const NodeTime& tc = times[e.conj.node];
        const cplx lam = lambda_of(e.flavor);
        if (tf.fixed && tc.fixed) {
            if (!(tf.time > tc.time)) return cplx(0.0, 0.0);  // Theta(0) = 0
            value *= std::exp(lam * (tf.time - tc.time));
        } else if (tf.fixed) {
            const int v = tc.var;
            var_rate[v] -= lam;
            value *= std::exp(lam * tf.time);
            var_upper[v] = std::min(var_upper[v], tf.time);
        } else if (tc.fixed) {
            const int v = tf.var;
            var_rate[v] += lam;
            value *= std::exp(-lam * tc.time);
            var_lower[v] = std::max(var_lower[v], tc.time);
        } else {
            throw UnsupportedDiagramError(
                "evaluate_diagram: chained integration variables are not supported at tree "
                "level with these endings");
        }
    }

    for (int v = 0; v < n_vars; ++v) {
        if (!(var_upper[v] > var_lower[v])) return cplx(0.0, 0.0);
        value *= exp_integral(var_rate[v], var_lower[v], var_upper[v]);
    }
    return value;
}

std::string dump_diagram(const Diagram& d) {
    const auto& catalog = vertex_catalog();
    std::ostringstream os;
    os << "diagram";
    os << " nu_order=" << d.nu_order << " loops=" << d.loops << " coeff=" << d.coefficient
       << "\n";
    os << "  endings:";
    for (const auto& e : d.endings) os << " " << flavor_name(e.flavor) << "(t=" << e.time << ")";
    os << "\n  vertices:";
    if (d.vertex_kinds.empty()) os << " (none)";
    for (std::size_t i = 0; i < d.vertex_kinds.size(); ++i)
        os << " [" << i << "]" << catalog[d.vertex_kinds[i]].label;
    os << "\n  edges:";
    const int ne = static_cast<int>(d.endings.size());
    auto node_name = [&](int node) {
        if (node < ne) return std::string("end") + std::to_string(node);
        return std::string("vtx") + std::to_string(node - ne);
    };
    for (const auto& e : d.edges) {
        os << " " << node_name(e.field.node) << (e.noise ? "~" : "->")
           << node_name(e.conj.node);
        if (!e.noise) os << "(" << flavor_name(e.flavor) << ")";
    }
    os << "\n  signature: " << d.signature << "\n";
    return os.str();
}

// ---- correlators ------------------------------------------------------------

namespace {

cplx sinhc(cplx x) {
    if (std::abs(x) < 1e-4) {
        const cplx x2 = x * x;
        return 1.0 + x2 / 6.0 * (1.0 + x2 / 20.0);
    }
    return std::sinh(x) / x;
}

std::array<cplx, 3> initial_uvw_of(const BlochState& initial, const DiagonalFrame& frame,
                                   const ModelParams& params) {
    return to_diagonal(initial, frame, params);
}

double real_checked(cplx v, const char* who) {
    const double scale = std::max(1.0, std::abs(v));
    if (std::abs(v.imag()) > kImagTol * scale)
        throw NumericalConsistencyError(std::string(who) + ": residual imaginary part " +
                                        std::to_string(v.imag()));
    return v.real();
}

cplx flavor_pair_sum(Flavor f1, double t1, Flavor f2, double t2, const DiagonalFrame& frame,
                     const std::array<cplx, 3>& init, double T) {
    const std::vector<Ending> endings{{f1, t1}, {f2, t2}};
    cplx total(0.0, 0.0);
    for (const auto& d : enumerate_tree(endings)) total += evaluate_diagram(d, frame, init, T);
    return total;
}

} // namespace

double mean_z(double t, const BlochState& initial, const ModelParams& params) {
    if (t < 0.0) throw ConfigError("mean_z: t must be >= 0");
    const double g = params.total_dephasing();
    const cplx omega = std::sqrt(cplx(g * g - 4.0 * params.delta * params.delta, 0.0));
    const cplx half = omega * t / 2.0;
    const cplx bracket = initial.z * std::cosh(half) +
                         (initial.z * g - 2.0 * params.delta * initial.y) * (t / 2.0) *
                             sinhc(half);
    return real_checked(std::exp(-g * t / 2.0) * bracket, "mean_z");
}

double corr_z_xi(double t1, double t2, const BlochState& initial, const ModelParams& params) {
    if (t1 <= t2) return 0.0;  // noise is uncorrelated with earlier states
    const DiagonalFrame frame = eigensystem(params);
    const auto init = initial_uvw_of(initial, frame, params);
    const cplx vI = init[1], wI = init[2];
    const cplx l2 = frame.lambda2, l3 = frame.lambda3;
    const double a = frame.alpha;

    const cplx line_v =
        std::exp(l2 * t1) * (frame.kappa2 * std::exp(-l2 * t2) + a * vI * vI * std::exp(l2 * t2) +
                             a * vI * wI * std::exp(l3 * t2));
    const cplx line_w =
        std::exp(l3 * t1) * (frame.kappa3 * std::exp(-l3 * t2) + a * wI * wI * std::exp(l3 * t2) +
                             a * vI * wI * std::exp(l2 * t2));
    return real_checked(line_v + line_w, "corr_z_xi");
}

double corr_zz(double t1, double t2, const BlochState& initial, const ModelParams& params,
               double T) {
    if (params.delta == 0.0)
        throw FrameDegenerateError("corr_zz: delta = 0 (use the conditioned-statistics module)");
    const DiagonalFrame frame = eigensystem(params);
    const auto init = initial_uvw_of(initial, frame, params);
    cplx total(0.0, 0.0);
    for (Flavor f1 : {Flavor::V, Flavor::W})
        for (Flavor f2 : {Flavor::V, Flavor::W})
            total += flavor_pair_sum(f1, t1, f2, t2, frame, init, T);
    return real_checked(total, "corr_zz");
}

double corr_yz(double t1, double t2, const BlochState& initial, const ModelParams& params,
               double T) {
    if (params.delta == 0.0)
        throw FrameDegenerateError("corr_yz: delta = 0 (use the conditioned-statistics module)");
    const DiagonalFrame frame = eigensystem(params);
    const auto init = initial_uvw_of(initial, frame, params);
    cplx total(0.0, 0.0);
    total += frame.beta1() * flavor_pair_sum(Flavor::V, t1, Flavor::V, t2, frame, init, T);
    total += frame.beta1() * flavor_pair_sum(Flavor::V, t1, Flavor::W, t2, frame, init, T);
    total += frame.beta2() * flavor_pair_sum(Flavor::W, t1, Flavor::V, t2, frame, init, T);
    total += frame.beta2() * flavor_pair_sum(Flavor::W, t1, Flavor::W, t2, frame, init, T);
    return real_checked(total, "corr_yz");
}

double variance_tree(double t, const BlochState& initial, const ModelParams& params, double T) {
    const double m = mean_z(t, initial, params);
    return corr_zz(t, t, initial, params, T) - m * m;
}

double variance_long_time_limit(const ModelParams& params) {
    const double g = params.total_dephasing();
    const double d = params.delta;
    if (d == 0.0) throw FrameDegenerateError("variance_long_time_limit: delta = 0");
    return (g * g + d * d) / (2.0 * g * d * d * params.tau_m);
}

} // namespace qpath
