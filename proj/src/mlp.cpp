#include "qpath/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpath {

namespace {

void require_direct_linear(const FeedbackSpec& fb, const char* who) {
    if (fb.kind != FeedbackSpec::Kind::DirectLinear)
        throw ConfigError(std::string(who) + ": direct-linear feedback required");
}

struct Ode2 {
    double theta;
    double p;
};

Ode2 rhs(const Ode2& y, const ModelParams& params, const FeedbackSpec& fb) {
    const double tm = params.tau_m;
    const double s = std::sin(y.theta);
    const double c = std::cos(y.theta);
    const double r = y.p * fb.delta1 * tm - y.p * s + c;
    return Ode2{fb.delta0 + fb.delta1 * r - r * s / tm, y.p * r * c / tm + r * s / tm};
}

// Dormand-Prince 5(4) step; returns the 5th-order solution and the embedded
// error estimate.
struct DpStep {
    Ode2 y5;
    double err;
};

DpStep dp45(const Ode2& y, double h, const ModelParams& params, const FeedbackSpec& fb) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto axpy = [](const Ode2& base, double hh, std::initializer_list<std::pair<double, const Ode2*>> terms) {
        Ode2 out = base;
        for (const auto& [c, k] : terms) {
            out.theta += hh * c * k->theta;
            out.p += hh * c * k->p;
        }
        return out;
    };

    const Ode2 k1 = rhs(y, params, fb);
    const Ode2 k2 = rhs(axpy(y, h, {{a21, &k1}}), params, fb);
    const Ode2 k3 = rhs(axpy(y, h, {{a31, &k1}, {a32, &k2}}), params, fb);
    const Ode2 k4 = rhs(axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}), params, fb);
    const Ode2 k5 =
        rhs(axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}), params, fb);
    const Ode2 k6 = rhs(
        axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}), params, fb);
    const Ode2 y5 = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const Ode2 k7 = rhs(y5, params, fb);

    const double et = h * (e1 * k1.theta + e3 * k3.theta + e4 * k4.theta + e5 * k5.theta +
                           e6 * k6.theta + e7 * k7.theta);
    const double ep =
        h * (e1 * k1.p + e3 * k3.p + e4 * k4.p + e5 * k5.p + e6 * k6.p + e7 * k7.p);
    return DpStep{y5, std::hypot(et, ep)};
}

constexpr double kDivergenceGuard = 1e8;

// Adaptive integration from t0 to t1; returns false on divergence.
bool integrate(Ode2& y, double t0, double t1, const ModelParams& params, const FeedbackSpec& fb,
               double abs_tol, double rel_tol) {
    double t = t0;
    double h = (t1 - t0) / 64.0;
    const double h_min = (t1 - t0) * 1e-14;
    int rejects = 0;
    while (t < t1) {
        h = std::min(h, t1 - t);
        const DpStep step = dp45(y, h, params, fb);
        const double scale =
            abs_tol + rel_tol * std::max({std::abs(y.theta), std::abs(y.p),
                                          std::abs(step.y5.theta), std::abs(step.y5.p)});
        if (!std::isfinite(step.err) || !std::isfinite(step.y5.theta) ||
            !std::isfinite(step.y5.p))
            return false;
        if (step.err <= scale) {
            t += h;
            y = step.y5;
            if (std::abs(y.p) > kDivergenceGuard || std::abs(y.theta) > kDivergenceGuard)
                return false;
            rejects = 0;
        } else if (++rejects > 200) {
            return false;
        }
        const double factor =
            step.err > 0 ? 0.9 * std::pow(scale / step.err, 0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        if (h < h_min) return false;
    }
    return true;
}

} // namespace

ExtremalRates extremal_rhs(const PhasePoint& pt, const ModelParams& params,
                           const FeedbackSpec& fb) {
    require_direct_linear(fb, "extremal_rhs");
    const Ode2 y{pt.theta, pt.p_theta};
    const Ode2 d = rhs(y, params, fb);
    const double r = pt.p_theta * fb.delta1 * params.tau_m - pt.p_theta * std::sin(pt.theta) +
                     std::cos(pt.theta);
    return ExtremalRates{d.theta, d.p, r};
}

double stochastic_hamiltonian(const PhasePoint& pt, const ModelParams& params,
                              const FeedbackSpec& fb) {
    require_direct_linear(fb, "stochastic_hamiltonian");
    const double tm = params.tau_m;
    const double r = pt.p_theta * fb.delta1 * tm + std::cos(pt.theta) -
                     pt.p_theta * std::sin(pt.theta);
    return r * r / (2.0 * tm) + pt.p_theta * fb.delta0 - 1.0 / (2.0 * tm);
}

double critical_energy(const ModelParams& params) { return -1.0 / (2.0 * params.tau_m); }

PortraitCurve portrait_curve(double E, const ModelParams& params, const FeedbackSpec& fb,
                             int branch_sign, std::size_t n_theta, double theta_min,
                             double theta_max) {
    require_direct_linear(fb, "portrait_curve");
    if (fb.delta0 != 0.0)
        throw ConfigError("portrait_curve: closed-form curve requires delta0 = 0");
    const double tm = params.tau_m;
    const double disc = 1.0 + 2.0 * E * tm;
    if (disc < 0.0)
        throw NoRealCurveError("portrait_curve: E below the critical energy -1/(2 tau_m)");
    const double root = std::sqrt(disc) * (branch_sign >= 0 ? 1.0 : -1.0);
    const double s = fb.delta1 * tm;

    PortraitCurve curve;
    curve.E = E;
    curve.branch_sign = branch_sign >= 0 ? +1 : -1;

    if (std::abs(s) <= 1.0) {
        const double base = std::asin(s);
        // sin(theta) = s at base + 2 pi j and (pi - base) + 2 pi j
        for (int j = -2; j < 4; ++j) {
            for (double cand : {base + 2.0 * M_PI * j, M_PI - base + 2.0 * M_PI * j})
                if (cand > theta_min && cand < theta_max) curve.poles.push_back(cand);
        }
        std::sort(curve.poles.begin(), curve.poles.end());
    }

    const double dtheta = (theta_max - theta_min) / static_cast<double>(n_theta - 1);
    std::vector<PhasePoint> segment;
    const double pole_window = 2.0 * dtheta;
    auto near_pole = [&](double th) {
        for (double p : curve.poles)
            if (std::abs(th - p) < pole_window) return true;
        return false;
    };
    for (std::size_t i = 0; i < n_theta; ++i) {
        const double th = theta_min + dtheta * static_cast<double>(i);
        const double denom = s - std::sin(th);
        if (near_pole(th) || denom == 0.0) {
            if (segment.size() > 1) curve.segments.push_back(segment);
            segment.clear();
            continue;
        }
        segment.push_back(PhasePoint{th, (-std::cos(th) + root) / denom});
    }
    if (segment.size() > 1) curve.segments.push_back(segment);
    return curve;
}

std::vector<double> attractors(const ModelParams& params, const FeedbackSpec& fb) {
    require_direct_linear(fb, "attractors");
    if (fb.delta0 != 0.0)
        throw ConfigError("attractors: defined for pure linear feedback (delta0 = 0)");
    const double s = fb.delta1 * params.tau_m;
    if (std::abs(s) > 1.0) return {};
    const double a = std::asin(std::abs(s));
    if (s == 0.0) return {0.0, M_PI};
    if (s == 1.0) return {M_PI / 2.0};
    if (s == -1.0) return {3.0 * M_PI / 2.0};
    if (s > 0.0) return {a, M_PI - a};
    return {M_PI + a, 2.0 * M_PI - a};
}

MlpResult solve_mlp(const MlpBoundary& boundary, const ModelParams& params,
                    const FeedbackSpec& fb, const MlpScan& scan) {
    require_direct_linear(fb, "solve_mlp");
    if (!(boundary.T > 0.0)) throw ConfigError("solve_mlp: T must be > 0");
    if (boundary.theta_final.has_value() == boundary.p_final_zero)
        throw ConfigError("solve_mlp: set exactly one of theta_final or p_final_zero");

    const auto residual = [&](double p0) -> double {
        Ode2 y{boundary.theta_initial, p0};
        if (!integrate(y, 0.0, boundary.T, params, fb, scan.abs_tol, scan.rel_tol))
            return std::numeric_limits<double>::quiet_NaN();
        return boundary.p_final_zero ? y.p : y.theta - *boundary.theta_final;
    };

    MlpResult result;
    result.residual_scan.reserve(scan.n_scan);
    for (std::size_t i = 0; i < scan.n_scan; ++i) {
        const double p0 = scan.p0_min + (scan.p0_max - scan.p0_min) * static_cast<double>(i) /
                                            static_cast<double>(scan.n_scan - 1);
        result.residual_scan.emplace_back(p0, residual(p0));
    }

    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < result.residual_scan.size(); ++i) {
        auto [pa, ra] = result.residual_scan[i];
        auto [pb, rb] = result.residual_scan[i + 1];
        if (!std::isfinite(ra) || !std::isfinite(rb)) continue;
        if (ra == 0.0) {
            roots.push_back(pa);
            continue;
        }
        if (ra * rb >= 0.0) continue;
        for (int it = 0; it < 80 && pb - pa > 1e-13 * std::max(1.0, std::abs(pa)); ++it) {
            const double pm = 0.5 * (pa + pb);
            const double rm = residual(pm);
            if (!std::isfinite(rm)) break;
            if (rm == 0.0) {
                pa = pb = pm;
                break;
            }
            if (ra * rm < 0.0) {
                pb = pm;
            } else {
                pa = pm;
                ra = rm;
            }
        }
        roots.push_back(0.5 * (pa + pb));
    }

    // Deduplicate roots that collapsed to the same branch.
    std::sort(roots.begin(), roots.end());
    std::vector<double> unique_roots;
    for (double r : roots)
        if (unique_roots.empty() || std::abs(r - unique_roots.back()) >
                                        1e-7 * std::max(1.0, std::abs(r)))
            unique_roots.push_back(r);

    int branch_id = 0;
    for (double p0 : unique_roots) {
        MlpSolution sol;
        sol.p0 = p0;
        sol.branch_id = branch_id++;
        const std::size_t m = scan.n_output;
        sol.t.resize(m + 1);
        sol.theta.resize(m + 1);
        sol.p_theta.resize(m + 1);
        sol.r.resize(m + 1);

        Ode2 y{boundary.theta_initial, p0};
        bool ok = true;
        double e0 = stochastic_hamiltonian({y.theta, y.p}, params, fb);
        double max_drift = 0.0;
        for (std::size_t k = 0; k <= m; ++k) {
            const double tk = boundary.T * static_cast<double>(k) / static_cast<double>(m);
            if (k > 0) {
                const double tkm = boundary.T * static_cast<double>(k - 1) /
                                   static_cast<double>(m);
                if (!integrate(y, tkm, tk, params, fb, scan.abs_tol, scan.rel_tol)) {
                    ok = false;
                    break;
                }
            }
            sol.t[k] = tk;
            sol.theta[k] = y.theta;
            sol.p_theta[k] = y.p;
            sol.r[k] = extremal_rhs({y.theta, y.p}, params, fb).r;
            const double e = stochastic_hamiltonian({y.theta, y.p}, params, fb);
            max_drift = std::max(max_drift, std::abs(e - e0) / std::max(1e-12, std::abs(e0)));
        }
        if (!ok) continue;
        sol.energy = e0;
        sol.energy_drift = max_drift;

        double ll = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double h = sol.t[k + 1] - sol.t[k];
            auto f = [&](std::size_t i) {
                return -(sol.r[i] * sol.r[i] - 2.0 * sol.r[i] * std::cos(sol.theta[i]) + 1.0) /
                       (2.0 * params.tau_m);
            };
            ll += 0.5 * h * (f(k) + f(k + 1));
        }
        sol.log_likelihood = ll;
        result.branches.push_back(std::move(sol));
    }

    std::sort(result.branches.begin(), result.branches.end(),
              [](const MlpSolution& a, const MlpSolution& b) {
                  return a.log_likelihood > b.log_likelihood;
              });
    return result;
}

DiscreteExtremalResult discrete_extremal_step(double q, double p, double r,
                                              const ModelParams& params) {
    const double a = r * params.dt / params.tau_m;
    const double u = std::atanh(q);
    const double q_next = std::tanh(u + a);

    DiscreteExtremalResult out;
    out.q_next = q_next;
    // backward map: p_{k-1} = p_k dE/dq + d(ln P)/dq
    out.p_prev = p * (1.0 - q_next * q_next) / (1.0 - q * q) + params.dt * r / params.tau_m;
    // stationarity of p E + ln P over r, scaled by tau_m/dt
    out.r_residual = p * (1.0 - q_next * q_next) - (r - q);
    return out;
}

} // namespace qpath
