#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qpath/measurement.hpp"

using namespace qpath;

namespace {

ModelParams qnd_params(double dt = 0.006, std::size_t n = 100) {
    ModelParams p;
    p.tau_m = 1.0;
    p.dt = dt;
    p.n_steps = n;
    return p;
}

} // namespace

TEST_CASE("readout_pdf: peak value, symmetry, positivity") {
    const auto p = qnd_params();
    CHECK(readout_pdf(1.0, 1.0, p) ==
          doctest::Approx(std::sqrt(p.dt / (2.0 * M_PI * p.tau_m))).epsilon(1e-14));
    for (double r : {-3.0, -0.7, 0.0, 0.4, 5.0}) {
        CHECK(readout_pdf(r, 0.0, p) == doctest::Approx(readout_pdf(-r, 0.0, p)).epsilon(1e-14));
        CHECK(readout_pdf(r, 0.3, p) > 0.0);
    }
    CHECK_THROWS_AS(readout_pdf(0.0, 1.5, p), UnphysicalStateError);
}

TEST_CASE("readout_pdf: quadrature normalization") {
    const auto p = qnd_params();
    const double span = 8.0 * std::sqrt(p.tau_m / p.dt);
    for (double z : {-0.9, 0.0, 0.9}) {
        const double total = oracles::integrate(
            [&](double r) { return readout_pdf(r, z, p); }, -span, span, 1e-12);
        CHECK(std::abs(total - 1.0) < 1e-8);
    }
}

TEST_CASE("sample_readout: pointer state mean and CLT band at z = 0") {
    const auto p = qnd_params();
    Rng rng = make_rng(42);

    const int n1 = 200000;
    double acc = 0.0;
    for (int i = 0; i < n1; ++i) acc += sample_readout(1.0, p, rng);
    const double sigma = std::sqrt(p.tau_m / p.dt);
    CHECK(std::abs(acc / n1 - 1.0) < 4.0 * sigma / std::sqrt(double(n1)));

    const int n2 = 1000000;
    acc = 0.0;
    for (int i = 0; i < n2; ++i) acc += sample_readout(0.0, p, rng);
    CHECK(std::abs(acc / n2) < 4.0 * std::sqrt(p.tau_m / p.dt + 1.0) / std::sqrt(double(n2)));
}

TEST_CASE("sample_readout: branch frequency is Bernoulli((1+z)/2)") {
    // Narrow detector noise separates the two Gaussians, so sign(r) identifies
    // the branch with error probability ~ 1e-23.
    ModelParams p = qnd_params();
    p.dt = 100.0;
    Rng rng = make_rng(4242);
    const int n = 1000000;
    int positive = 0;
    for (int i = 0; i < n; ++i)
        if (sample_readout(0.5, p, rng) > 0.0) ++positive;
    CHECK(std::abs(double(positive) / n - 0.75) < 0.002);
}

TEST_CASE("update_exact: plain measurement matches the atanh closed form") {
    const auto p = qnd_params();
    Rng rng = make_rng(3);
    std::uniform_real_distribution<double> uz(-0.99, 0.99);
    std::normal_distribution<double> ur(0.0, std::sqrt(p.tau_m / p.dt));
    for (int i = 0; i < 200; ++i) {
        const double z = uz(rng);
        const double r = ur(rng);
        const BlochState out =
            update_exact(BlochState{0, 0, z}, r, p, 0.0, UpdateScheme::exact_operator());
        const double expected = std::tanh(std::atanh(z) + r * p.dt / p.tau_m);
        CHECK(std::abs(out.z - expected) < 1e-12);
    }
}

TEST_CASE("update_exact: pointer states are fixed points") {
    const auto p = qnd_params();
    for (double z : {1.0, -1.0}) {
        for (double r : {-20.0, 0.0, 13.0}) {
            const BlochState out =
                update_exact(BlochState{0, 0, z}, r, p, 0.0, UpdateScheme::exact_operator());
            CHECK(out.z == doctest::Approx(z).epsilon(1e-12));
        }
    }
}

TEST_CASE("update_exact: purity is preserved for gamma = 0") {
    ModelParams p = qnd_params(1e-3);
    p.epsilon = 0.7;
    Rng rng = make_rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    std::normal_distribution<double> ur(0.0, std::sqrt(p.tau_m / p.dt));
    for (double delta : {0.0, 3.0, 20.0 * M_PI}) {
        for (int i = 0; i < 100; ++i) {
            const double th = u(rng);
            const double ph = u(rng);
            BlochState s{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                         std::cos(th)};
            const BlochState out =
                update_exact(s, ur(rng), p, delta, UpdateScheme::exact_operator());
            CHECK(std::abs(std::sqrt(out.norm2()) - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("update_exact: split-operator converges to the exact composition") {
    ModelParams p = qnd_params(1e-4);
    p.delta = 1.0;  // delta * dt = 1e-4
    Rng rng = make_rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // Readouts within two detector standard deviations (sigma = 100 here).
    for (const double r : {-200.0, -75.0, 0.0, 60.0, 150.0, 200.0}) {
        for (int i = 0; i < 20; ++i) {
            BlochState s{0.3 * u(rng), 0.3 * u(rng), 0.8 * u(rng)};
            const BlochState a = update_exact(s, r, p, p.delta, UpdateScheme::exact_operator());
            const BlochState b =
                update_exact(s, r, p, p.delta, UpdateScheme::split_operator(10));
            CHECK(std::abs(a.x - b.x) < 1e-6);
            CHECK(std::abs(a.y - b.y) < 1e-6);
            CHECK(std::abs(a.z - b.z) < 1e-6);
        }
    }
}

TEST_CASE("update_exact: norm collapse raises UnderflowError") {
    ModelParams p = qnd_params(1.0);
    CHECK_THROWS_AS(
        update_exact(BlochState{0, 0, -1.0}, 720.0, p, 0.0, UpdateScheme::exact_operator()),
        UnderflowError);
}

TEST_CASE("update_ito: drift-free points and pole freezing") {
    ModelParams p = qnd_params(1e-3);
    const BlochState origin =
        update_ito(BlochState{0, 0, 0.4}, 0.0, ModelParams{1.0, 1e-3, 0.0, 0.0, 0.0, 1}, 0.0);
    // xi = 0, delta = 0, x = y = 0: only the -Gamma x / -Gamma y terms could
    // move the state and they vanish here; z has no drift.
    CHECK(origin.z == doctest::Approx(0.4));
    CHECK(origin.x == 0.0);

    for (double xi : {-30.0, 0.0, 12.0}) {
        const BlochState out = update_ito(BlochState{0, 0, 1.0}, xi, p, 0.0);
        CHECK(out.z == doctest::Approx(1.0).epsilon(1e-12));
    }
    (void)p;
}

TEST_CASE("update_ito: z is a martingale for delta = 0") {
    ModelParams p = qnd_params(1e-3, 100);
    Rng rng = make_rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n_traj = 10000;
    const double z0 = 0.3;
    std::vector<double> finals(n_traj);
    for (int i = 0; i < n_traj; ++i) {
        BlochState s{0, 0, z0};
        for (std::size_t k = 0; k < p.n_steps; ++k)
            s = update_ito(s, normal(rng) / std::sqrt(p.dt), p, 0.0);
        finals[i] = s.z;
    }
    const double m = oracles::mean(finals);
    const double se = std::sqrt(oracles::variance(finals) / n_traj);
    CHECK(std::abs(m - z0) < 4.0 * se);
}

TEST_CASE("update_ito: overshoot beyond tolerance is a step-size error") {
    ModelParams p = qnd_params(0.5);
    CHECK_THROWS_AS(update_ito(BlochState{0, 0, 0.2}, 40.0, p, 0.0), StepSizeError);
}

TEST_CASE("update_stratonovich: quiet readout and dephasing factor") {
    ModelParams p = qnd_params(1e-2);
    const BlochState same = update_stratonovich(BlochState{0.2, -0.1, 0.5}, 0.0,
                                                ModelParams{1.0, 1e-2, 0.0, 0.0, 0.0, 1}, 0.0);
    CHECK(same.x == doctest::Approx(0.2));
    CHECK(same.y == doctest::Approx(-0.1));
    CHECK(same.z == doctest::Approx(0.5));

    ModelParams pg = p;
    pg.gamma = 0.8;
    const BlochState dec = update_stratonovich(BlochState{0.2, -0.1, 0.5}, 0.0, pg, 0.0);
    CHECK(dec.x == doctest::Approx(0.2 * (1.0 - pg.gamma * pg.dt)).epsilon(1e-14));
    CHECK(dec.y == doctest::Approx(-0.1 * (1.0 - pg.gamma * pg.dt)).epsilon(1e-14));
}

TEST_CASE("update_stratonovich: second-order agreement with the exact step") {
    // Richardson: the one-step defect against the exact composition should
    // shrink by ~4x when dt halves.
    const double z = 0.35;
    const double r = 2.1;
    auto defect = [&](double dt) {
        ModelParams p = qnd_params(dt);
        const BlochState a =
            update_exact(BlochState{0, 0, z}, r, p, 0.0, UpdateScheme::exact_operator());
        const BlochState b = update_stratonovich(BlochState{0, 0, z}, r, p, 0.0);
        return std::abs(a.z - b.z);
    };
    const double e1 = defect(1e-3);
    const double e2 = defect(5e-4);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("action_increment: reference values and log-likelihood identity") {
    const auto p = qnd_params();
    CHECK(action_increment(BlochState{0, 0, 1.0}, 1.0, p) == 0.0);
    CHECK(action_increment(BlochState{0, 0, 0.0}, 0.0, p) ==
          doctest::Approx(-p.dt / (2.0 * p.tau_m)).epsilon(1e-14));

    // Sum over a trajectory equals the log of the single-Gaussian readout
    // likelihood product plus n/2 ln(2 pi tau_m / dt).
    Rng rng = make_rng(8);
    std::uniform_real_distribution<double> uz(-0.9, 0.9);
    std::normal_distribution<double> ur(0.0, std::sqrt(p.tau_m / p.dt));
    double action_sum = 0.0;
    double loglik = 0.0;
    const int n = 200;
    for (int k = 0; k < n; ++k) {
        const double z = uz(rng);
        const double r = ur(rng);
        action_sum += action_increment(BlochState{0, 0, z}, r, p);
        const double log_pdf = 0.5 * std::log(p.dt / (2.0 * M_PI * p.tau_m)) -
                               p.dt * (r * r - 2.0 * r * z + 1.0) / (2.0 * p.tau_m);
        loglik += log_pdf;
    }
    const double offset = n * 0.5 * std::log(2.0 * M_PI * p.tau_m / p.dt);
    CHECK(action_sum == doctest::Approx(loglik + offset).epsilon(1e-10));
}
