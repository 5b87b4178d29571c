#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <random>

#include "qpath/model.hpp"

using namespace qpath;

namespace {

ModelParams params_with(double tau_m, double gamma, double delta) {
    ModelParams p;
    p.tau_m = tau_m;
    p.gamma = gamma;
    p.delta = delta;
    p.dt = 1e-3;
    p.n_steps = 100;
    return p;
}

BlochState random_ball_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        BlochState s{u(rng), u(rng), u(rng)};
        if (s.norm2() <= 1.0) return s;
    }
}

} // namespace

TEST_CASE("eigensystem: QND limit delta = 0") {
    const auto f = eigensystem(params_with(1.0, 0.0, 0.0));
    CHECK(f.omega.real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(f.omega.imag() == doctest::Approx(0.0));
    CHECK(f.lambda1.real() == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(f.lambda2.real() == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(std::abs(f.lambda3) == doctest::Approx(0.0));
    CHECK(!f.has_beta());
    CHECK_THROWS_AS((void)f.beta1(), FrameDegenerateError);
}

TEST_CASE("eigensystem: low-efficiency regime eta = 0.02") {
    // eta = 1/(2 tau_m Gamma) = 0.02 at tau_m = 1 means Gamma = 25.
    const auto p = params_with(1.0, 24.5, 20.0 * M_PI);
    CHECK(p.total_dephasing() == doctest::Approx(25.0));
    CHECK(p.efficiency() == doctest::Approx(0.02));
    const auto f = eigensystem(p);
    CHECK(f.lambda1.real() == doctest::Approx(-25.0));
}

TEST_CASE("eigensystem: underdamped Gamma=1, delta=1 gives Omega = i sqrt(3)") {
    const auto f = eigensystem(params_with(1.0, 0.5, 1.0));
    CHECK(f.omega.real() == doctest::Approx(0.0));
    CHECK(f.omega.imag() == doctest::Approx(std::sqrt(3.0)));
    CHECK(f.lambda2.real() == doctest::Approx(-0.5));
    CHECK(f.lambda2.imag() == doctest::Approx(-std::sqrt(3.0) / 2.0));
}

TEST_CASE("eigensystem: eigenvalue sum and product identities") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    for (int i = 0; i < 50; ++i) {
        const double tm = u(rng);
        const double gamma = u(rng);
        const double delta = u(rng);
        const auto p = params_with(tm, gamma, delta);
        if (std::abs(p.total_dephasing() - 2.0 * delta) < 1e-6) continue;
        const auto f = eigensystem(p);
        const cplx sum = f.lambda2 + f.lambda3;
        const cplx prod = f.lambda2 * f.lambda3;
        CHECK(std::abs(sum - cplx(-p.total_dephasing())) < 1e-10 * p.total_dephasing());
        CHECK(std::abs(prod - cplx(delta * delta)) < 1e-9 * std::max(1.0, delta * delta));
        CHECK(std::abs(f.kappa1) == 0.0);
    }
}

TEST_CASE("eigensystem: Omega = 0 is rejected") {
    CHECK_THROWS_AS(eigensystem(params_with(1.0, 0.5, 0.5)), DegenerateEigenvalueError);
}

TEST_CASE("to_diagonal: origin maps to origin and v + w = z") {
    const auto p = params_with(1.0, 24.5, 20.0 * M_PI);
    const auto f = eigensystem(p);
    const auto origin = to_diagonal(BlochState{0, 0, 0}, f, p);
    CHECK(std::abs(origin[0]) == 0.0);
    CHECK(std::abs(origin[1]) == 0.0);
    CHECK(std::abs(origin[2]) == 0.0);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const BlochState s = random_ball_state(rng);
        const auto uvw = to_diagonal(s, f, p);
        CHECK(std::abs(uvw[1] + uvw[2] - cplx(s.z)) < 1e-12);
    }
}

TEST_CASE("to_diagonal: forward matrix of the transform recovers the state") {
    // Apply the forward matrix (x = u, y = b1 v + b2 w, z = v + w) to the
    // computed (u,v,w) and compare with the input.
    const auto p = params_with(1.0, 24.5, 20.0 * M_PI);
    const auto f = eigensystem(p);
    const BlochState s{0.0, 1.0, 0.0};
    const auto [u, v, w] = to_diagonal(s, f, p);
    const cplx y = f.beta1() * v + f.beta2() * w;
    const cplx z = v + w;
    CHECK(std::abs(u - cplx(s.x)) < 1e-12);
    CHECK(std::abs(y - cplx(s.y)) < 1e-12);
    CHECK(std::abs(z - cplx(s.z)) < 1e-12);
}

TEST_CASE("to_diagonal: rejected for delta = 0") {
    const auto p0 = params_with(1.0, 0.0, 0.0);
    const auto f0 = eigensystem(p0);
    CHECK_THROWS_AS(to_diagonal(BlochState{0, 0.5, 0.2}, f0, p0), FrameDegenerateError);
}

TEST_CASE("round trip to_diagonal / from_diagonal on random states") {
    std::mt19937_64 rng(13);
    for (const double delta : {0.3, 2.0, 20.0 * M_PI}) {
        for (const double gamma : {0.0, 0.5, 24.5}) {
            const auto p = params_with(1.0, gamma, delta);
            if (std::abs(p.total_dephasing() - 2.0 * delta) < 1e-9) continue;
            const auto f = eigensystem(p);
            for (int i = 0; i < 100; ++i) {
                const BlochState s = random_ball_state(rng);
                const auto [u, v, w] = to_diagonal(s, f, p);
                const BlochState back = from_diagonal(u, v, w, f);
                CHECK(std::abs(back.x - s.x) < kRoundTripTol);
                CHECK(std::abs(back.y - s.y) < kRoundTripTol);
                CHECK(std::abs(back.z - s.z) < kRoundTripTol);
            }
        }
    }
}

TEST_CASE("from_diagonal: conjugate (v,w) pair yields real outputs for complex Omega") {
    const auto p = params_with(1.0, 0.0, 20.0 * M_PI);  // Gamma = 0.5 < 2 delta
    const auto f = eigensystem(p);
    CHECK(f.omega.real() == doctest::Approx(0.0));
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        const BlochState s = random_ball_state(rng);
        const auto [u, v, w] = to_diagonal(s, f, p);
        // In the underdamped regime the transform produces w = conj(v).
        CHECK(std::abs(w - std::conj(v)) < 1e-12);
        const BlochState back = from_diagonal(u, v, w, f);  // would throw if imaginary
        CHECK(std::abs(back.y - s.y) < 1e-10);
    }
}

TEST_CASE("from_diagonal: residual imaginary part is an error") {
    const auto p = params_with(1.0, 0.0, 20.0 * M_PI);
    const auto f = eigensystem(p);
    CHECK_THROWS_AS(from_diagonal(cplx(0, 0.5), cplx(0.1, 0), cplx(0.1, 0), f),
                    NumericalConsistencyError);
}

TEST_CASE("BlochState physicality") {
    CHECK(BlochState{0.6, 0.0, 0.8}.physical());
    CHECK(!BlochState{1.0, 0.5, 0.0}.physical());
}
