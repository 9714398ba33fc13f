#include <catch_amalgamated.hpp>

#include <cmath>

#include "nlox/observer.hpp"
#include "nlox/rng.hpp"

using namespace nlox;

namespace {

ObserverConfig demo_config(double t_s = 0.1) {
    return ObserverConfig::diagonal({3.0, 6.0}, 1, 1, t_s);
}

} // namespace

TEST_CASE("observer config validation") {
    CHECK_THROWS_AS(ObserverConfig::diagonal({3.0, -1.0}, 1, 1, 0.1), numeric_error);
    // t_s * lambda = 2 breaks Schur stability of I + t_s A.
    CHECK_THROWS_AS(ObserverConfig::diagonal({20.0}, 1, 1, 0.1), numeric_error);
}

TEST_CASE("observer_step fixed point and hand-evaluated updates") {
    const ObserverConfig cfg = demo_config();
    const auto omega = zero_omega(2, 1);
    CHECK(observer_step(cfg, {0.0, 0.0}, {0.0}, {0.0}, omega) == Vec{0.0, 0.0});

    const Vec z1 = observer_step(cfg, {1.0, 1.0}, {0.0}, {0.0}, omega);
    CHECK(z1[0] == Catch::Approx(0.7));
    CHECK(z1[1] == Catch::Approx(0.4));

    const Vec z2 = observer_step(cfg, {0.0, 0.0}, {1.0}, {0.0}, omega);
    CHECK(z2[0] == Catch::Approx(0.1));
    CHECK(z2[1] == Catch::Approx(0.1));
}

TEST_CASE("rollout with zero injection stays at zero") {
    const ObserverConfig cfg = demo_config();
    Mat y(50, 1), u(50, 1);
    const Mat zs = rollout(cfg, y, u, zero_omega(2, 1), {0.0, 0.0});
    for (std::size_t k = 0; k < zs.rows(); ++k)
        for (std::size_t j = 0; j < 2; ++j) CHECK(zs(k, j) == 0.0);
}

TEST_CASE("rollout converges to the constant-output fixed point") {
    const ObserverConfig cfg = demo_config();
    Mat y(2000, 1, 1.0);
    Mat u(2000, 1);
    const Mat zs = rollout(cfg, y, u, zero_omega(2, 1), {0.0, 0.0});
    CHECK(zs(1999, 0) == Catch::Approx(1.0 / 3.0).margin(1e-9));
    CHECK(zs(1999, 1) == Catch::Approx(1.0 / 6.0).margin(1e-9));
}

TEST_CASE("linear-plant oracle: z tracks the Sylvester solution T x") {
    // Plant xdot = -x, y = x, u = 0. The transformation solving the
    // observer PDE is linear with components 1/(lambda_i - 1).
    const double t_s = 0.001;
    const ObserverConfig cfg = demo_config(t_s);
    const std::size_t n = 5001; // t = 5
    Mat y(n, 1), u(n, 1);
    for (std::size_t k = 0; k < n; ++k) y(k, 0) = std::exp(-t_s * static_cast<double>(k));
    const Mat zs = rollout(cfg, y, u, zero_omega(2, 1), {0.0, 0.0});
    const Vec t_map{1.0 / 2.0, 1.0 / 5.0};
    const double x_final = std::exp(-5.0);
    const double err = std::hypot(zs(n - 1, 0) - t_map[0] * x_final,
                                  zs(n - 1, 1) - t_map[1] * x_final);
    CHECK(err < 1e-3);

    // The tracking error shrinks monotonically in time (after the start).
    const double mid_err = std::hypot(zs(2500, 0) - t_map[0] * std::exp(-2.5),
                                      zs(2500, 1) - t_map[1] * std::exp(-2.5));
    CHECK(err < mid_err);
}

TEST_CASE("rollout with zero omega is linear in z0 and outputs") {
    const ObserverConfig cfg = demo_config();
    Rng rng(8);
    const std::size_t n = 40;
    Mat y1(n, 1), y2(n, 1), u(n, 1);
    for (std::size_t k = 0; k < n; ++k) {
        y1(k, 0) = rng.uniform(-1.0, 1.0);
        y2(k, 0) = rng.uniform(-1.0, 1.0);
    }
    const Vec z0a{0.3, -0.2}, z0b{-0.1, 0.5};
    const auto omega = zero_omega(2, 1);
    const Mat a = rollout(cfg, y1, u, omega, z0a);
    const Mat b = rollout(cfg, y2, u, omega, z0b);
    Mat y_sum(n, 1);
    for (std::size_t k = 0; k < n; ++k) y_sum(k, 0) = y1(k, 0) + y2(k, 0);
    const Mat s = rollout(cfg, y_sum, u, omega, z0a + z0b);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(s(k, j) == Catch::Approx(a(k, j) + b(k, j)).margin(1e-12));
}

TEST_CASE("divergence guard fires with an unstable injection") {
    ObserverConfig cfg = demo_config();
    Mat y(200, 1, 1.0);
    Mat u(200, 1, 1.0);
    auto unstable = [](const Vec& z, Mat& out) {
        out = Mat(2, 1);
        out(0, 0) = 50.0 * z[0] + 1.0;
        out(1, 0) = 50.0 * z[1] + 1.0;
    };
    RolloutOptions opts;
    opts.divergence_threshold = 10.0;
    CHECK_THROWS_AS(rollout(cfg, y, u, unstable, {0.0, 0.0}, opts), divergence_error);
}

TEST_CASE("continuous reference is zero for zero forcing and self-converges at 4th order") {
    const ObserverConfig cfg = demo_config();
    Mat y(30, 1), u(30, 1);
    const Mat ref = continuous_reference_rollout(cfg, y, u, zero_omega(2, 1), {0.0, 0.0});
    for (std::size_t k = 0; k < ref.rows(); ++k) CHECK(ref(k, 0) == 0.0);

    Rng rng(4);
    Mat yr(30, 1), ur(30, 1);
    for (std::size_t k = 0; k < 30; ++k) {
        yr(k, 0) = rng.uniform(0.0, 1.0);
        ur(k, 0) = rng.uniform(0.0, 1.0);
    }
    auto omega = [](const Vec& z, Mat& out) {
        out = Mat(2, 1);
        out(0, 0) = std::sin(z[0]) + 0.3;
        out(1, 0) = std::cos(z[1]);
    };
    const Mat fine = continuous_reference_rollout(cfg, yr, ur, omega, {0.0, 0.0}, 64);
    const Mat mid = continuous_reference_rollout(cfg, yr, ur, omega, {0.0, 0.0}, 8);
    const Mat coarse = continuous_reference_rollout(cfg, yr, ur, omega, {0.0, 0.0}, 4);
    double err_mid = 0.0, err_coarse = 0.0;
    for (std::size_t k = 0; k < 30; ++k)
        for (std::size_t j = 0; j < 2; ++j) {
            err_mid = std::max(err_mid, std::abs(mid(k, j) - fine(k, j)));
            err_coarse = std::max(err_coarse, std::abs(coarse(k, j) - fine(k, j)));
        }
    const double ratio = err_coarse / err_mid;
    CHECK(ratio > 10.0);
    CHECK(ratio < 24.0);
}

TEST_CASE("ultimate bound dominates observed rollout magnitudes") {
    const ObserverConfig cfg = demo_config();
    Rng rng(12);
    const std::size_t n = 500;
    Mat y(n, 1), u(n, 1);
    for (std::size_t k = 0; k < n; ++k) {
        y(k, 0) = rng.uniform(0.0, 1.0);
        u(k, 0) = rng.uniform(0.0, 1.0);
    }
    auto omega = [](const Vec& z, Mat& out) {
        out = Mat(2, 1);
        out(0, 0) = std::tanh(z[0]) * 0.5;
        out(1, 0) = std::tanh(z[1]) * 0.5;
    };
    ObserverBoundInputs in;
    in.output_bound = 1.0;
    in.input_bound = 1.0;
    in.omega_bound = std::sqrt(2.0) * 0.5;
    const double bound = observer_ultimate_bound(cfg, in);
    const Mat zs = rollout(cfg, y, u, omega, {0.0, 0.0});
    double max_norm = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        max_norm = std::max(max_norm, std::hypot(zs(k, 0), zs(k, 1)));
    CHECK(max_norm < 2.0 * bound);
    CHECK(std::isfinite(bound));
}
