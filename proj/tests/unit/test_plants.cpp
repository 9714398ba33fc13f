#include <catch_amalgamated.hpp>

#include <cmath>

#include "nlox/plant.hpp"

using namespace nlox;

TEST_CASE("contois growth rate") {
    CHECK(contois_mu(0.05, 0.05) == Catch::Approx(0.5));
    CHECK(contois_mu(0.1, 0.0) == 0.0);
    CHECK(contois_mu(0.05, 0.1) == Catch::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(contois_mu(0.0, 0.0), numeric_error);
}

TEST_CASE("bioreactor dynamics at hand-checked points") {
    const Vec a = bioreactor_dynamics({0.05, 0.05}, 0.0);
    CHECK(a[0] == Catch::Approx(0.025));
    CHECK(a[1] == Catch::Approx(-0.025));

    const Vec b = bioreactor_dynamics({0.1, 0.0}, 0.0);
    CHECK(b[0] == 0.0);
    CHECK(b[1] == 0.0);

    const Vec c = bioreactor_dynamics({0.05, 0.05}, 0.4);
    CHECK(c[0] == Catch::Approx(0.005));
    CHECK(c[1] == Catch::Approx(-0.005));
}

TEST_CASE("bioreactor affine split agrees with the full right-hand side") {
    const PlantModel plant = make_bioreactor();
    const Vec x{0.07, 0.06};
    const Vec u{0.8};
    Vec affine = plant.drift(x);
    matvec_acc(plant.input_matrix(x), u, affine);
    const Vec full = plant.rhs(x, u);
    CHECK(affine[0] == Catch::Approx(full[0]).margin(1e-16));
    CHECK(affine[1] == Catch::Approx(full[1]).margin(1e-16));
}

TEST_CASE("arrhenius rates: frozen value, limit, monotonicity") {
    const auto k100 = arrhenius_rates(100.0);
    CHECK(k100[0] == Catch::Approx(1.6599e6 * std::exp(-6666.67 / 373.15)).epsilon(1e-12));
    // As T grows the exponent vanishes and k_i / a_i -> 1.
    const auto khuge = arrhenius_rates(1e9);
    CHECK(khuge[0] / 1.6599e6 == Catch::Approx(1.0).margin(1e-5));
    const auto k110 = arrhenius_rates(110.0);
    for (int i = 0; i < 3; ++i) CHECK(k110[i] > k100[i]);
    CHECK_THROWS_AS(arrhenius_rates(-280.0), numeric_error);
}

TEST_CASE("williams-otto with zero mass fractions reduces to pure feed") {
    WilliamsOttoParams p;
    p.dimensionless_time = false;
    const Vec dx = williams_otto_dynamics(Vec(6, 0.0), {6.0, 100.0}, p);
    CHECK(dx[0] == Catch::Approx(3.5 / 2500.0));
    CHECK(dx[1] == Catch::Approx(6.0 / 2500.0));
    for (int i = 2; i < 6; ++i) CHECK(dx[i] == 0.0);

    WilliamsOttoParams scaled;
    scaled.dimensionless_time = true;
    const Vec dxs = williams_otto_dynamics(Vec(6, 0.0), {6.0, 100.0}, scaled);
    CHECK(dxs[0] == Catch::Approx(3.5 / 2500.0 * scaled.residence_time()));
}

TEST_CASE("williams-otto residence time matches the printed value") {
    WilliamsOttoParams p;
    CHECK(p.residence_time() == Catch::Approx(263.2).margin(0.1));
}

TEST_CASE("total mass fraction is conserved by the reaction terms") {
    // With zero feed the stoichiometric factors cancel: sum_i dx_i = 0.
    WilliamsOttoParams p;
    p.feed_a = 0.0;
    p.dimensionless_time = false;
    const Vec x{0.2, 0.3, 0.1, 0.15, 0.05, 0.2};
    const Vec dx = williams_otto_dynamics(x, {0.0, 100.0}, p);
    double sum = 0.0;
    for (double v : dx) sum += v;
    CHECK(sum == Catch::Approx(0.0).margin(1e-16));

    // With feeds on, sum_i dx_i = (F_A + F_B)/W (1 - sum_i x_i).
    WilliamsOttoParams q;
    q.dimensionless_time = false;
    const Vec dx2 = williams_otto_dynamics(x, {6.0, 100.0}, q);
    double sum2 = 0.0, mass = 0.0;
    for (double v : dx2) sum2 += v;
    for (double v : x) mass += v;
    CHECK(sum2 == Catch::Approx((3.5 + 6.0) / 2500.0 * (1.0 - mass)).margin(1e-15));
}

TEST_CASE("williams-otto equilibrium has near-zero residual") {
    const PlantModel plant = make_williams_otto();
    const Vec res = plant.rhs(plant.equilibrium_state, plant.nominal_input);
    CHECK(norm2(res) < 1e-8);
    double mass = 0.0;
    for (double v : plant.equilibrium_state) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        mass += v;
    }
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("negative total flow is rejected") {
    CHECK_THROWS_AS(williams_otto_dynamics(Vec(6, 0.1), {-10.0, 100.0}), numeric_error);
}

TEST_CASE("disturbances: none, zero-stddev, and sample mean") {
    Rng rng(3);
    DisturbanceSpec none;
    CHECK(apply_disturbance({1.0, 2.0}, none, rng) == Vec{1.0, 2.0});

    DisturbanceSpec shift;
    shift.kind = DisturbanceSpec::Kind::input_additive_gaussian;
    shift.mean = 0.5;
    shift.stddev = 0.0;
    shift.target_input_index = 1;
    CHECK(apply_disturbance({1.0, 2.0}, shift, rng) == Vec{1.0, 2.5});

    DisturbanceSpec gauss;
    gauss.kind = DisturbanceSpec::Kind::input_additive_gaussian;
    gauss.mean = 0.2;
    gauss.stddev = 0.05;
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += apply_disturbance({0.0}, gauss, rng)[0];
    CHECK(sum / n == Catch::Approx(0.2).margin(3.0 * 0.05 / std::sqrt(double(n))));
}

TEST_CASE("dynamics evaluation is pure") {
    const PlantModel plant = make_bioreactor();
    const Vec x{0.06, 0.09};
    const Vec u{1.1};
    const Vec a = plant.rhs(x, u);
    const Vec b = plant.rhs(x, u);
    CHECK(a == b);
}

TEST_CASE("bioreactor trajectories stay strictly positive under positive input") {
    const PlantModel plant = make_bioreactor();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        Vec x = plant.sample_initial_state(rng);
        const double u = rng.lognormal(0.4, 0.2);
        auto deriv = [&](const Vec& s, double) { return plant.rhs(s, Vec{u}); };
        x = integrate_interval(deriv, x, 0.0, 100.0, 1000);
        CHECK(x[0] > 0.0);
        CHECK(x[1] > 0.0);
    }
}
