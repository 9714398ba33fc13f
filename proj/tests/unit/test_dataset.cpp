#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "nlox/dataset.hpp"

using namespace nlox;

namespace {

InputSignalSpec lognormal_spec(std::size_t hold = 1) {
    InputSignalSpec spec;
    InputChannelSpec ch;
    ch.dist = InputChannelSpec::Dist::lognormal;
    ch.mean = 0.4;
    ch.stddev = 0.2;
    spec.channels = {ch};
    spec.hold_intervals = hold;
    spec.set_default_clips();
    return spec;
}

} // namespace

TEST_CASE("input sequence with hold = N is a constant column") {
    auto spec = lognormal_spec(64);
    Rng rng(1);
    const Mat u = generate_input_sequence(spec, 64, rng);
    for (std::size_t k = 1; k < 64; ++k) CHECK(u(k, 0) == u(0, 0));
}

TEST_CASE("lognormal excitation is positive and clipped at its upper quantile") {
    auto spec = lognormal_spec(1);
    Rng rng(2);
    std::size_t clips = 0;
    const Mat u = generate_input_sequence(spec, 20000, rng, &clips);
    const double hi = std::exp(0.4 + 3.090232306167813 * 0.2);
    for (std::size_t k = 0; k < u.rows(); ++k) {
        REQUIRE(u(k, 0) > 0.0);
        REQUIRE(u(k, 0) <= hi);
    }
    // Roughly 0.1% of draws hit the clip.
    CHECK(clips > 2);
    CHECK(clips < 80);
}

TEST_CASE("two-channel gaussian staircase redraws every 50 samples") {
    InputSignalSpec spec;
    InputChannelSpec fb, tr;
    fb.mean = 6.0;
    fb.stddev = 1.0;
    tr.mean = 100.0;
    tr.stddev = 15.0;
    spec.channels = {fb, tr};
    spec.hold_intervals = 50;
    spec.set_default_clips();
    Rng rng(3);
    const Mat u = generate_input_sequence(spec, 500, rng);
    for (std::size_t k = 0; k + 1 < 500; ++k) {
        if ((k + 1) % 50 != 0) {
            CHECK(u(k + 1, 0) == u(k, 0));
            CHECK(u(k + 1, 1) == u(k, 1));
        }
    }
    bool changed = false;
    for (std::size_t b = 1; b < 10; ++b) changed |= (u(50 * b, 0) != u(50 * b - 1, 0));
    CHECK(changed);
}

TEST_CASE("initial-state sampling follows each plant's rule") {
    const PlantModel bio = make_bioreactor();
    Rng rng(4);
    double mean0 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const Vec x0 = bio.sample_initial_state(rng);
        REQUIRE(x0[0] >= 0.05);
        REQUIRE(x0[0] <= 0.1);
        REQUIRE(x0[1] >= 0.05);
        REQUIRE(x0[1] <= 0.1);
        mean0 += x0[0];
    }
    CHECK(mean0 / n == Catch::Approx(0.075).margin(0.002));

    const PlantModel wo = make_williams_otto();
    for (int i = 0; i < 100; ++i) {
        const Vec x0 = wo.sample_initial_state(rng);
        CHECK(x0[0] + x0[1] == 1.0);
        CHECK(x0[0] >= 0.2);
        CHECK(x0[0] <= 0.6);
        for (int j = 2; j < 6; ++j) CHECK(x0[j] == 0.0);
    }
}

TEST_CASE("simulating a drift equilibrium keeps the state constant") {
    const PlantModel plant = make_bioreactor();
    Mat u(20, 1); // u = 0: from [0.1, 0] the drift vanishes (mu = 0)
    const Trajectory traj = simulate_trajectory(plant, {0.1, 0.0}, u, 0.1, 10);
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        CHECK(traj.states(k, 0) == 0.1);
        CHECK(traj.states(k, 1) == 0.0);
        CHECK(traj.outputs(k, 0) == 0.1);
    }
}

TEST_CASE("substep refinement changes a nominal run by less than 1e-9") {
    const PlantModel plant = make_bioreactor();
    Rng rng(5);
    auto spec = lognormal_spec(1);
    const Mat u = generate_input_sequence(spec, 100, rng);
    const Trajectory a = simulate_trajectory(plant, {0.07, 0.08}, u, 0.1, 10);
    const Trajectory b = simulate_trajectory(plant, {0.07, 0.08}, u, 0.1, 5);
    double diff = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
        diff = std::max(diff, std::abs(a.states(99, j) - b.states(99, j)));
    CHECK(diff < 1e-9);
}

TEST_CASE("build_dataset splits, normalizes, and round-trips") {
    const PlantModel plant = make_bioreactor();
    DatasetBuildOptions opts;
    opts.trajectories = 10;
    opts.samples = 50;
    opts.t_s = 0.1;
    opts.substeps = 10;
    opts.train_fraction = 0.7;
    opts.seed = 42;
    opts.input_spec = lognormal_spec(1);
    const TrajectoryDataset ds = build_dataset(plant, opts);

    CHECK(ds.train_indices.size() == 7);
    CHECK(ds.test_indices.size() == 3);

    for (std::size_t i : ds.train_indices) {
        const auto& t = ds.trajectories[i];
        for (std::size_t k = 0; k < t.samples(); ++k)
            for (std::size_t c = 0; c < 2; ++c) {
                REQUIRE(t.states(k, c) >= -1e-12);
                REQUIRE(t.states(k, c) <= 1.0 + 1e-12);
            }
    }

    // Round-trip through the normalizer and check h(x) = y in raw units.
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        Mat raw_x = ds.trajectories[i].states;
        Mat raw_y = ds.trajectories[i].outputs;
        ds.normalizer.states.invert_rows(raw_x);
        ds.normalizer.outputs.invert_rows(raw_y);
        for (std::size_t k = 0; k < raw_x.rows(); ++k) {
            const Vec h = plant.output({raw_x(k, 0), raw_x(k, 1)});
            CHECK(raw_y(k, 0) == Catch::Approx(h[0]).margin(1e-12));
        }
        Mat renorm = raw_x;
        ds.normalizer.states.apply_rows(renorm);
        for (std::size_t k = 0; k < renorm.rows(); ++k)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(renorm(k, c) == Catch::Approx(ds.trajectories[i].states(k, c)).margin(1e-12));
    }
}

TEST_CASE("degenerate normalizer component passes values through") {
    GroupNormalizer g;
    g.offset = {1.0};
    g.min = {0.5};
    g.max = {0.5};
    CHECK(g.apply_one(3.0, 0) == 2.0);
    CHECK(g.invert_one(2.0, 0) == 3.0);
}

TEST_CASE("datasets are deterministic and reload identically") {
    const PlantModel plant = make_bioreactor();
    DatasetBuildOptions opts;
    opts.trajectories = 4;
    opts.samples = 30;
    opts.seed = 7;
    opts.input_spec = lognormal_spec(1);
    const TrajectoryDataset a = build_dataset(plant, opts);
    const TrajectoryDataset b = build_dataset(plant, opts);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 30; ++k) {
            CHECK(a.trajectories[i].states(k, 0) == b.trajectories[i].states(k, 0));
            CHECK(a.trajectories[i].inputs(k, 0) == b.trajectories[i].inputs(k, 0));
        }

    const auto dir = std::filesystem::temp_directory_path() / "nlox_ds_test";
    std::filesystem::remove_all(dir);
    save_dataset(a, dir.string());
    const TrajectoryDataset c = load_dataset(dir.string());
    CHECK(c.plant_name == "bioreactor");
    CHECK(c.train_indices == a.train_indices);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 30; ++k)
            for (std::size_t col = 0; col < 2; ++col)
                CHECK(c.trajectories[i].states(k, col) == a.trajectories[i].states(k, col));
    CHECK(c.normalizer.states.min[0] == a.normalizer.states.min[0]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("disturbed plants record nominal inputs") {
    const PlantModel plant = make_bioreactor();
    DisturbanceSpec dist;
    dist.kind = DisturbanceSpec::Kind::input_additive_gaussian;
    dist.stddev = 0.05;
    Rng rng(9);
    auto spec = lognormal_spec(1);
    const Mat u = generate_input_sequence(spec, 40, rng);
    Rng drng(10);
    const Trajectory noisy = simulate_trajectory(plant, {0.07, 0.08}, u, 0.1, 10, dist, &drng);
    const Trajectory clean = simulate_trajectory(plant, {0.07, 0.08}, u, 0.1, 10);
    // Same recorded inputs, different realized states.
    for (std::size_t k = 0; k < 40; ++k) CHECK(noisy.inputs(k, 0) == clean.inputs(k, 0));
    double diff = 0.0;
    for (std::size_t k = 0; k < 40; ++k)
        diff = std::max(diff, std::abs(noisy.states(k, 0) - clean.states(k, 0)));
    CHECK(diff > 0.0);
}
