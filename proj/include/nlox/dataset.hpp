#pragma once

// Excitation signals, trajectory simulation, normalization, and dataset
// persistence. Stored datasets are normalized; the manifest carries the
// normalizer constants needed to invert back to raw units.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlox/csv.hpp"
#include "nlox/plant.hpp"
#include "nlox/rng.hpp"

namespace nlox {

struct InputChannelSpec {
    enum class Dist { lognormal, gaussian };
    Dist dist = Dist::gaussian;
    double mean = 0.0;   // underlying normal's mean for lognormal
    double stddev = 1.0; // underlying normal's stddev for lognormal
    double clip_lo = -std::numeric_limits<double>::infinity();
    double clip_hi = std::numeric_limits<double>::infinity();
};

struct InputSignalSpec {
    std::vector<InputChannelSpec> channels;
    std::size_t hold_intervals = 1; // redraw every this many samples

    /// Clip at the 0.1 / 99.9 percentiles of each channel's distribution so
    /// the excitation stays uniformly bounded in amplitude.
    void set_default_clips() {
        constexpr double z999 = 3.090232306167813;
        for (auto& ch : channels) {
            if (ch.dist == Dist::lognormal) {
                ch.clip_lo = 0.0;
                ch.clip_hi = std::exp(ch.mean + z999 * ch.stddev);
            } else {
                ch.clip_lo = ch.mean - z999 * ch.stddev;
                ch.clip_hi = ch.mean + z999 * ch.stddev;
            }
        }
    }

  private:
    using Dist = InputChannelSpec::Dist;
};

struct Trajectory {
    Mat inputs;  // N x n_u
    Mat states;  // N x n_x
    Mat outputs; // N x n_y
    double t_s = 0.0;
    std::uint64_t seed = 0;

    std::size_t samples() const { return states.rows(); }
};

/// Piecewise-constant excitation matrix: N rows, one column per channel,
/// value redrawn every hold_intervals rows. Returns the clip count through
/// clip_events when provided.
inline Mat generate_input_sequence(const InputSignalSpec& spec, std::size_t n, Rng& rng,
                                   std::size_t* clip_events = nullptr) {
    if (n < 1) throw numeric_error("generate_input_sequence: need at least one sample");
    const std::size_t n_u = spec.channels.size();
    Mat u(n, n_u);
    Vec current(n_u, 0.0);
    std::size_t clips = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k % spec.hold_intervals == 0) {
            for (std::size_t c = 0; c < n_u; ++c) {
                const auto& ch = spec.channels[c];
                double v = (ch.dist == InputChannelSpec::Dist::lognormal)
                               ? rng.lognormal(ch.mean, ch.stddev)
                               : rng.normal(ch.mean, ch.stddev);
                if (v < ch.clip_lo) {
                    v = ch.clip_lo;
                    ++clips;
                } else if (v > ch.clip_hi) {
                    v = ch.clip_hi;
                    ++clips;
                }
                current[c] = v;
            }
        }
        for (std::size_t c = 0; c < n_u; ++c) u(k, c) = current[c];
    }
    if (clip_events) *clip_events += clips;
    return u;
}

/// Integrate the plant over N-1 sampling intervals with inputs held constant
/// per interval. The recorded inputs are the nominal ones; the plant itself
/// sees nominal + disturbance.
inline Trajectory simulate_trajectory(const PlantModel& plant, const Vec& x0, const Mat& inputs,
                                      double t_s, int substeps,
                                      const DisturbanceSpec& disturbance = {},
                                      Rng* disturbance_rng = nullptr) {
    const std::size_t n = inputs.rows();
    Trajectory traj;
    traj.t_s = t_s;
    traj.inputs = inputs;
    traj.states = Mat(n, plant.n_x);
    traj.outputs = Mat(n, plant.n_y);
    Vec x = x0;
    Rng fallback_rng(0);
    Rng& drng = disturbance_rng ? *disturbance_rng : fallback_rng;
    for (std::size_t k = 0; k < n; ++k) {
        if (!plant.in_domain(x))
            throw divergence_error("simulate_trajectory: state left the plant domain",
                                   static_cast<long>(k));
        for (std::size_t j = 0; j < plant.n_x; ++j) traj.states(k, j) = x[j];
        const Vec y = plant.output(x);
        for (std::size_t j = 0; j < plant.n_y; ++j) traj.outputs(k, j) = y[j];
        if (k + 1 == n) break;
        Vec u(plant.n_u);
        for (std::size_t j = 0; j < plant.n_u; ++j) u[j] = inputs(k, j);
        const Vec u_eff = apply_disturbance(u, disturbance, drng);
        auto deriv = [&](const Vec& s, double) { return plant.rhs(s, u_eff); };
        x = integrate_interval(deriv, x, 0.0, t_s, substeps);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Normalization: deviation shift followed by per-component min-max
// ---------------------------------------------------------------------------

struct GroupNormalizer {
    Vec offset; // deviation-variable shift
    Vec min;    // of the shifted training data
    Vec max;

    double apply_one(double v, std::size_t i) const {
        const double shifted = v - offset[i];
        const double span = max[i] - min[i];
        if (!(span > 1e-300)) return shifted; // degenerate component passes through
        return (shifted - min[i]) / span;
    }

    double invert_one(double v, std::size_t i) const {
        const double span = max[i] - min[i];
        if (!(span > 1e-300)) return v + offset[i];
        return v * span + min[i] + offset[i];
    }

    void apply_rows(Mat& m) const {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = apply_one(m(r, c), c);
    }

    void invert_rows(Mat& m) const {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = invert_one(m(r, c), c);
    }

    /// Scale factor from raw to normalized units for component i.
    double scale(std::size_t i) const {
        const double span = max[i] - min[i];
        return (span > 1e-300) ? 1.0 / span : 1.0;
    }
};

struct Normalizer {
    GroupNormalizer states;
    GroupNormalizer outputs;
    GroupNormalizer inputs;
};

namespace detail {
inline GroupNormalizer fit_group(const std::vector<const Mat*>& mats, const Vec& offset) {
    GroupNormalizer g;
    g.offset = offset;
    const std::size_t dim = offset.size();
    g.min.assign(dim, std::numeric_limits<double>::infinity());
    g.max.assign(dim, -std::numeric_limits<double>::infinity());
    for (const Mat* m : mats)
        for (std::size_t r = 0; r < m->rows(); ++r)
            for (std::size_t c = 0; c < dim; ++c) {
                const double shifted = (*m)(r, c) - offset[c];
                g.min[c] = std::min(g.min[c], shifted);
                g.max[c] = std::max(g.max[c], shifted);
            }
    return g;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

struct DatasetBuildOptions {
    std::size_t trajectories = 0; // M
    std::size_t samples = 0;      // N
    double t_s = 0.1;
    int substeps = 10;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    InputSignalSpec input_spec;
    DisturbanceSpec disturbance;
};

struct TrajectoryDataset {
    std::vector<Trajectory> trajectories; // normalized
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    Normalizer normalizer;
    std::string plant_name;
    double t_s = 0.0;
    std::uint64_t seed = 0;
    std::size_t clip_events = 0;
    std::vector<std::string> state_names, input_names, output_names;

    const Trajectory& trajectory(std::size_t i) const { return trajectories[i]; }
};

inline TrajectoryDataset build_dataset(const PlantModel& plant, const DatasetBuildOptions& opts) {
    if (opts.trajectories < 2) throw config_error("build_dataset: need at least two trajectories");
    if (opts.input_spec.channels.size() != plant.n_u)
        throw config_error("build_dataset: input spec channel count mismatch");
    TrajectoryDataset ds;
    ds.plant_name = plant.name;
    ds.t_s = opts.t_s;
    ds.seed = opts.seed;
    ds.state_names = plant.state_names;
    ds.input_names = plant.input_names;
    ds.output_names = plant.output_names;
    ds.trajectories.resize(opts.trajectories);
    for (std::size_t i = 0; i < opts.trajectories; ++i) {
        Rng rng = Rng::substream(opts.seed, "dataset/traj/" + std::to_string(i));
        Rng dist_rng = Rng::substream(opts.seed, "dataset/disturbance/" + std::to_string(i));
        const Vec x0 = plant.sample_initial_state(rng);
        const Mat u = generate_input_sequence(opts.input_spec, opts.samples, rng, &ds.clip_events);
        ds.trajectories[i] =
            simulate_trajectory(plant, x0, u, opts.t_s, opts.substeps, opts.disturbance, &dist_rng);
        ds.trajectories[i].seed = opts.seed;
    }

    const auto train_count =
        static_cast<std::size_t>(std::llround(opts.train_fraction * opts.trajectories));
    for (std::size_t i = 0; i < opts.trajectories; ++i)
        (i < train_count ? ds.train_indices : ds.test_indices).push_back(i);

    // Fit min-max on the training portion only, after the deviation shift.
    std::vector<const Mat*> xs, ys, us;
    for (std::size_t i : ds.train_indices) {
        xs.push_back(&ds.trajectories[i].states);
        ys.push_back(&ds.trajectories[i].outputs);
        us.push_back(&ds.trajectories[i].inputs);
    }
    ds.normalizer.states = detail::fit_group(xs, plant.equilibrium_state);
    ds.normalizer.outputs = detail::fit_group(ys, plant.output(plant.equilibrium_state));
    ds.normalizer.inputs = detail::fit_group(us, plant.nominal_input);

    for (auto& traj : ds.trajectories) {
        ds.normalizer.states.apply_rows(traj.states);
        ds.normalizer.outputs.apply_rows(traj.outputs);
        ds.normalizer.inputs.apply_rows(traj.inputs);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json group_to_json(const GroupNormalizer& g) {
    return {{"offset", g.offset}, {"min", g.min}, {"max", g.max}};
}

inline GroupNormalizer group_from_json(const nlohmann::json& j) {
    GroupNormalizer g;
    g.offset = j.at("offset").get<Vec>();
    g.min = j.at("min").get<Vec>();
    g.max = j.at("max").get<Vec>();
    return g;
}

inline std::vector<std::string> numbered_header(const std::vector<std::string>& names,
                                                const std::string& prefix, std::size_t n) {
    if (names.size() == n) return names;
    std::vector<std::string> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i + 1));
    return h;
}
} // namespace detail

inline void save_dataset(const TrajectoryDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["plant"] = ds.plant_name;
    manifest["trajectories"] = ds.trajectories.size();
    manifest["samples"] = ds.trajectories.empty() ? 0 : ds.trajectories.front().samples();
    manifest["sampling_time"] = ds.t_s;
    manifest["seed"] = ds.seed;
    manifest["train_indices"] = ds.train_indices;
    manifest["test_indices"] = ds.test_indices;
    manifest["clip_events"] = ds.clip_events;
    manifest["normalizer"] = {{"states", detail::group_to_json(ds.normalizer.states)},
                              {"outputs", detail::group_to_json(ds.normalizer.outputs)},
                              {"inputs", detail::group_to_json(ds.normalizer.inputs)}};
    manifest["state_names"] = ds.state_names;
    manifest["input_names"] = ds.input_names;
    manifest["output_names"] = ds.output_names;
    std::vector<std::string> files;
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& t = ds.trajectories[i];
        const std::string stem = dir + "/traj_" + std::to_string(i);
        write_csv(stem + "_u.csv", detail::numbered_header(ds.input_names, "u", t.inputs.cols()),
                  t.inputs);
        write_csv(stem + "_x.csv", detail::numbered_header(ds.state_names, "x", t.states.cols()),
                  t.states);
        write_csv(stem + "_y.csv", detail::numbered_header(ds.output_names, "y", t.outputs.cols()),
                  t.outputs);
        files.push_back("traj_" + std::to_string(i));
    }
    manifest["files"] = files;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw io_error("save_dataset: cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

inline TrajectoryDataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw io_error("load_dataset: missing manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    TrajectoryDataset ds;
    ds.plant_name = manifest.at("plant").get<std::string>();
    ds.t_s = manifest.at("sampling_time").get<double>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.train_indices = manifest.at("train_indices").get<std::vector<std::size_t>>();
    ds.test_indices = manifest.at("test_indices").get<std::vector<std::size_t>>();
    ds.clip_events = manifest.at("clip_events").get<std::size_t>();
    ds.normalizer.states = detail::group_from_json(manifest.at("normalizer").at("states"));
    ds.normalizer.outputs = detail::group_from_json(manifest.at("normalizer").at("outputs"));
    ds.normalizer.inputs = detail::group_from_json(manifest.at("normalizer").at("inputs"));
    ds.state_names = manifest.value("state_names", std::vector<std::string>{});
    ds.input_names = manifest.value("input_names", std::vector<std::string>{});
    ds.output_names = manifest.value("output_names", std::vector<std::string>{});
    const auto m = manifest.at("trajectories").get<std::size_t>();
    const auto n = manifest.at("samples").get<std::size_t>();
    ds.trajectories.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::string stem = dir + "/traj_" + std::to_string(i);
        auto& t = ds.trajectories[i];
        t.inputs = read_csv(stem + "_u.csv").data;
        t.states = read_csv(stem + "_x.csv").data;
        t.outputs = read_csv(stem + "_y.csv").data;
        t.t_s = ds.t_s;
        t.seed = ds.seed;
        if (t.states.rows() != n || t.inputs.rows() != n || t.outputs.rows() != n)
            throw io_error("load_dataset: shape mismatch for trajectory " + std::to_string(i));
    }
    return ds;
}

} // namespace nlox
