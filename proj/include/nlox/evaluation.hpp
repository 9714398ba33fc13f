#pragma once

// Metrics and observer-vs-truth evaluation. Every observer is wrapped as a
// runner that maps a stored (normalized) test trajectory to a matrix of
// normalized state estimates; baselines internally denormalize the signals,
// run in raw units, and normalize their estimates back for comparison.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nlox/bernard.hpp"
#include "nlox/csv.hpp"
#include "nlox/dataset.hpp"
#include "nlox/ekf.hpp"
#include "nlox/smo.hpp"
#include "nlox/training.hpp"

namespace nlox {

/// Per-column root-mean-square deviation between equal-shaped matrices.
inline Vec rmse(const Mat& truth, const Mat& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw numeric_error("rmse: shape mismatch");
    Vec out(truth.cols(), 0.0);
    for (std::size_t r = 0; r < truth.rows(); ++r)
        for (std::size_t c = 0; c < truth.cols(); ++c) {
            const double d = truth(r, c) - estimate(r, c);
            out[c] += d * d;
        }
    for (double& v : out) v = std::sqrt(v / static_cast<double>(truth.rows()));
    return out;
}

inline double rsse(const Vec& rmse_per_state) {
    double s = 0.0;
    for (double v : rmse_per_state) s += v * v;
    return std::sqrt(s);
}

struct EvalReport {
    std::string observer;
    Vec rmse_norm;      // pooled over all evaluated test samples
    double rsse_norm = 0.0;
    Vec rmse_raw;       // same residuals in raw plant units
    double rsse_raw = 0.0;
    Mat per_trajectory; // one row per trajectory: [index, rmse_norm..., rsse_norm]
    std::size_t diverged_count = 0;
    std::size_t trajectories_used = 0;
    std::uint64_t seed = 0;
    bool model_based = false; // baselines read the plant; the learned observer does not
    double max_z_norm = 0.0;  // learned observer only
    double z_ultimate_bound = 0.0;
};

/// Maps a normalized test trajectory to normalized estimates (N x n_x).
using ObserverRunner = std::function<Mat(const Trajectory&, Rng&)>;

inline EvalReport evaluate_observer(const TrajectoryDataset& ds,
                                    const std::vector<std::size_t>& indices,
                                    const std::string& name, const ObserverRunner& runner,
                                    std::uint64_t seed) {
    const std::size_t n_x = ds.trajectories.front().states.cols();
    EvalReport report;
    report.observer = name;
    report.seed = seed;
    Vec pooled_sq(n_x, 0.0);
    std::size_t pooled_count = 0;
    std::vector<Vec> rows;
    for (std::size_t i : indices) {
        const Trajectory& traj = ds.trajectories[i];
        Rng rng = Rng::substream(seed, "eval/" + name + "/traj/" + std::to_string(i));
        Mat est;
        try {
            est = runner(traj, rng);
        } catch (const divergence_error&) {
            ++report.diverged_count;
            continue;
        }
        const Vec r = rmse(traj.states, est);
        Vec row{static_cast<double>(i)};
        row.insert(row.end(), r.begin(), r.end());
        row.push_back(rsse(r));
        rows.push_back(std::move(row));
        for (std::size_t k = 0; k < traj.samples(); ++k)
            for (std::size_t s = 0; s < n_x; ++s) {
                const double d = traj.states(k, s) - est(k, s);
                pooled_sq[s] += d * d;
            }
        pooled_count += traj.samples();
        ++report.trajectories_used;
    }
    if (pooled_count == 0) throw numeric_error("evaluate_observer: no trajectory completed");
    report.rmse_norm.assign(n_x, 0.0);
    for (std::size_t s = 0; s < n_x; ++s)
        report.rmse_norm[s] = std::sqrt(pooled_sq[s] / static_cast<double>(pooled_count));
    report.rsse_norm = rsse(report.rmse_norm);
    report.rmse_raw.assign(n_x, 0.0);
    for (std::size_t s = 0; s < n_x; ++s)
        report.rmse_raw[s] = report.rmse_norm[s] / ds.normalizer.states.scale(s);
    report.rsse_raw = rsse(report.rmse_raw);
    report.per_trajectory = Mat(rows.size(), n_x + 2);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), report.per_trajectory.row(r));
    return report;
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

struct ZBoundStats {
    double max_norm = 0.0;
    double ultimate_bound = 0.0;
};

/// Learned observer: cold start z0 = 0, normalized signals end to end.
inline ObserverRunner make_nlox_runner(const NloxNetworks& nets, const ObserverConfig& cfg,
                                       ZBoundStats* stats = nullptr) {
    return [&nets, cfg, stats](const Trajectory& traj, Rng&) {
        const OmegaFn omega = make_omega_fn(nets.omega, cfg.n_z, cfg.n_u);
        RolloutOptions opts;
        const double bound = detail::divergence_threshold(cfg, nets.omega, traj) / 10.0;
        opts.divergence_threshold = 10.0 * bound;
        const Mat zs = rollout(cfg, traj.outputs, traj.inputs, omega, Vec(cfg.n_z, 0.0), opts);
        Mat est(traj.samples(), nets.state_dim());
        Vec z(cfg.n_z);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            double zn = 0.0;
            for (std::size_t j = 0; j < cfg.n_z; ++j) {
                z[j] = zs(k, j);
                zn += z[j] * z[j];
            }
            if (stats) {
                stats->max_norm = std::max(stats->max_norm, std::sqrt(zn));
                stats->ultimate_bound = std::max(stats->ultimate_bound, bound);
            }
            const Vec x_hat = estimate_state(nets, z);
            for (std::size_t s = 0; s < x_hat.size(); ++s) est(k, s) = x_hat[s];
        }
        return est;
    };
}

namespace detail {

struct RawTrajectory {
    Mat inputs, states, outputs;
};

inline RawTrajectory denormalize(const Trajectory& traj, const Normalizer& norm) {
    RawTrajectory raw{traj.inputs, traj.states, traj.outputs};
    norm.inputs.invert_rows(raw.inputs);
    norm.states.invert_rows(raw.states);
    norm.outputs.invert_rows(raw.outputs);
    return raw;
}

inline void normalize_estimates(Mat& est, const Normalizer& norm) {
    norm.states.apply_rows(est);
}

} // namespace detail

struct EkfRunStats {
    double min_covariance_eigenvalue = std::numeric_limits<double>::infinity();
    double max_asymmetry = 0.0;
};

inline ObserverRunner make_ekf_runner(const PlantModel& plant, const EkfConfig& cfg,
                                      const Normalizer& norm, EkfRunStats* stats = nullptr) {
    return [&plant, cfg, &norm, stats](const Trajectory& traj, Rng& rng) {
        const auto raw = detail::denormalize(traj, norm);
        EkfState state{plant.sample_initial_state(rng), cfg.p0};
        Mat est(traj.samples(), plant.n_x);
        Vec y(plant.n_y), u(plant.n_u);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            for (std::size_t s = 0; s < plant.n_x; ++s) est(k, s) = state.x_hat[s];
            if (stats) {
                const Vec eig = symmetric_eigenvalues(state.p);
                stats->min_covariance_eigenvalue =
                    std::min(stats->min_covariance_eigenvalue, eig.front());
                const Mat asym = state.p - transpose(state.p);
                stats->max_asymmetry = std::max(stats->max_asymmetry, frobenius_norm(asym));
            }
            if (k + 1 == traj.samples()) break;
            for (std::size_t j = 0; j < plant.n_y; ++j) y[j] = raw.outputs(k, j);
            for (std::size_t j = 0; j < plant.n_u; ++j) u[j] = raw.inputs(k, j);
            state = ekf_step(plant, cfg, state, y, u, traj.t_s);
        }
        detail::normalize_estimates(est, norm);
        return est;
    };
}

inline ObserverRunner make_smo_runner(const PlantModel& plant, const SmoConfig& cfg,
                                      const Normalizer& norm) {
    return [&plant, cfg, &norm](const Trajectory& traj, Rng& rng) {
        const auto raw = detail::denormalize(traj, norm);
        Vec x_hat = plant.sample_initial_state(rng);
        Mat est(traj.samples(), plant.n_x);
        Vec y(plant.n_y), u(plant.n_u);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            for (std::size_t s = 0; s < plant.n_x; ++s) est(k, s) = x_hat[s];
            if (k + 1 == traj.samples()) break;
            for (std::size_t j = 0; j < plant.n_y; ++j) y[j] = raw.outputs(k, j);
            for (std::size_t j = 0; j < plant.n_u; ++j) u[j] = raw.inputs(k, j);
            x_hat = smo_step(plant, cfg, x_hat, y, u, traj.t_s);
        }
        detail::normalize_estimates(est, norm);
        return est;
    };
}

inline ObserverRunner make_bernard_runner(const PlantModel& plant, const BernardConfig& cfg,
                                          const Normalizer& norm,
                                          std::size_t* skipped_injections = nullptr) {
    return [&plant, cfg, &norm, skipped_injections](const Trajectory& traj, Rng& rng) {
        const auto raw = detail::denormalize(traj, norm);
        Vec x_hat = plant.sample_initial_state(rng);
        Mat est(traj.samples(), plant.n_x);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            for (std::size_t s = 0; s < plant.n_x; ++s) est(k, s) = x_hat[s];
            if (k + 1 == traj.samples()) break;
            x_hat = bernard_observer_step(plant, cfg, x_hat, raw.outputs(k, 0), raw.inputs(k, 0),
                                          traj.t_s, skipped_injections);
            if (!all_finite(x_hat))
                throw divergence_error("bernard runner: estimate diverged",
                                       static_cast<long>(k));
        }
        detail::normalize_estimates(est, norm);
        return est;
    };
}

// ---------------------------------------------------------------------------
// Forward-Euler discretization probe
// ---------------------------------------------------------------------------

struct DiscretizationProbeResult {
    std::vector<std::pair<double, double>> points; // (t_s, max_k ||z_k - z*(k t_s)||)
    double slope = 0.0;                            // log-log fit; 0 when errors vanish
};

/// Compare the Euler rollout against the RK4 continuous reference for each
/// step size. The trajectory's signals are resampled onto each grid: outputs
/// by linear interpolation, inputs by staircase lookup.
template <class Omega>
DiscretizationProbeResult discretization_probe(const ObserverConfig& cfg_base, Omega&& omega,
                                               const Mat& outputs, const Mat& inputs,
                                               double t_s_data,
                                               const std::vector<double>& t_s_list,
                                               int reference_substeps = 32) {
    DiscretizationProbeResult result;
    const double duration = t_s_data * static_cast<double>(outputs.rows() - 1);
    for (double ts : t_s_list) {
        const auto steps = static_cast<std::size_t>(std::llround(duration / ts));
        Mat y(steps + 1, outputs.cols());
        Mat u(steps + 1, inputs.cols());
        for (std::size_t k = 0; k <= steps; ++k) {
            const double t = static_cast<double>(k) * ts;
            const double pos = t / t_s_data;
            const auto i0 = std::min(static_cast<std::size_t>(pos), outputs.rows() - 2);
            const double alpha = pos - static_cast<double>(i0);
            for (std::size_t c = 0; c < outputs.cols(); ++c)
                y(k, c) = (1.0 - alpha) * outputs(i0, c) + alpha * outputs(i0 + 1, c);
            const auto ui = std::min(static_cast<std::size_t>(pos), inputs.rows() - 1);
            for (std::size_t c = 0; c < inputs.cols(); ++c) u(k, c) = inputs(ui, c);
        }
        ObserverConfig cfg = cfg_base;
        cfg.t_s = ts;
        cfg.validate();
        const Vec z0(cfg.n_z, 0.0);
        const Mat z_euler = rollout(cfg, y, u, omega, z0);
        const Mat z_ref = continuous_reference_rollout(cfg, y, u, omega, z0, reference_substeps);
        double max_err = 0.0;
        for (std::size_t k = 0; k <= steps; ++k) {
            double e = 0.0;
            for (std::size_t j = 0; j < cfg.n_z; ++j) {
                const double d = z_euler(k, j) - z_ref(k, j);
                e += d * d;
            }
            max_err = std::max(max_err, std::sqrt(e));
        }
        result.points.emplace_back(ts, max_err);
    }
    bool positive = true;
    for (const auto& [ts, err] : result.points)
        if (!(err > 0.0)) positive = false;
    if (positive && result.points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& [ts, err] : result.points) {
            const double lx = std::log(ts), ly = std::log(err);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const auto n = static_cast<double>(result.points.size());
        result.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline void write_report_csv(const std::string& path, const EvalReport& report,
                             const std::vector<std::string>& state_names) {
    std::vector<std::string> header{"trajectory"};
    for (const auto& s : state_names) header.push_back("rmse_" + s);
    header.push_back("rsse");
    Mat data(report.per_trajectory.rows() + 1, header.size());
    data(0, 0) = -1.0; // aggregate row
    for (std::size_t s = 0; s < report.rmse_norm.size(); ++s) data(0, s + 1) = report.rmse_norm[s];
    data(0, header.size() - 1) = report.rsse_norm;
    for (std::size_t r = 0; r < report.per_trajectory.rows(); ++r)
        for (std::size_t c = 0; c < report.per_trajectory.cols(); ++c)
            data(r + 1, c) = report.per_trajectory(r, c);
    write_csv(path, header, data);
}

inline void write_compare_csv(const std::string& path, const std::vector<EvalReport>& reports,
                              const std::vector<std::string>& state_names) {
    if (reports.empty()) throw numeric_error("write_compare_csv: need at least one report");
    std::ofstream out(path);
    if (!out) throw io_error("write_compare_csv: cannot open " + path);
    out << "observer";
    for (const auto& s : state_names) out << ",rmse_" << s;
    out << ",rsse,model_based,diverged\n";
    for (const auto& r : reports) {
        out << r.observer;
        for (double v : r.rmse_norm) out << ',' << format_double(v);
        out << ',' << format_double(r.rsse_norm) << ',' << (r.model_based ? 1 : 0) << ','
            << r.diverged_count << '\n';
    }
}

/// Time series of truth vs estimates on one trajectory, one file per state:
/// columns time, truth, then one column per observer.
inline void write_timeseries_csv(const std::string& dir, const TrajectoryDataset& ds,
                                 std::size_t traj_index,
                                 const std::vector<std::pair<std::string, Mat>>& estimates,
                                 const std::vector<std::string>& state_names) {
    const Trajectory& traj = ds.trajectories[traj_index];
    for (std::size_t s = 0; s < state_names.size(); ++s) {
        std::vector<std::string> header{"time", "truth"};
        for (const auto& [name, est] : estimates) header.push_back(name);
        Mat data(traj.samples(), header.size());
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            data(k, 0) = static_cast<double>(k) * traj.t_s;
            data(k, 1) = traj.states(k, s);
            for (std::size_t o = 0; o < estimates.size(); ++o)
                data(k, o + 2) = estimates[o].second(k, s);
        }
        write_csv(dir + "/timeseries_" + state_names[s] + ".csv", header, data);
    }
}

} // namespace nlox
