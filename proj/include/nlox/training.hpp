#pragma once

// Joint training of the input-affine term w(z|theta) and the inverse map
// T+(z|phi) by exact backpropagation through the discrete observer rollout.
// One optimization step per trajectory; RMSprop on both networks.

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlox/dataset.hpp"
#include "nlox/mlp.hpp"
#include "nlox/observer.hpp"

namespace nlox {

inline std::uint64_t splitmix_of(std::uint64_t seed, std::string_view name) {
    std::uint64_t s = seed ^ fnv1a64(name);
    return splitmix64(s);
}

/// The learned observer: omega plus one inverse-map network (joint output)
/// or one scalar-output network per state.
struct NloxNetworks {
    MlpParams omega;              // n_z -> n_z * n_u, row-major reshape
    std::vector<MlpParams> tdagger;

    std::size_t state_dim() const {
        std::size_t n = 0;
        for (const auto& net : tdagger) n += net.output_dim();
        return n;
    }
};

struct NloxGradients {
    MlpGradients omega;
    std::vector<MlpGradients> tdagger;

    void assign_zero_like(const NloxNetworks& nets) {
        omega.assign_zero_like(nets.omega);
        tdagger.resize(nets.tdagger.size());
        for (std::size_t s = 0; s < nets.tdagger.size(); ++s)
            tdagger[s].assign_zero_like(nets.tdagger[s]);
    }

    void zero() {
        omega.zero();
        for (auto& g : tdagger) g.zero();
    }
};

/// Omega callback backed by the network, for rollout/evaluation use.
inline OmegaFn make_omega_fn(const MlpParams& omega, std::size_t n_z, std::size_t n_u) {
    return [&omega, n_z, n_u](const Vec& z, Mat& out) {
        const Vec flat = mlp_forward(omega, z);
        out = Mat(n_z, n_u);
        std::copy(flat.begin(), flat.end(), out.data());
    };
}

/// x_hat = T+(z): concatenation of the per-network outputs.
inline Vec estimate_state(const NloxNetworks& nets, const Vec& z) {
    Vec x_hat;
    x_hat.reserve(nets.state_dim());
    for (const auto& net : nets.tdagger) {
        const Vec part = mlp_forward(net, z);
        x_hat.insert(x_hat.end(), part.begin(), part.end());
    }
    return x_hat;
}

namespace detail {

/// Divergence guard for rollouts under the current omega: ten times the
/// Lyapunov ultimate bound computed from this trajectory's signal bounds.
inline double divergence_threshold(const ObserverConfig& cfg, const MlpParams& omega,
                                   const Trajectory& traj) {
    ObserverBoundInputs in;
    for (std::size_t r = 0; r < traj.outputs.rows(); ++r) {
        double ynorm = 0.0, unorm = 0.0;
        for (std::size_t c = 0; c < traj.outputs.cols(); ++c)
            ynorm += traj.outputs(r, c) * traj.outputs(r, c);
        for (std::size_t c = 0; c < traj.inputs.cols(); ++c)
            unorm += traj.inputs(r, c) * traj.inputs(r, c);
        in.output_bound = std::max(in.output_bound, std::sqrt(ynorm));
        in.input_bound = std::max(in.input_bound, std::sqrt(unorm));
    }
    in.omega_bound = omega.output_bound();
    return 10.0 * observer_ultimate_bound(cfg, in);
}

struct BpttTape {
    std::vector<Vec> z;                          // z_0 .. z_{N-1}
    std::vector<MlpCache> omega_caches;          // per transition step
    std::vector<Vec> omega_outputs;              // flattened, per transition
    std::vector<std::vector<MlpCache>> td_caches; // [network][step]
};

} // namespace detail

/// Empirical risk over the chosen trajectories: mean squared estimation
/// error over all samples, with z from the rollout under the current omega.
inline double compute_loss(const TrajectoryDataset& ds, const std::vector<std::size_t>& indices,
                           const NloxNetworks& nets, const ObserverConfig& cfg) {
    double total = 0.0;
    std::size_t count = 0;
    const OmegaFn omega = make_omega_fn(nets.omega, cfg.n_z, cfg.n_u);
    for (std::size_t i : indices) {
        const Trajectory& traj = ds.trajectories[i];
        RolloutOptions opts;
        opts.divergence_threshold = detail::divergence_threshold(cfg, nets.omega, traj);
        const Mat zs = rollout(cfg, traj.outputs, traj.inputs, omega, Vec(cfg.n_z, 0.0), opts);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            Vec z(cfg.n_z);
            for (std::size_t j = 0; j < cfg.n_z; ++j) z[j] = zs(k, j);
            const Vec x_hat = estimate_state(nets, z);
            for (std::size_t s = 0; s < x_hat.size(); ++s) {
                const double r = traj.states(k, s) - x_hat[s];
                total += r * r;
            }
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

inline double compute_loss(const TrajectoryDataset& ds, const NloxNetworks& nets,
                           const ObserverConfig& cfg) {
    std::vector<std::size_t> all(ds.trajectories.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return compute_loss(ds, all, nets, cfg);
}

/// Exact gradient of the per-trajectory loss (1/N) sum_k ||x_k - T+(z_k)||^2
/// through the Euler recursion. Returns the loss; fills `grads` (zeroed
/// here). theta receives contributions only through the rollout.
inline double bptt_gradients(const Trajectory& traj, const NloxNetworks& nets,
                             const ObserverConfig& cfg, NloxGradients& grads) {
    const std::size_t n = traj.samples();
    const std::size_t n_z = cfg.n_z, n_u = cfg.n_u;
    const std::size_t n_nets = nets.tdagger.size();
    grads.zero();

    detail::BpttTape tape;
    tape.z.assign(n, Vec(n_z, 0.0));
    tape.omega_caches.resize(n > 0 ? n - 1 : 0);
    tape.omega_outputs.resize(n > 0 ? n - 1 : 0);
    tape.td_caches.assign(n_nets, std::vector<MlpCache>(n));

    const double guard = detail::divergence_threshold(cfg, nets.omega, traj);

    // Forward rollout, recording every activation needed for the reverse pass.
    Vec z(n_z, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        tape.z[k] = z;
        if (k + 1 == n) break;
        Vec& flat = tape.omega_outputs[k];
        mlp_forward(nets.omega, z, flat, tape.omega_caches[k]);
        Vec next = z;
        for (std::size_t i = 0; i < n_z; ++i) {
            double rate = -cfg.eigenvalues[i] * z[i];
            for (std::size_t j = 0; j < cfg.n_y; ++j) rate += cfg.b(i, j) * traj.outputs(k, j);
            const double* wrow = flat.data() + i * n_u;
            for (std::size_t j = 0; j < n_u; ++j) rate += wrow[j] * traj.inputs(k, j);
            next[i] += cfg.t_s * rate;
        }
        z = std::move(next);
        if (!all_finite(z) || norm2(z) > guard)
            throw divergence_error("bptt_gradients: rollout diverged", static_cast<long>(k + 1));
    }

    // Inverse-map forward passes and loss.
    double loss = 0.0;
    std::vector<Vec> residuals(n, Vec(nets.state_dim()));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t col = 0;
        for (std::size_t s = 0; s < n_nets; ++s) {
            Vec out;
            mlp_forward(nets.tdagger[s], tape.z[k], out, tape.td_caches[s][k]);
            for (double v : out) {
                const double r = v - traj.states(k, col); // x_hat - x
                residuals[k][col] = r;
                loss += r * r;
                ++col;
            }
        }
    }
    loss /= static_cast<double>(n);

    // Reverse sweep: adjoint of z_k combines the loss term at k with the
    // transposed transition Jacobian applied to the adjoint at k+1.
    const double inv_n = 1.0 / static_cast<double>(n);
    Vec carry; // adjoint of z_{k+1}
    Vec og, ig, u(n_u);
    for (std::size_t k = n; k-- > 0;) {
        Vec adj(n_z, 0.0);
        std::size_t col = 0;
        for (std::size_t s = 0; s < n_nets; ++s) {
            const std::size_t d_out = nets.tdagger[s].output_dim();
            og.assign(d_out, 0.0);
            for (std::size_t j = 0; j < d_out; ++j) og[j] = 2.0 * inv_n * residuals[k][col + j];
            mlp_backward(nets.tdagger[s], tape.td_caches[s][k], og, grads.tdagger[s], ig);
            for (std::size_t j = 0; j < n_z; ++j) adj[j] += ig[j];
            col += d_out;
        }
        if (k + 1 < n) {
            for (std::size_t j = 0; j < n_u; ++j) u[j] = traj.inputs(k, j);
            og.assign(n_z * n_u, 0.0);
            for (std::size_t i = 0; i < n_z; ++i)
                for (std::size_t j = 0; j < n_u; ++j) og[i * n_u + j] = cfg.t_s * carry[i] * u[j];
            mlp_backward(nets.omega, tape.omega_caches[k], og, grads.omega, ig);
            for (std::size_t j = 0; j < n_z; ++j)
                adj[j] += carry[j] * (1.0 - cfg.t_s * cfg.eigenvalues[j]) + ig[j];
        }
        carry = std::move(adj);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct NetworkSpec {
    std::size_t hidden_layers = 3;
    std::size_t width = 48;
};

struct TrainConfig {
    std::size_t epochs = 200;
    double learning_rate = 1e-5;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-8;
    NetworkSpec omega_spec;
    NetworkSpec tdagger_spec;
    bool per_state_tdagger = false;
    std::uint64_t seed = 0;
};

struct LossReport {
    std::vector<double> train_loss;          // per epoch
    std::vector<Vec> test_rmse;              // per epoch, per state (normalized units)
    std::vector<double> omega_norm;          // parameter norms per epoch
    std::vector<double> tdagger_norm;
    double wall_seconds = 0.0;
    std::size_t best_epoch = 0;
    double best_test_rsse = std::numeric_limits<double>::infinity();
    std::size_t rejected_updates = 0;
};

/// Per-state RMSE of the learned observer over the given trajectories,
/// in the dataset's normalized units.
inline Vec nlox_test_rmse(const TrajectoryDataset& ds, const std::vector<std::size_t>& indices,
                          const NloxNetworks& nets, const ObserverConfig& cfg) {
    const std::size_t n_x = nets.state_dim();
    Vec sq(n_x, 0.0);
    std::size_t count = 0;
    const OmegaFn omega = make_omega_fn(nets.omega, cfg.n_z, cfg.n_u);
    for (std::size_t i : indices) {
        const Trajectory& traj = ds.trajectories[i];
        const Mat zs = rollout(cfg, traj.outputs, traj.inputs, omega, Vec(cfg.n_z, 0.0));
        Vec z(cfg.n_z);
        for (std::size_t k = 0; k < traj.samples(); ++k) {
            for (std::size_t j = 0; j < cfg.n_z; ++j) z[j] = zs(k, j);
            const Vec x_hat = estimate_state(nets, z);
            for (std::size_t s = 0; s < n_x; ++s) {
                const double r = x_hat[s] - traj.states(k, s);
                sq[s] += r * r;
            }
            ++count;
        }
    }
    for (double& v : sq) v = std::sqrt(v / static_cast<double>(count));
    return sq;
}

inline NloxNetworks init_networks(const TrainConfig& cfg, std::size_t n_z, std::size_t n_u,
                                  std::size_t n_x) {
    NloxNetworks nets;
    std::vector<std::size_t> omega_dims{n_z};
    for (std::size_t l = 0; l < cfg.omega_spec.hidden_layers; ++l)
        omega_dims.push_back(cfg.omega_spec.width);
    omega_dims.push_back(n_z * n_u);
    nets.omega = init_params(omega_dims, splitmix_of(cfg.seed, "init/omega"));

    const std::size_t n_nets = cfg.per_state_tdagger ? n_x : 1;
    for (std::size_t s = 0; s < n_nets; ++s) {
        std::vector<std::size_t> dims{n_z};
        for (std::size_t l = 0; l < cfg.tdagger_spec.hidden_layers; ++l)
            dims.push_back(cfg.tdagger_spec.width);
        dims.push_back(cfg.per_state_tdagger ? 1 : n_x);
        nets.tdagger.push_back(
            init_params(dims, splitmix_of(cfg.seed, "init/tdagger/" + std::to_string(s))));
    }
    return nets;
}

/// epoch (1-based), current networks, report so far; return false to stop.
using EpochCallback = std::function<bool(std::size_t, const NloxNetworks&, const LossReport&)>;

inline NloxNetworks train(const TrajectoryDataset& ds, const ObserverConfig& cfg,
                          const TrainConfig& tc, LossReport& report,
                          const EpochCallback& on_epoch = {}, NloxNetworks* warm_start = nullptr,
                          std::size_t start_epoch = 0, NloxNetworks* best_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_x = ds.trajectories.front().states.cols();
    NloxNetworks nets =
        warm_start ? *warm_start : init_networks(tc, cfg.n_z, cfg.n_u, n_x);

    RmspropState omega_opt;
    omega_opt.decay = tc.rmsprop_decay;
    omega_opt.epsilon = tc.rmsprop_epsilon;
    omega_opt.learning_rate = tc.learning_rate;
    omega_opt.assign_zero_like(nets.omega);
    std::vector<RmspropState> td_opt(nets.tdagger.size(), omega_opt);
    for (std::size_t s = 0; s < nets.tdagger.size(); ++s)
        td_opt[s].assign_zero_like(nets.tdagger[s]);

    NloxGradients grads;
    grads.assign_zero_like(nets);

    std::vector<std::size_t> order = ds.train_indices;
    NloxNetworks best = nets;
    for (std::size_t epoch = start_epoch; epoch < tc.epochs; ++epoch) {
        Rng order_rng = Rng::substream(tc.seed, "train/order/epoch/" + std::to_string(epoch));
        order = ds.train_indices;
        order_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t i : order) {
            epoch_loss += bptt_gradients(ds.trajectories[i], nets, cfg, grads);
            if (!rmsprop_update(nets.omega, grads.omega, omega_opt)) ++report.rejected_updates;
            for (std::size_t s = 0; s < nets.tdagger.size(); ++s)
                if (!rmsprop_update(nets.tdagger[s], grads.tdagger[s], td_opt[s]))
                    ++report.rejected_updates;
        }
        epoch_loss /= static_cast<double>(order.size());

        const Vec rmse = nlox_test_rmse(ds, ds.test_indices, nets, cfg);
        double rsse = 0.0;
        for (double v : rmse) rsse += v * v;
        rsse = std::sqrt(rsse);

        report.train_loss.push_back(epoch_loss);
        report.test_rmse.push_back(rmse);
        report.omega_norm.push_back(nets.omega.parameter_norm());
        double tdn = 0.0;
        for (const auto& nn : nets.tdagger) {
            const double p = nn.parameter_norm();
            tdn += p * p;
        }
        report.tdagger_norm.push_back(std::sqrt(tdn));
        if (rsse < report.best_test_rsse) {
            report.best_test_rsse = rsse;
            report.best_epoch = epoch + 1;
            best = nets;
        }
        if (on_epoch && !on_epoch(epoch + 1, nets, report)) break;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (best_out) *best_out = best;
    return nets;
}

// ---------------------------------------------------------------------------
// Grid search over network width or training-set size
// ---------------------------------------------------------------------------

enum class GridAxis { width, trajectories };

struct GridCell {
    double axis_value = 0.0;
    Vec test_rmse;       // per state, normalized units (final epoch)
    double test_rsse = 0.0;
    bool failed = false;
    std::string error;
};

/// One full train + evaluate per axis value; both networks stay symmetric on
/// the width axis, and the dataset is regenerated (same seed) on the
/// trajectory axis. Failed cells are recorded and the search continues.
inline std::vector<GridCell> grid_search(const PlantModel& plant,
                                         const DatasetBuildOptions& base_data,
                                         const ObserverConfig& cfg, const TrainConfig& base_train,
                                         GridAxis axis, const std::vector<std::size_t>& values) {
    if (values.empty()) throw config_error("grid_search: empty axis");
    std::vector<GridCell> cells;
    for (std::size_t v : values) {
        GridCell cell;
        cell.axis_value = static_cast<double>(v);
        try {
            DatasetBuildOptions data = base_data;
            TrainConfig tc = base_train;
            if (axis == GridAxis::width) {
                tc.omega_spec.width = v;
                tc.tdagger_spec.width = v;
            } else {
                data.trajectories = v;
            }
            const TrajectoryDataset ds = build_dataset(plant, data);
            LossReport report;
            train(ds, cfg, tc, report);
            cell.test_rmse = report.test_rmse.back();
            for (double r : cell.test_rmse) cell.test_rsse += r * r;
            cell.test_rsse = std::sqrt(cell.test_rsse);
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

} // namespace nlox
