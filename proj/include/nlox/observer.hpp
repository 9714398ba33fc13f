#pragma once

// Discrete observer recursion z_{k+1} = z_k + t_s (A z_k + B y_k + w(z_k) u_k)
// with diagonal Hurwitz A. The input-affine term w is any callable
// (const Vec& z, Mat& out) so both learned networks and test stubs plug in.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nlox/linalg.hpp"
#include "nlox/ode.hpp"

namespace nlox {

struct ObserverConfig {
    Vec eigenvalues; // lambda_i > 0; A = diag(-lambda_1, ..., -lambda_nz)
    Mat b;           // n_z x n_y
    double t_s = 0.1;
    std::size_t n_z = 0, n_y = 0, n_u = 0;

    static ObserverConfig diagonal(Vec lambdas, std::size_t n_y, std::size_t n_u, double t_s) {
        ObserverConfig cfg;
        cfg.n_z = lambdas.size();
        cfg.n_y = n_y;
        cfg.n_u = n_u;
        cfg.t_s = t_s;
        cfg.eigenvalues = std::move(lambdas);
        cfg.b = Mat(cfg.n_z, n_y, 1.0);
        cfg.validate();
        return cfg;
    }

    void validate() const {
        for (double lam : eigenvalues) {
            if (!(lam > 0.0)) throw numeric_error("ObserverConfig: eigenvalues must be positive");
            if (!(t_s * lam < 2.0))
                throw numeric_error("ObserverConfig: t_s * lambda must stay below 2 "
                                    "(I + t_s A must be Schur stable)");
        }
        if (b.rows() != n_z || b.cols() != n_y)
            throw numeric_error("ObserverConfig: B shape mismatch");
        if (!all_finite(b)) throw numeric_error("ObserverConfig: B has non-finite entries");
    }
};

using OmegaFn = std::function<void(const Vec& z, Mat& out)>;

inline OmegaFn zero_omega(std::size_t n_z, std::size_t n_u) {
    return [n_z, n_u](const Vec&, Mat& out) { out = Mat(n_z, n_u); };
}

/// One forward-Euler step of the observer dynamics.
template <class Omega>
Vec observer_step(const ObserverConfig& cfg, const Vec& z, const Vec& y, const Vec& u,
                  Omega&& omega) {
    Vec rate(cfg.n_z);
    for (std::size_t i = 0; i < cfg.n_z; ++i) rate[i] = -cfg.eigenvalues[i] * z[i];
    matvec_acc(cfg.b, y, rate);
    Mat w;
    omega(z, w);
    if (!all_finite(w)) throw numeric_error("observer_step: omega produced non-finite values");
    matvec_acc(w, u, rate);
    Vec next = z;
    axpy(cfg.t_s, rate, next);
    return next;
}

/// Bound components entering the Lyapunov ultimate-bound estimate.
struct ObserverBoundInputs {
    double output_bound = 0.0; // sup ||y_k||
    double input_bound = 0.0;  // sup ||u_k||
    double omega_bound = 0.0;  // sup ||w(z)||
};

/// Ultimate bound on ||z_k|| from the discrete Lyapunov argument with
/// P solving (I+t_sA)^T P (I+t_sA) - P = -t_s I. For diagonal A the solution
/// is p_i = 1 / (lambda_i (2 - t_s lambda_i)).
inline double observer_ultimate_bound(const ObserverConfig& cfg, const ObserverBoundInputs& in) {
    double p_max = 0.0, p_min = std::numeric_limits<double>::infinity();
    double schur_norm = 0.0;
    for (double lam : cfg.eigenvalues) {
        const double p = 1.0 / (lam * (2.0 - cfg.t_s * lam));
        p_max = std::max(p_max, p);
        p_min = std::min(p_min, p);
        schur_norm = std::max(schur_norm, std::abs(1.0 - cfg.t_s * lam));
    }
    const double b_fro = frobenius_norm(cfg.b);
    const double force = b_fro * in.output_bound + in.omega_bound * in.input_bound;
    const double l1 = force * p_max * schur_norm;
    const double l2_sq = p_max * force * force;
    const double radius = l1 + std::sqrt(l1 * l1 + cfg.t_s * l2_sq);
    return radius * std::sqrt(p_max / p_min);
}

struct RolloutOptions {
    /// Abort when ||z_k|| exceeds this value (0 disables the guard).
    double divergence_threshold = 0.0;
};

/// Simulate the discrete observer over a sampled trajectory. Row k of the
/// result is z_k; row 0 is z0. outputs/inputs hold y_k / u_k per row.
template <class Omega>
Mat rollout(const ObserverConfig& cfg, const Mat& outputs, const Mat& inputs, Omega&& omega,
            const Vec& z0, const RolloutOptions& opts = {}) {
    const std::size_t n = outputs.rows();
    if (n == 0) throw numeric_error("rollout: trajectory must contain at least one row");
    Mat zs(n, cfg.n_z);
    Vec z = z0;
    Vec y(cfg.n_y), u(cfg.n_u);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < cfg.n_z; ++j) zs(k, j) = z[j];
        if (k + 1 == n) break;
        for (std::size_t j = 0; j < cfg.n_y; ++j) y[j] = outputs(k, j);
        for (std::size_t j = 0; j < cfg.n_u; ++j) u[j] = inputs(k, j);
        z = observer_step(cfg, z, y, u, omega);
        if (opts.divergence_threshold > 0.0 && norm2(z) > opts.divergence_threshold)
            throw divergence_error("rollout: observer state exceeded divergence threshold",
                                   static_cast<long>(k + 1));
    }
    return zs;
}

/// Reference trajectory from RK4 integration of the continuous observer
/// dynamics between samples, with y linearly interpolated and u held.
/// Used by the discretization probe.
template <class Omega>
Mat continuous_reference_rollout(const ObserverConfig& cfg, const Mat& outputs, const Mat& inputs,
                                 Omega&& omega, const Vec& z0, int substeps = 32) {
    const std::size_t n = outputs.rows();
    if (n == 0) throw numeric_error("continuous_reference_rollout: empty trajectory");
    Mat zs(n, cfg.n_z);
    Vec z = z0;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < cfg.n_z; ++j) zs(k, j) = z[j];
        if (k + 1 == n) break;
        Vec y0(cfg.n_y), y1(cfg.n_y), u(cfg.n_u);
        for (std::size_t j = 0; j < cfg.n_y; ++j) {
            y0[j] = outputs(k, j);
            y1[j] = outputs(k + 1, j);
        }
        for (std::size_t j = 0; j < cfg.n_u; ++j) u[j] = inputs(k, j);
        auto deriv = [&](const Vec& state, double t) {
            const double alpha = t / cfg.t_s;
            Vec rate(cfg.n_z);
            for (std::size_t i = 0; i < cfg.n_z; ++i) rate[i] = -cfg.eigenvalues[i] * state[i];
            Vec y_interp(cfg.n_y);
            for (std::size_t j = 0; j < cfg.n_y; ++j)
                y_interp[j] = (1.0 - alpha) * y0[j] + alpha * y1[j];
            matvec_acc(cfg.b, y_interp, rate);
            Mat w;
            omega(state, w);
            matvec_acc(w, u, rate);
            return rate;
        };
        z = integrate_interval(deriv, z, 0.0, cfg.t_s, substeps);
    }
    return zs;
}

} // namespace nlox
