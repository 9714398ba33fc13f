#pragma once

// Continuous-time extended Kalman filter: the estimate and the Riccati
// covariance are integrated jointly with RK4 over each sampling interval,
// with measurement and input held at their sampled values.

#include <functional>
#include <string>

#include "nlox/linalg.hpp"
#include "nlox/ode.hpp"
#include "nlox/plant.hpp"

namespace nlox {

/// Central finite-difference Jacobians of rhs(., u) and h(.) at x_hat.
/// Shrinks the step once if probing throws (domain edge), then rethrows.
inline std::pair<Mat, Mat> jacobian_numeric(const PlantModel& plant, const Vec& x_hat,
                                            const Vec& u, double fd_step = 1e-6) {
    const std::size_t n = plant.n_x;
    auto attempt = [&](double step) {
        Mat a(n, n), c(plant.n_y, n);
        for (std::size_t j = 0; j < n; ++j) {
            Vec xp = x_hat, xm = x_hat;
            xp[j] += step;
            xm[j] -= step;
            const Vec fp = plant.rhs(xp, u), fm = plant.rhs(xm, u);
            const Vec hp = plant.output(xp), hm = plant.output(xm);
            for (std::size_t i = 0; i < n; ++i) a(i, j) = (fp[i] - fm[i]) / (2.0 * step);
            for (std::size_t i = 0; i < plant.n_y; ++i) c(i, j) = (hp[i] - hm[i]) / (2.0 * step);
        }
        return std::make_pair(a, c);
    };
    try {
        return attempt(fd_step);
    } catch (const numeric_error&) {
        return attempt(0.1 * fd_step);
    }
}

using JacobianProvider = std::function<std::pair<Mat, Mat>(const Vec& x_hat, const Vec& u)>;

struct EkfConfig {
    Mat q;  // process weight, n_x x n_x, PD
    Mat r;  // measurement weight, n_y x n_y, PD
    Mat p0; // initial covariance, PD
    double fd_step = 1e-6;
    int substeps = 4;
    /// Optional analytic linearization; numerical differencing otherwise.
    JacobianProvider jacobian;
};

inline Mat invert_spd(const Mat& m) {
    const std::size_t n = m.rows();
    Mat inv(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        Vec e(n, 0.0);
        e[c] = 1.0;
        const Vec col = solve_linear(m, e);
        for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
    }
    return inv;
}

struct EkfState {
    Vec x_hat;
    Mat p;
};

/// One sampling interval of the joint (x_hat, P) dynamics. P is symmetrized
/// after the step; losing positive definiteness raises divergence_error.
inline EkfState ekf_step(const PlantModel& plant, const EkfConfig& cfg, const EkfState& state,
                         const Vec& y, const Vec& u, double t_s) {
    const std::size_t n = plant.n_x;
    const Mat r_inv = invert_spd(cfg.r);
    auto jac = cfg.jacobian ? cfg.jacobian : [&](const Vec& x, const Vec& uu) {
        return jacobian_numeric(plant, x, uu, cfg.fd_step);
    };

    Vec joint(n + n * n);
    std::copy(state.x_hat.begin(), state.x_hat.end(), joint.begin());
    std::copy(state.p.data(), state.p.data() + n * n, joint.begin() + n);

    auto deriv = [&](const Vec& s, double) {
        Vec x_hat(s.begin(), s.begin() + n);
        Mat p(n, n);
        std::copy(s.begin() + n, s.end(), p.data());
        const auto [a, c] = jac(x_hat, u);
        const Mat ct_rinv = matmul(transpose(c), r_inv);
        const Mat gain = matmul(p, ct_rinv); // L = P C^T R^-1
        const Vec innovation = y - plant.output(x_hat);
        Vec dx = plant.rhs(x_hat, u);
        matvec_acc(gain, innovation, dx);
        // dP = A P + P A^T + Q - P C^T R^-1 C P
        Mat dp = matmul(a, p) + matmul(p, transpose(a)) + cfg.q -
                 matmul(gain, matmul(c, p));
        Vec out(n + n * n);
        std::copy(dx.begin(), dx.end(), out.begin());
        std::copy(dp.data(), dp.data() + n * n, out.begin() + n);
        return out;
    };
    joint = integrate_interval(deriv, joint, 0.0, t_s, cfg.substeps);

    EkfState next;
    next.x_hat.assign(joint.begin(), joint.begin() + n);
    Mat p(n, n);
    std::copy(joint.begin() + n, joint.end(), p.data());
    next.p = 0.5 * (p + transpose(p));
    const Vec eig = symmetric_eigenvalues(next.p);
    if (!(eig.front() > 0.0))
        throw divergence_error("ekf_step: covariance lost positive definiteness", 0);
    return next;
}

/// Printed linearization of the bioreactor (analytic alternative to the
/// numerical Jacobian).
inline JacobianProvider bioreactor_analytic_jacobian() {
    return [](const Vec& x, const Vec& u) {
        const double x1 = x[0], x2 = x[1];
        const double s = x1 + x2, s2 = s * s;
        Mat a(2, 2);
        a(0, 0) = (x2 * s - x1 * x2) / s2 - u[0];
        a(0, 1) = (x1 * s - x1 * x2) / s2;
        a(1, 0) = (-x2 * s + x1 * x2) / s2;
        a(1, 1) = (-x1 * s + x1 * x2) / s2 - u[0];
        Mat c(1, 2);
        c(0, 0) = 1.0;
        c(0, 1) = 0.0;
        return std::make_pair(a, c);
    };
}

} // namespace nlox
