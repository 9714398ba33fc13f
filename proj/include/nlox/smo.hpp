#pragma once

// Sliding-mode observer with adaptive gain scaling: the sign function is
// smoothed by tanh(./epsilon) and the gain column for each output is scaled
// by the magnitude of that output's residual.

#include "nlox/linalg.hpp"
#include "nlox/ode.hpp"
#include "nlox/plant.hpp"

namespace nlox {

struct SmoConfig {
    Mat gain;              // L', n_x x n_y
    double epsilon = 0.01; // tanh smoothing width
    int substeps = 4;
};

/// One sampling interval of x_hat' = f + g u + L' (rho . tanh(res/eps)),
/// rho = |y - h(x_hat)| recomputed continuously inside the integrand.
inline Vec smo_step(const PlantModel& plant, const SmoConfig& cfg, const Vec& x_hat, const Vec& y,
                    const Vec& u, double t_s) {
    if (!(cfg.epsilon > 0.0)) throw numeric_error("smo_step: epsilon must be positive");
    auto deriv = [&](const Vec& s, double) {
        Vec dx = plant.rhs(s, u);
        const Vec h = plant.output(s);
        Vec correction(plant.n_y);
        for (std::size_t j = 0; j < plant.n_y; ++j) {
            const double res = y[j] - h[j];
            correction[j] = std::abs(res) * std::tanh(res / cfg.epsilon);
        }
        matvec_acc(cfg.gain, correction, dx);
        return dx;
    };
    Vec next = integrate_interval(deriv, x_hat, 0.0, t_s, cfg.substeps);
    if (!all_finite(next)) throw divergence_error("smo_step: estimate diverged", 0);
    return next;
}

} // namespace nlox
