#pragma once

// Fixed-step explicit integrators. Deterministic by construction: no
// adaptivity, no hidden state.

#include <string>

#include "nlox/linalg.hpp"

namespace nlox {

/// One classical 4th-order Runge-Kutta step of size h at time t.
/// Deriv is any callable (const Vec&, double t) -> Vec.
template <class Deriv>
Vec rk4_step(Deriv&& deriv, const Vec& state, double t, double h) {
    if (!(h > 0.0)) throw numeric_error("rk4_step: step size must be positive");
    const Vec k1 = deriv(state, t);
    Vec tmp = state;
    axpy(0.5 * h, k1, tmp);
    const Vec k2 = deriv(tmp, t + 0.5 * h);
    tmp = state;
    axpy(0.5 * h, k2, tmp);
    const Vec k3 = deriv(tmp, t + 0.5 * h);
    tmp = state;
    axpy(h, k3, tmp);
    const Vec k4 = deriv(tmp, t + h);
    Vec out = state;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(out))
        throw numeric_error("rk4_step: non-finite derivative near t = " + std::to_string(t));
    return out;
}

/// Integrate over [t0, t1] with the given number of equal RK4 substeps.
template <class Deriv>
Vec integrate_interval(Deriv&& deriv, Vec state, double t0, double t1, int substeps) {
    if (!(t1 > t0)) throw numeric_error("integrate_interval: t1 must exceed t0");
    if (substeps < 1) throw numeric_error("integrate_interval: substeps must be >= 1");
    const double h = (t1 - t0) / substeps;
    for (int i = 0; i < substeps; ++i) state = rk4_step(deriv, state, t0 + i * h, h);
    return state;
}

} // namespace nlox
