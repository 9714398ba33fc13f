#pragma once

// Benchmark plants in the form xdot = f(x) + g(x) u, y = h(x). The
// Williams-Otto reactor is only affine in the feed flow (temperature enters
// through Arrhenius rates), so the simulator interface is the general
// right-hand side rhs(x, u); affine pieces are provided where they exist.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nlox/linalg.hpp"
#include "nlox/ode.hpp"
#include "nlox/rng.hpp"

namespace nlox {

struct StateInterval {
    double lo;
    double hi;
};

struct PlantModel {
    std::string name;
    std::size_t n_x = 0, n_u = 0, n_y = 0;

    /// Full dynamics xdot = rhs(x, u).
    std::function<Vec(const Vec&, const Vec&)> rhs;
    /// Output map y = h(x).
    std::function<Vec(const Vec&)> output;
    /// Drift f(x) and input matrix g(x); set only for genuinely affine plants.
    std::function<Vec(const Vec&)> drift;
    std::function<Mat(const Vec&)> input_matrix;

    /// Admissible box per state; trajectories outside raise a domain error.
    std::vector<StateInterval> state_domain;
    /// Draw x(0) from the plant's initial-condition rule.
    std::function<Vec(Rng&)> sample_initial_state;
    /// Operating point used as the deviation-variable origin.
    Vec equilibrium_state;
    Vec nominal_input;

    std::vector<std::string> state_names, input_names, output_names;

    bool in_domain(const Vec& x) const {
        for (std::size_t i = 0; i < n_x; ++i)
            if (!(x[i] >= state_domain[i].lo && x[i] <= state_domain[i].hi)) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Bioreactor (microorganism x1, substrate x2, dilution input u, y = x1)
// ---------------------------------------------------------------------------

struct BioreactorParams {
    double substrate_feed = 0.1;
};

/// Contois growth rate mu = x2 / (x1 + x2).
inline double contois_mu(double x1, double x2) {
    const double denom = x1 + x2;
    if (denom <= 1e-12)
        throw numeric_error("contois_mu: x1 + x2 at or below the singularity floor");
    return x2 / denom;
}

inline Vec bioreactor_dynamics(const Vec& x, double u, const BioreactorParams& p = {}) {
    const double mu = contois_mu(x[0], x[1]);
    return {mu * x[0] - u * x[0], -mu * x[0] + u * (p.substrate_feed - x[1])};
}

inline PlantModel make_bioreactor(BioreactorParams params = {}) {
    PlantModel m;
    m.name = "bioreactor";
    m.n_x = 2;
    m.n_u = 1;
    m.n_y = 1;
    m.drift = [params](const Vec& x) { return bioreactor_dynamics(x, 0.0, params); };
    m.input_matrix = [params](const Vec& x) {
        Mat g(2, 1);
        g(0, 0) = -x[0];
        g(1, 0) = params.substrate_feed - x[1];
        return g;
    };
    m.rhs = [params](const Vec& x, const Vec& u) { return bioreactor_dynamics(x, u[0], params); };
    m.output = [](const Vec& x) { return Vec{x[0]}; };
    m.state_domain = {{0.0, 1.0}, {0.0, 1.0}};
    m.sample_initial_state = [](Rng& rng) {
        return Vec{rng.uniform(0.05, 0.1), rng.uniform(0.05, 0.1)};
    };
    m.state_names = {"x1", "x2"};
    m.input_names = {"u"};
    m.output_names = {"x1"};
    // Washout point: an equilibrium of f + g u for every u > 0.
    m.equilibrium_state = {0.0, params.substrate_feed};
    m.nominal_input = {std::exp(0.4)};
    return m;
}

// ---------------------------------------------------------------------------
// Williams-Otto reactor (mass fractions A,B,C,E,G,P; inputs [F_B, T_R];
// outputs [x_E, x_P])
// ---------------------------------------------------------------------------

struct WilliamsOttoParams {
    double feed_a = 3.5;     // kg/s
    double holdup = 2500.0;  // kg
    double nominal_feed_b = 6.0;
    double nominal_temperature = 100.0; // Celsius
    // Arrhenius pre-exponentials (1/s) and activation quotients (K).
    double k_pre[3] = {1.6599e6, 7.2117e8, 2.6745e12};
    double k_act[3] = {-6666.67, -8333.33, -11111.0};
    double kelvin_offset = 273.15;
    bool dimensionless_time = true;

    double residence_time() const { return holdup / (feed_a + nominal_feed_b); }
};

inline std::array<double, 3> arrhenius_rates(double temperature_c,
                                             const WilliamsOttoParams& p = {}) {
    if (!(temperature_c > -p.kelvin_offset))
        throw numeric_error("arrhenius_rates: temperature at or below absolute zero");
    const double kelvin = temperature_c + p.kelvin_offset;
    return {p.k_pre[0] * std::exp(p.k_act[0] / kelvin), p.k_pre[1] * std::exp(p.k_act[1] / kelvin),
            p.k_pre[2] * std::exp(p.k_act[2] / kelvin)};
}

/// Mass balances for the six species; u = [F_B, T_R]. When
/// params.dimensionless_time is set the result is scaled by the nominal
/// residence time so the simulation clock counts residence times.
inline Vec williams_otto_dynamics(const Vec& x, const Vec& u, const WilliamsOttoParams& p = {}) {
    const double fb = u[0];
    const double flow = p.feed_a + fb;
    if (flow < 0.0) throw numeric_error("williams_otto_dynamics: negative total feed flow");
    const auto k = arrhenius_rates(u[1], p);
    const double xa = x[0], xb = x[1], xc = x[2], xe = x[3], xg = x[4], xp = x[5];
    const double r1 = k[0] * xa * xb;
    const double r2 = k[1] * xb * xc;
    const double r3 = k[2] * xc * xp;
    const double w = p.holdup;
    Vec dx = {(p.feed_a - flow * xa) / w - r1,
              (fb - flow * xb) / w - r1 - r2,
              -flow * xc / w + 2.0 * r1 - 2.0 * r2 - r3,
              -flow * xe / w + 2.0 * r2,
              -flow * xg / w + 1.5 * r3,
              -flow * xp / w + r2 - 0.5 * r3};
    if (p.dimensionless_time) {
        const double tau = p.residence_time();
        for (double& v : dx) v *= tau;
    }
    return dx;
}

/// Damped Newton solve of rhs(x, u) = 0 with numerical Jacobian.
inline Vec find_equilibrium(const PlantModel& plant, const Vec& u, Vec x, int max_iters = 200,
                            double tol = 1e-12) {
    const std::size_t n = plant.n_x;
    for (int iter = 0; iter < max_iters; ++iter) {
        Vec r = plant.rhs(x, u);
        const double rn = norm2(r);
        if (rn < tol) return x;
        Mat jac(n, n);
        const double step = 1e-7;
        for (std::size_t j = 0; j < n; ++j) {
            Vec xp = x, xm = x;
            xp[j] += step;
            xm[j] -= step;
            const Vec fp = plant.rhs(xp, u);
            const Vec fm = plant.rhs(xm, u);
            for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * step);
        }
        Vec delta = solve_linear(jac, r);
        double alpha = 1.0;
        for (int back = 0; back < 40; ++back) {
            Vec trial = x;
            axpy(-alpha, delta, trial);
            bool ok = true;
            for (double v : trial)
                if (!std::isfinite(v)) ok = false;
            if (ok && norm2(plant.rhs(trial, u)) < rn) {
                x = trial;
                break;
            }
            alpha *= 0.5;
            if (back == 39) {
                axpy(-alpha, delta, x);
            }
        }
    }
    throw numeric_error("find_equilibrium: Newton did not converge for plant " + plant.name);
}

inline PlantModel make_williams_otto(WilliamsOttoParams params = {}) {
    PlantModel m;
    m.name = "williams_otto";
    m.n_x = 6;
    m.n_u = 2;
    m.n_y = 2;
    m.rhs = [params](const Vec& x, const Vec& u) { return williams_otto_dynamics(x, u, params); };
    m.output = [](const Vec& x) { return Vec{x[3], x[5]}; };
    m.state_domain.assign(6, StateInterval{-0.05, 1.05});
    m.sample_initial_state = [](Rng& rng) {
        const double xa = rng.uniform(0.2, 0.6);
        return Vec{xa, 1.0 - xa, 0.0, 0.0, 0.0, 0.0};
    };
    m.state_names = {"xA", "xB", "xC", "xE", "xG", "xP"};
    m.input_names = {"FB", "TR"};
    m.output_names = {"xE", "xP"};
    m.nominal_input = {params.nominal_feed_b, params.nominal_temperature};
    // Reach the operating point by relaxation, then polish with Newton.
    Vec x = {0.4, 0.6, 0.0, 0.0, 0.0, 0.0};
    const double horizon = params.dimensionless_time ? 60.0 : 60.0 * params.residence_time();
    auto deriv = [&m](const Vec& s, double) { return m.rhs(s, Vec{6.0, 100.0}); };
    x = integrate_interval(deriv, x, 0.0, horizon, 4000);
    m.equilibrium_state = find_equilibrium(m, m.nominal_input, x);
    return m;
}

// ---------------------------------------------------------------------------
// Input disturbances (held constant over each sampling interval)
// ---------------------------------------------------------------------------

struct DisturbanceSpec {
    enum class Kind { none, input_additive_gaussian };
    Kind kind = Kind::none;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t target_input_index = 0;
};

/// One disturbance draw applied to the nominal input of a sampling interval.
inline Vec apply_disturbance(const Vec& u_nominal, const DisturbanceSpec& spec, Rng& rng) {
    if (spec.kind == DisturbanceSpec::Kind::none) return u_nominal;
    Vec u = u_nominal;
    u[spec.target_input_index] += rng.normal(spec.mean, spec.stddev);
    return u;
}

} // namespace nlox
