#pragma once

// Composite Gauss-Legendre quadrature. Nodes and weights for the reference
// interval [-1,1] are computed once per order by Newton iteration on the
// Legendre polynomial (machine-precision roots for the small orders used
// here).

#include <cmath>
#include <string>
#include <vector>

#include "nlox/errors.hpp"

namespace nlox {

struct QuadratureRule {
    std::vector<double> nodes;   // in (-1, 1)
    std::vector<double> weights; // sum to 2
};

inline QuadratureRule gauss_legendre_rule(int n) {
    if (n < 1) throw numeric_error("gauss_legendre_rule: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence: (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}
            double p0 = 1.0, p1 = x;
            for (int j = 1; j < n; ++j) {
                const double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Composite Gauss-Legendre integral of f over [a, b] with `panels` equal
/// panels of `nodes_per_panel` points each. Exact for polynomials of degree
/// < 2 * nodes_per_panel on each panel.
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels, int nodes_per_panel) {
    if (a > b) throw numeric_error("gauss_legendre: interval is reversed");
    if (panels < 1) throw numeric_error("gauss_legendre: need at least one panel");
    if (a == b) return 0.0;
    const QuadratureRule rule = gauss_legendre_rule(nodes_per_panel);
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        double acc = 0.0;
        for (int i = 0; i < nodes_per_panel; ++i) {
            const double s = mid + 0.5 * h * rule.nodes[i];
            const double fs = f(s);
            if (!std::isfinite(fs))
                throw numeric_error("gauss_legendre: non-finite integrand at s = " +
                                    std::to_string(s));
            acc += rule.weights[i] * fs;
        }
        total += 0.5 * h * acc;
    }
    return total;
}

} // namespace nlox
