#pragma once
// Test-only numerical oracles, kept independent of the library code paths
// they are used to check.
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

/// Composite Simpson quadrature with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Central finite difference.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Brute-force argmin of f over [lo, hi] with the given step.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi,
                          double step) {
    double best_x = lo, best_f = f(lo);
    for (double x = lo + step; x <= hi + 0.5 * step; x += step) {
        const double v = f(std::min(x, hi));
        if (v < best_f) {
            best_f = v;
            best_x = std::min(x, hi);
        }
    }
    return best_x;
}

inline double grid_min(const std::function<double(double)>& f, double lo, double hi, double step) {
    return f(grid_argmin(f, lo, hi, step));
}

}  // namespace oracles
