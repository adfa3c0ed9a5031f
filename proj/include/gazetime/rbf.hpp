#pragma once
#include <array>
#include <cmath>

#include "gazetime/errors.hpp"
#include "gazetime/geometry.hpp"

namespace gazetime {

/// Gradient of an RbfNet output wrt its own parameters.
struct RbfParamGrad {
    std::array<double, 4> d_weights{};
    std::array<std::array<double, 2>, 4> d_centers{};
    double d_shape_eps = 0.0;
};

/// A scalar field over displacement space: four Gaussian radial bases,
/// value(x) = sum_i w_i * exp(-(eps * ||x - c_i||)^2). Smooth in both the
/// input and every parameter, which is what the downstream optimizations
/// lean on.
struct RbfNet {
    static constexpr int kBases = 4;

    std::array<std::array<double, 2>, kBases> centers{};  // (dv, ds) degrees
    std::array<double, kBases> weights{};                 // seconds
    double shape_eps = 0.1;                               // 1/degrees

    RbfNet() = default;
    RbfNet(const std::array<std::array<double, 2>, kBases>& c,
           const std::array<double, kBases>& w, double eps)
        : centers(c), weights(w), shape_eps(eps) {
        if (!(shape_eps > 0.0)) throw ValidationError("RbfNet: shape_eps must be > 0");
    }

    double eval(const GazeDisplacement& x) const {
        const double e2 = shape_eps * shape_eps;
        double acc = 0.0;
        for (int i = 0; i < kBases; ++i) {
            const double dv = x.d_vergence_deg - centers[i][0];
            const double ds = x.d_saccade_deg - centers[i][1];
            acc += weights[i] * std::exp(-e2 * (dv * dv + ds * ds));
        }
        return acc;
    }

    RbfParamGrad grad_params(const GazeDisplacement& x) const {
        RbfParamGrad g;
        const double e2 = shape_eps * shape_eps;
        for (int i = 0; i < kBases; ++i) {
            const double dv = x.d_vergence_deg - centers[i][0];
            const double ds = x.d_saccade_deg - centers[i][1];
            const double r2 = dv * dv + ds * ds;
            const double phi = std::exp(-e2 * r2);
            g.d_weights[i] = phi;
            const double k = weights[i] * phi * 2.0 * e2;
            g.d_centers[i][0] = k * dv;  // toward the center raises phi
            g.d_centers[i][1] = k * ds;
            g.d_shape_eps += weights[i] * phi * (-2.0 * shape_eps) * r2;
        }
        return g;
    }

    /// (d/d_dv, d/d_ds) of eval at x.
    std::array<double, 2> grad_input(const GazeDisplacement& x) const {
        const double e2 = shape_eps * shape_eps;
        std::array<double, 2> g{0.0, 0.0};
        for (int i = 0; i < kBases; ++i) {
            const double dv = x.d_vergence_deg - centers[i][0];
            const double ds = x.d_saccade_deg - centers[i][1];
            const double k = weights[i] * std::exp(-e2 * (dv * dv + ds * ds)) * (-2.0 * e2);
            g[0] += k * dv;
            g[1] += k * ds;
        }
        return g;
    }

    bool operator==(const RbfNet&) const = default;
};

}  // namespace gazetime
