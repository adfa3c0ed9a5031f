#pragma once
#include <cmath>
#include <numbers>
#include <utility>

#include "gazetime/errors.hpp"

namespace gazetime {

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;
inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

/// A gaze location on the transverse plane in (vergence, saccade)
/// coordinates, both in degrees. The vergence angle is the angle between
/// the two gaze rays (never negative); the saccade angle is the mean
/// direction of the two eyes relative to straight ahead.
struct GazePoint {
    double vergence_deg = 0.0;
    double saccade_deg = 0.0;

    GazePoint() = default;
    GazePoint(double vergence, double saccade)
        : vergence_deg(vergence), saccade_deg(saccade) {
        if (!std::isfinite(vergence_deg) || !std::isfinite(saccade_deg))
            throw ValidationError("GazePoint: coordinates must be finite");
        if (vergence_deg < 0.0)
            throw ValidationError("GazePoint: vergence angle must be >= 0");
    }
};

/// A gaze movement in displacement coordinates, degrees. Positive
/// d_vergence is convergent (toward the observer), negative divergent.
struct GazeDisplacement {
    double d_vergence_deg = 0.0;
    double d_saccade_deg = 0.0;
};

/// Per-observer quantities needed for depth <-> vergence conversion.
struct ObserverGeometry {
    double ipd_m;

    explicit ObserverGeometry(double ipd) : ipd_m(ipd) {
        // physiological plausibility window, meters
        if (!(ipd_m >= 0.050 && ipd_m <= 0.080))
            throw ValidationError("ObserverGeometry: IPD must be in [0.050, 0.080] m");
    }
};

/// Full vergence angle (degrees) of a fixation at the given depth:
/// 2*atan(ipd / (2*depth)). Strictly decreasing in depth.
inline double vergence_from_depth(double depth_m, const ObserverGeometry& geom) {
    if (!(depth_m > 0.0))
        throw ValidationError("vergence_from_depth: depth must be > 0");
    return 2.0 * std::atan(geom.ipd_m / (2.0 * depth_m)) * kDegPerRad;
}

/// Inverse of vergence_from_depth.
inline double depth_from_vergence(double vergence_deg, const ObserverGeometry& geom) {
    if (!(vergence_deg > 0.0))
        throw ValidationError("depth_from_vergence: vergence must be > 0");
    return geom.ipd_m / (2.0 * std::tan(0.5 * vergence_deg * kRadPerDeg));
}

/// Derivative of vergence_from_depth wrt depth, degrees per meter.
inline double vergence_depth_derivative(double depth_m, const ObserverGeometry& geom) {
    if (!(depth_m > 0.0))
        throw ValidationError("vergence_depth_derivative: depth must be > 0");
    const double w = geom.ipd_m;
    return -w / (depth_m * depth_m + 0.25 * w * w) * kDegPerRad;
}

/// Signed per-eye angles (left, right) wrt straight ahead:
/// vergence = left - right, saccade = (left + right) / 2.
inline std::pair<double, double> eyes_from_gaze(const GazePoint& p) {
    return {p.saccade_deg + 0.5 * p.vergence_deg,
            p.saccade_deg - 0.5 * p.vergence_deg};
}

/// Inverse of eyes_from_gaze. left < right would mean negative vergence.
inline GazePoint gaze_from_eyes(double left_deg, double right_deg) {
    if (left_deg < right_deg)
        throw ValidationError("gaze_from_eyes: left angle below right implies negative vergence");
    return {left_deg - right_deg, 0.5 * (left_deg + right_deg)};
}

/// Component-wise displacement from origin to target.
inline GazeDisplacement displacement(const GazePoint& origin, const GazePoint& target) {
    return {target.vergence_deg - origin.vergence_deg,
            target.saccade_deg - origin.saccade_deg};
}

}  // namespace gazetime
