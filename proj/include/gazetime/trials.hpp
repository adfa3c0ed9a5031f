#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gazetime/errors.hpp"
#include "gazetime/geometry.hpp"
#include "gazetime/random.hpp"

namespace gazetime {

/// Binocular eye-angle time series at a fixed sample rate. Angles are the
/// transverse-plane direction of each eye in degrees; timestamps are
/// implicit (sample k at k / sample_rate_hz, t = 0 at stimulus onset).
struct GazeTrace {
    double sample_rate_hz = 200.0;
    std::vector<double> left_deg;
    std::vector<double> right_deg;

    void validate() const {
        if (!(sample_rate_hz > 0.0)) throw ValidationError("GazeTrace: sample rate must be > 0");
        if (left_deg.size() != right_deg.size())
            throw ValidationError("GazeTrace: channel lengths differ");
    }
};

enum class RejectReason { none, too_fast, too_slow, no_landing };

inline const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::too_fast: return "too-fast";
        case RejectReason::too_slow: return "too-slow";
        case RejectReason::no_landing: return "no-landing";
    }
    return "?";
}

inline RejectReason reject_reason_from_string(const std::string& s) {
    if (s == "none" || s.empty()) return RejectReason::none;
    if (s == "too-fast") return RejectReason::too_fast;
    if (s == "too-slow") return RejectReason::too_slow;
    if (s == "no-landing") return RejectReason::no_landing;
    throw ValidationError("unknown reject reason: " + s);
}

struct TrialOutcome {
    bool accepted = false;
    double offset_s = std::numeric_limits<double>::quiet_NaN();
    RejectReason reason = RejectReason::no_landing;
};

// trial validity window and detection gates
inline constexpr double kMinOffsetS = 0.1;
inline constexpr double kMaxOffsetS = 1.3;
inline constexpr double kSpeedGateDegPerS = 5.0;
inline constexpr double kLandingWindowDeg = 1.0;
inline constexpr double kSmoothingCutoffHz = 25.0;

namespace detail {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

/// 2nd-order Butterworth low-pass by bilinear transform with prewarped
/// cutoff; unity DC gain by construction.
inline Biquad butterworth_lowpass(double cutoff_hz, double sample_rate_hz) {
    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    return {k2 * norm, 2.0 * k2 * norm, k2 * norm,
            2.0 * (k2 - 1.0) * norm, (1.0 - std::numbers::sqrt2 * k + k2) * norm};
}

/// One pass, direct form II transposed, state initialized to the step
/// steady state of x0 so constant signals pass through unchanged.
inline void filter_inplace(std::vector<double>& x, const Biquad& f) {
    if (x.empty()) return;
    double z1 = (1.0 - f.b0) * x.front();
    double z2 = (f.b2 - f.a2) * x.front();
    for (double& v : x) {
        const double y = f.b0 * v + z1;
        z1 = f.b1 * v - f.a1 * y + z2;
        z2 = f.b2 * v - f.a2 * y;
        v = y;
    }
}

/// Forward-backward (zero-phase) filtering with odd-extension padding.
inline std::vector<double> filtfilt(const std::vector<double>& x, const Biquad& f) {
    if (x.size() < 2) return x;
    const std::size_t pad = std::min<std::size_t>(12, x.size() - 1);
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);
    filter_inplace(ext, f);
    std::reverse(ext.begin(), ext.end());
    filter_inplace(ext, f);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

}  // namespace detail

/// Zero-phase 25 Hz low-pass of both channels. Requires the sample rate to
/// sit above twice the cutoff.
inline GazeTrace smooth(const GazeTrace& trace) {
    trace.validate();
    if (trace.sample_rate_hz <= 2.0 * kSmoothingCutoffHz)
        throw ValidationError("smooth: sample rate must exceed twice the 25 Hz cutoff");
    const auto f = detail::butterworth_lowpass(kSmoothingCutoffHz, trace.sample_rate_hz);
    GazeTrace out;
    out.sample_rate_hz = trace.sample_rate_hz;
    out.left_deg = detail::filtfilt(trace.left_deg, f);
    out.right_deg = detail::filtfilt(trace.right_deg, f);
    return out;
}

/// Earliest time at which both eyes move slower than 5 deg/s and sit within
/// 1 deg of their per-eye target angles; speeds are central differences on
/// the (already smoothed) channels. nullopt when the trace never lands.
inline std::optional<double> detect_offset(const GazeTrace& trace, const GazePoint& target) {
    trace.validate();
    const auto [target_l, target_r] = eyes_from_gaze(target);
    const std::size_t n = trace.left_deg.size();
    if (n < 3) return std::nullopt;
    const double dt = 1.0 / trace.sample_rate_hz;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double vl = (trace.left_deg[k + 1] - trace.left_deg[k - 1]) / (2.0 * dt);
        const double vr = (trace.right_deg[k + 1] - trace.right_deg[k - 1]) / (2.0 * dt);
        if (std::abs(vl) < kSpeedGateDegPerS && std::abs(vr) < kSpeedGateDegPerS &&
            std::abs(trace.left_deg[k] - target_l) < kLandingWindowDeg &&
            std::abs(trace.right_deg[k] - target_r) < kLandingWindowDeg)
            return static_cast<double>(k) * dt;
    }
    return std::nullopt;
}

/// Accept offsets inside [0.1, 1.3] s; classify everything else.
inline TrialOutcome validate_offset(const std::optional<double>& offset) {
    if (!offset) return {false, std::numeric_limits<double>::quiet_NaN(), RejectReason::no_landing};
    if (*offset < kMinOffsetS) return {false, *offset, RejectReason::too_fast};
    if (*offset > kMaxOffsetS) return {false, *offset, RejectReason::too_slow};
    return {true, *offset, RejectReason::none};
}

/// smooth + detect + validate in one step.
inline TrialOutcome process_trial(const GazeTrace& raw, const GazePoint& target) {
    return validate_offset(detect_offset(smooth(raw), target));
}

/// Synthetic trace: hold at the origin, then a quintic-smoothstep movement
/// that completes at true_offset, then a hold at the target, plus white
/// tracker noise per channel. The movement duration follows a
/// main-sequence-like rule (21 ms + 2.2 ms/deg of the larger per-eye
/// amplitude) so the speed gate clears within a sample of completion.
inline GazeTrace synthesize_trace(double true_offset_s, const GazeDisplacement& move,
                                  const GazePoint& origin, double noise_deg,
                                  std::uint64_t seed, double sample_rate_hz = 200.0,
                                  double hold_s = 0.3) {
    if (!(true_offset_s > 0.0 && true_offset_s < kMaxOffsetS))
        throw ValidationError("synthesize_trace: true offset must lie in (0, 1.3) s");
    const GazePoint target(origin.vergence_deg + move.d_vergence_deg,
                           origin.saccade_deg + move.d_saccade_deg);
    const auto [ol, orr] = eyes_from_gaze(origin);
    const auto [tl, tr] = eyes_from_gaze(target);
    const double amp = std::max(std::abs(tl - ol), std::abs(tr - orr));
    const double dur = std::clamp(0.021 + 0.0022 * amp, 0.02, std::max(0.02, 0.8 * true_offset_s));
    const double latency = true_offset_s - dur;

    const std::size_t n =
        static_cast<std::size_t>(std::llround((true_offset_s + hold_s) * sample_rate_hz)) + 1;
    GazeTrace trace;
    trace.sample_rate_hz = sample_rate_hz;
    trace.left_deg.resize(n);
    trace.right_deg.resize(n);
    Rng rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / sample_rate_hz;
        double s = 0.0;
        if (t >= latency) {
            const double u = std::min((t - latency) / dur, 1.0);
            s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));  // quintic smoothstep
        }
        trace.left_deg[k] = ol + (tl - ol) * s + noise_deg * rng.normal();
        trace.right_deg[k] = orr + (tr - orr) * s + noise_deg * rng.normal();
    }
    return trace;
}

}  // namespace gazetime
