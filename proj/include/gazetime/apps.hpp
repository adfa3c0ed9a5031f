#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gazetime/errors.hpp"
#include "gazetime/geometry.hpp"
#include "gazetime/model.hpp"

namespace gazetime {

enum class HistogramDomain { vergence_deg, vergence_delta_deg, depth_m };

inline const char* to_string(HistogramDomain d) {
    switch (d) {
        case HistogramDomain::vergence_deg: return "vergence_deg";
        case HistogramDomain::vergence_delta_deg: return "vergence_delta_deg";
        case HistogramDomain::depth_m: return "depth_m";
    }
    return "?";
}

/// Discrete probability mass over depth or vergence bins; drives both
/// application studies.
struct DepthHistogram {
    HistogramDomain domain = HistogramDomain::depth_m;
    std::vector<double> centers;
    std::vector<double> mass;

    void validate() const {
        if (centers.size() != mass.size() || centers.empty())
            throw ValidationError("DepthHistogram: centers/mass size mismatch or empty");
        double total = 0.0;
        for (std::size_t i = 0; i < mass.size(); ++i) {
            if (!(mass[i] >= 0.0)) throw ValidationError("DepthHistogram: negative mass");
            if (i > 0 && !(centers[i] > centers[i - 1]))
                throw ValidationError("DepthHistogram: centers must be strictly increasing");
            total += mass[i];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ValidationError("DepthHistogram: mass must sum to 1 (got " +
                                  std::to_string(total) + ")");
    }
};

/// Drop vergence bins above the model ceiling and renormalize; returns the
/// truncated histogram and the mass fraction that was excluded.
inline std::pair<DepthHistogram, double> truncate_to_vergence_ceiling(const DepthHistogram& h,
                                                                      double max_vergence_deg) {
    if (h.domain != HistogramDomain::vergence_deg)
        throw ValidationError("truncate_to_vergence_ceiling: vergence-domain histogram required");
    h.validate();
    DepthHistogram out;
    out.domain = h.domain;
    double kept = 0.0;
    for (std::size_t i = 0; i < h.centers.size(); ++i) {
        if (h.centers[i] > max_vergence_deg) continue;
        out.centers.push_back(h.centers[i]);
        out.mass.push_back(h.mass[i]);
        kept += h.mass[i];
    }
    if (!(kept > 0.0))
        throw ValidationError("truncate_to_vergence_ceiling: no mass below the ceiling");
    for (double& m : out.mass) m /= kept;
    return {out, 1.0 - kept};
}

/// Distribution of vergence movement amplitudes when origin and target are
/// drawn independently from the same fixation histogram: the
/// cross-correlation of the histogram with itself. Requires a uniform grid;
/// the result lives on the difference grid (2B - 1 bins), is symmetric
/// about zero and sums to one.
inline DepthHistogram movement_pdf(const DepthHistogram& fixations) {
    if (fixations.domain != HistogramDomain::vergence_deg)
        throw ValidationError("movement_pdf: vergence-domain histogram required");
    fixations.validate();
    const std::size_t b = fixations.centers.size();
    if (b < 2) throw ValidationError("movement_pdf: need at least 2 bins");
    const double w = fixations.centers[1] - fixations.centers[0];
    for (std::size_t i = 1; i < b; ++i)
        if (std::abs(fixations.centers[i] - fixations.centers[i - 1] - w) > 1e-9 * std::max(w, 1.0))
            throw ValidationError("movement_pdf: bin grid must be uniform");
    DepthHistogram out;
    out.domain = HistogramDomain::vergence_delta_deg;
    out.centers.resize(2 * b - 1);
    out.mass.assign(2 * b - 1, 0.0);
    for (std::size_t k = 0; k < 2 * b - 1; ++k)
        out.centers[k] = (static_cast<double>(k) - static_cast<double>(b - 1)) * w;
    for (std::size_t t = 0; t < b; ++t)
        for (std::size_t o = 0; o < b; ++o)
            out.mass[t - o + (b - 1)] += fixations.mass[t] * fixations.mass[o];
    return out;
}

inline constexpr double kSaccadeRangeLoDeg = 4.0;
inline constexpr double kSaccadeRangeHiDeg = 12.0;
inline constexpr double kSaccadeQuadratureStepDeg = 0.1;

namespace detail {

/// Mean of expected_offset over the uniform saccade range at fixed dv
/// (composite trapezoid on a 0.1-degree grid).
inline double saccade_range_mean(const GazeModel& model, double dv, double lo, double hi) {
    const long n = std::lround((hi - lo) / kSaccadeQuadratureStepDeg);
    const double h = (hi - lo) / static_cast<double>(n);
    double acc = 0.5 * (expected_offset(model, {dv, lo}) + expected_offset(model, {dv, hi}));
    for (long i = 1; i < n; ++i)
        acc += expected_offset(model, {dv, lo + h * static_cast<double>(i)});
    return acc / static_cast<double>(n);
}

/// d/d_dv of saccade_range_mean.
inline double saccade_range_mean_dv_grad(const GazeModel& model, double dv, double lo, double hi) {
    const long n = std::lround((hi - lo) / kSaccadeQuadratureStepDeg);
    const double h = (hi - lo) / static_cast<double>(n);
    double acc = 0.5 * (expected_offset_gradient(model, {dv, lo})[0] +
                        expected_offset_gradient(model, {dv, hi})[0]);
    for (long i = 1; i < n; ++i)
        acc += expected_offset_gradient(model, {dv, lo + h * static_cast<double>(i)})[0];
    return acc / static_cast<double>(n);
}

}  // namespace detail

/// Mean offset time over a vergence-movement distribution and a uniform
/// saccade amplitude range. Movement amplitudes beyond the trained domain
/// are clamped to its boundary.
inline double game_mean_offset(const GazeModel& model, const DepthHistogram& movements,
                               double saccade_lo = kSaccadeRangeLoDeg,
                               double saccade_hi = kSaccadeRangeHiDeg) {
    if (movements.domain != HistogramDomain::vergence_delta_deg)
        throw ValidationError("game_mean_offset: movement-distribution histogram required");
    movements.validate();
    if (!(saccade_lo >= 0.0 && saccade_hi > saccade_lo &&
          saccade_hi <= model.domain.max_saccade_deg))
        throw ValidationError("game_mean_offset: saccade range outside the trained domain");
    double acc = 0.0;
    for (std::size_t i = 0; i < movements.centers.size(); ++i) {
        if (movements.mass[i] == 0.0) continue;
        const double dv = std::clamp(movements.centers[i], -model.domain.max_abs_vergence_deg,
                                     model.domain.max_abs_vergence_deg);
        acc += movements.mass[i] * detail::saccade_range_mean(model, dv, saccade_lo, saccade_hi);
    }
    return acc;
}

/// Mean offset time of a gaze movement from a display element at depth
/// d_hud to scene points drawn from the depth histogram, saccade amplitudes
/// uniform over the given range.
inline double hud_expected_offset(const GazeModel& model, const DepthHistogram& scene,
                                  double d_hud_m, const ObserverGeometry& geom,
                                  double saccade_lo = kSaccadeRangeLoDeg,
                                  double saccade_hi = kSaccadeRangeHiDeg) {
    if (scene.domain != HistogramDomain::depth_m)
        throw ValidationError("hud_expected_offset: depth-domain histogram required");
    scene.validate();
    if (!(d_hud_m > 0.0)) throw ValidationError("hud_expected_offset: HUD depth must be > 0");
    const double v_hud = vergence_from_depth(d_hud_m, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < scene.centers.size(); ++i) {
        if (scene.mass[i] == 0.0) continue;
        const double dv = std::clamp(vergence_from_depth(scene.centers[i], geom) - v_hud,
                                     -model.domain.max_abs_vergence_deg,
                                     model.domain.max_abs_vergence_deg);
        acc += scene.mass[i] * detail::saccade_range_mean(model, dv, saccade_lo, saccade_hi);
    }
    return acc;
}

/// d/d(d_hud) of hud_expected_offset, chained through the depth-to-vergence
/// conversion. Clamped bins contribute zero.
inline double hud_objective_gradient(const GazeModel& model, const DepthHistogram& scene,
                                     double d_hud_m, const ObserverGeometry& geom,
                                     double saccade_lo = kSaccadeRangeLoDeg,
                                     double saccade_hi = kSaccadeRangeHiDeg) {
    const double v_hud = vergence_from_depth(d_hud_m, geom);
    const double dvh_dd = vergence_depth_derivative(d_hud_m, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < scene.centers.size(); ++i) {
        if (scene.mass[i] == 0.0) continue;
        const double dv = vergence_from_depth(scene.centers[i], geom) - v_hud;
        if (std::abs(dv) > model.domain.max_abs_vergence_deg) continue;
        acc += scene.mass[i] *
               detail::saccade_range_mean_dv_grad(model, dv, saccade_lo, saccade_hi) * (-dvh_dd);
    }
    return acc;
}

struct HudOptimizeOptions {
    std::vector<double> starts{0.5, 1.0, 2.0, 5.0, 10.0};  // meters
    double min_depth_m = 0.3;
    double max_depth_m = 20.0;
    int max_iterations = 500;
};

/// HUD projection depth minimizing the expected offset: gradient descent in
/// depth from several starts, accepting only improving steps.
inline double optimize_hud_depth(const GazeModel& model, const DepthHistogram& scene,
                                 const ObserverGeometry& geom,
                                 const HudOptimizeOptions& opt = {}) {
    double best_d = opt.starts.front();
    double best_f = std::numeric_limits<double>::infinity();
    for (double start : opt.starts) {
        double x = std::clamp(start, opt.min_depth_m, opt.max_depth_m);
        double fx = hud_expected_offset(model, scene, x, geom);
        for (int it = 0; it < opt.max_iterations; ++it) {
            const double g = hud_objective_gradient(model, scene, x, geom);
            double step = 0.25;  // meters of travel per unit gradient scale
            bool moved = false;
            for (int half = 0; half < 40; ++half) {
                const double xn =
                    std::clamp(x - step * g / std::max(std::abs(g), 1e-12), opt.min_depth_m,
                               opt.max_depth_m);
                const double fn = hud_expected_offset(model, scene, xn, geom);
                if (fn < fx - 1e-15) {
                    x = xn;
                    fx = fn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (fx < best_f) {
            best_f = fx;
            best_d = x;
        }
    }
    return best_d;
}

// ---------------------------------------------------------------------------
// Histogram and depth-map ingestion

/// Histogram CSV: a header naming the domain ("vergence_deg,mass" or
/// "depth_m,mass" or "vergence_delta_deg,mass") then one center,mass row
/// per bin.
inline DepthHistogram read_histogram_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_histogram_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("read_histogram_csv: empty file " + path);
    DepthHistogram h;
    if (line.rfind("vergence_deg", 0) == 0) h.domain = HistogramDomain::vergence_deg;
    else if (line.rfind("vergence_delta_deg", 0) == 0) h.domain = HistogramDomain::vergence_delta_deg;
    else if (line.rfind("depth_m", 0) == 0) h.domain = HistogramDomain::depth_m;
    else throw ValidationError("read_histogram_csv: header must name the domain column in " + path);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw ValidationError("read_histogram_csv: bad row at line " + std::to_string(line_no));
        try {
            h.centers.push_back(std::stod(a));
            h.mass.push_back(std::stod(b));
        } catch (const std::logic_error&) {
            throw ValidationError("read_histogram_csv: bad number at line " +
                                  std::to_string(line_no));
        }
    }
    h.validate();
    return h;
}

inline void write_histogram_csv(const DepthHistogram& h, const std::string& path) {
    h.validate();
    std::ofstream out(path);
    if (!out) throw ValidationError("write_histogram_csv: cannot open " + path);
    out << to_string(h.domain) << ",mass\n";
    char buf[96];
    for (std::size_t i = 0; i < h.centers.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", h.centers[i], h.mass[i]);
        out << buf;
    }
}

/// Pool raw depth values into a log-spaced histogram (64 bins by default),
/// clipping to a plausible metric range.
inline DepthHistogram depths_to_histogram(const std::vector<double>& depths_m, int n_bins = 64,
                                          double min_depth_m = 0.1, double max_depth_m = 100.0) {
    if (depths_m.empty()) throw ValidationError("depths_to_histogram: no depth values");
    if (n_bins < 2) throw ValidationError("depths_to_histogram: need at least 2 bins");
    const double lmin = std::log(min_depth_m), lmax = std::log(max_depth_m);
    std::vector<long> counts(static_cast<std::size_t>(n_bins), 0);
    long kept = 0;
    for (double d : depths_m) {
        if (!(d > 0.0) || !std::isfinite(d)) continue;
        const double l = std::clamp(std::log(d), lmin, lmax);
        auto b = static_cast<std::size_t>((l - lmin) / (lmax - lmin) * n_bins);
        b = std::min(b, static_cast<std::size_t>(n_bins - 1));
        ++counts[b];
        ++kept;
    }
    if (kept == 0) throw ValidationError("depths_to_histogram: no positive finite depths");
    DepthHistogram h;
    h.domain = HistogramDomain::depth_m;
    for (int b = 0; b < n_bins; ++b) {
        const double lc = lmin + (lmax - lmin) * (b + 0.5) / n_bins;
        h.centers.push_back(std::exp(lc));
        h.mass.push_back(static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                         static_cast<double>(kept));
    }
    return h;
}

/// Flat little-endian float32 depth map (meters after scaling).
inline std::vector<double> read_depth_map_f32(const std::string& path, std::size_t width,
                                              std::size_t height, double scale_to_m = 1.0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("read_depth_map_f32: cannot open " + path);
    const std::size_t n = width * height;
    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
        throw ValidationError("read_depth_map_f32: short file " + path);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(raw[i]) * scale_to_m;
    return out;
}

/// Grayscale PGM (P2 ascii or P5 binary, 8 or 16 bit) depth image; pixel
/// values scale to meters.
inline std::vector<double> read_depth_map_pgm(const std::string& path, double scale_to_m) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("read_depth_map_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5")
        throw ValidationError("read_depth_map_pgm: not a PGM file: " + path);
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw ValidationError("read_depth_map_pgm: truncated header in " + path);
    };
    const std::size_t width = std::stoul(next_token());
    const std::size_t height = std::stoul(next_token());
    const unsigned long maxval = std::stoul(next_token());
    if (maxval == 0 || maxval > 65535)
        throw ValidationError("read_depth_map_pgm: bad maxval in " + path);
    const std::size_t n = width * height;
    std::vector<double> out(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::stod(next_token()) * scale_to_m;
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw ValidationError("read_depth_map_pgm: short pixel data in " + path);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = bytes == 2
                                 ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1])
                                 : static_cast<double>(raw[i]);
            out[i] = v * scale_to_m;
        }
    }
    return out;
}

}  // namespace gazetime
