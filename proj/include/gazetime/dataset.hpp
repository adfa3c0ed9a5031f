#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazetime/errors.hpp"
#include "gazetime/exgauss.hpp"
#include "gazetime/geometry.hpp"
#include "gazetime/model.hpp"
#include "gazetime/rbf.hpp"
#include "gazetime/trials.hpp"

namespace gazetime {

/// One row of the canonical trial CSV.
struct TrialRow {
    long trial_id = 0;
    int subject = 0;
    double dv_deg = 0.0;
    double ds_deg = 0.0;  // signed as presented; folded when grouping
    bool accepted = false;
    double offset_s = std::numeric_limits<double>::quiet_NaN();
    std::string reject_reason = "none";
    std::string trace_file;
};

inline constexpr const char* kTrialCsvHeader =
    "trial_id,subject,dv_deg,ds_deg,accepted,offset_s,reject_reason,trace_file";

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline void write_trials_csv(const std::vector<TrialRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_trials_csv: cannot open " + path);
    out << kTrialCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.trial_id << ',' << r.subject << ',' << detail::fmt_double(r.dv_deg) << ','
            << detail::fmt_double(r.ds_deg) << ',' << (r.accepted ? 1 : 0) << ','
            << detail::fmt_double(r.offset_s) << ',' << r.reject_reason << ',' << r.trace_file
            << "\n";
    }
    if (!out) throw ValidationError("write_trials_csv: write failed for " + path);
}

inline std::vector<TrialRow> read_trials_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_trials_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("read_trials_csv: empty file " + path);
    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required : {"trial_id", "subject", "dv_deg", "ds_deg", "accepted", "offset_s"})
        if (!col.count(required))
            throw ValidationError("read_trials_csv: missing column '" + std::string(required) +
                                  "' in " + path);
    std::vector<TrialRow> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < header.size())
            throw ValidationError("read_trials_csv: short row at line " + std::to_string(line_no));
        try {
            TrialRow r;
            r.trial_id = std::stol(f[col["trial_id"]]);
            r.subject = std::stoi(f[col["subject"]]);
            r.dv_deg = std::stod(f[col["dv_deg"]]);
            r.ds_deg = std::stod(f[col["ds_deg"]]);
            const std::string& acc = f[col["accepted"]];
            r.accepted = (acc == "1" || acc == "true" || acc == "True");
            const std::string& off = f[col["offset_s"]];
            r.offset_s = off.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(off);
            if (col.count("reject_reason")) r.reject_reason = f[col["reject_reason"]];
            if (col.count("trace_file")) r.trace_file = f[col["trace_file"]];
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ValidationError("read_trials_csv: bad value at line " + std::to_string(line_no) +
                                  " of " + path);
        }
    }
    return rows;
}

/// Pool accepted trials into per-displacement groups, folding saccade sign.
/// Keys are rounded to 1e-3 degrees so text round-trips regroup identically.
inline std::vector<ConditionSamples> group_trials(const std::vector<TrialRow>& rows) {
    std::map<std::pair<long, long>, ConditionSamples> groups;
    for (const auto& r : rows) {
        if (!r.accepted) continue;
        const double ds = std::abs(r.ds_deg);
        const std::pair<long, long> key{std::llround(r.dv_deg * 1000.0),
                                        std::llround(ds * 1000.0)};
        auto& g = groups[key];
        g.displacement = {static_cast<double>(key.first) / 1000.0,
                          static_cast<double>(key.second) / 1000.0};
        g.offsets_s.push_back(r.offset_s);
    }
    std::vector<ConditionSamples> out;
    out.reserve(groups.size());
    for (auto& [k, g] : groups) out.push_back(std::move(g));
    return out;
}

// ---------------------------------------------------------------------------
// Study condition grid

/// One experimental condition: where the gaze starts and how it must move.
struct StudyCondition {
    GazePoint origin;
    GazeDisplacement move;  // saccade amplitude unsigned; sign drawn per trial
};

/// The 22-condition grid. Movements run between three isovergence circles
/// (8.4, 4.2 and 0 degrees of vergence): divergent movements start on the
/// nearest circle, convergent on the farthest, saccade-only conditions run
/// at both near and far depth, combined conditions at every pairing.
inline std::vector<StudyCondition> study_grid() {
    constexpr double v_max = 8.4, v_mid = 4.2;
    std::vector<StudyCondition> out;
    // vergence-only: divergent from near, convergent from far
    out.push_back({{v_max, 0.0}, {-v_mid, 0.0}});
    out.push_back({{v_max, 0.0}, {-v_max, 0.0}});
    out.push_back({{0.0, 0.0}, {v_mid, 0.0}});
    out.push_back({{0.0, 0.0}, {v_max, 0.0}});
    // saccade-only at near and far depth
    for (double origin_v : {v_max, 0.0})
        for (double s : {4.0, 8.0, 12.0}) out.push_back({{origin_v, 0.0}, {0.0, s}});
    // combined
    for (double dv : {-v_mid, -v_max})
        for (double s : {4.0, 8.0, 12.0}) out.push_back({{v_max, 0.0}, {dv, s}});
    for (double dv : {v_mid, v_max})
        for (double s : {4.0, 8.0, 12.0}) out.push_back({{0.0, 0.0}, {dv, s}});
    return out;
}

/// The 19 unique displacement groups after folding (saccade-only conditions
/// at near and far depth share a displacement).
inline std::vector<GazeDisplacement> folded_displacements() {
    const auto grid = study_grid();
    std::vector<GazeDisplacement> out;
    for (const auto& c : grid) {
        const GazeDisplacement d{c.move.d_vergence_deg, std::abs(c.move.d_saccade_deg)};
        const bool dup = std::any_of(out.begin(), out.end(), [&](const GazeDisplacement& e) {
            return std::abs(e.d_vergence_deg - d.d_vergence_deg) < 1e-9 &&
                   std::abs(e.d_saccade_deg - d.d_saccade_deg) < 1e-9;
        });
        if (!dup) out.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Planted ground truth for the synthetic generator

/// The generator's ground-truth parameter fields. Frozen RBF triples whose
/// values at the condition grid mimic the study's summary statistics:
/// saccade-only movements average ~0.38 s, vergence-only ~0.57 s, combined
/// movements sit between, and divergent rows dip at mid saccade amplitudes
/// (interior U-shape near 7.4 degrees at dv = -8.4).
struct PlantedSurfaces {
    RbfNet mu, sigma, tau;

    ExGaussParams params_at(const GazeDisplacement& d) const {
        const GazeDisplacement folded{d.d_vergence_deg, std::abs(d.d_saccade_deg)};
        return {mu.eval(folded), sigma.eval(folded), tau.eval(folded)};
    }
    double expected_offset_at(const GazeDisplacement& d) const {
        const auto p = params_at(d);
        return p.mu + p.tau;
    }
};

inline PlantedSurfaces default_planted_surfaces() {
    PlantedSurfaces s;
    s.mu = RbfNet{{{{-8.4, 4.0}, {-4.2, 8.0}, {-4.2, 12.0}, {4.2, 4.0}}},
                  {5.1722425217934624, -13.41771276936009, 7.250671979369031,
                   2.459795649075855},
                  0.05};
    s.sigma = RbfNet{{{{-8.4, 0.0}, {0.0, 8.0}, {-8.4, 12.0}, {8.4, 8.0}}},
                     {0.3922908050456583, -1.7855726994846202, 0.7961328822043051,
                      1.1053435298174106},
                     0.05};
    s.tau = RbfNet{{{{-8.4, 4.0}, {-4.2, 8.0}, {-4.2, 12.0}, {4.2, 4.0}}},
                   {2.216675366482645, -5.750448329725037, 3.1074308483006274,
                    1.0541981353181056},
                   0.05};
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic dataset generation

struct SynthConfig {
    std::uint64_t seed = 1;
    int subjects = 1;
    int trials_per_condition = 72;
    double noise_deg = 0.1;         // tracker noise fed to the trace synthesizer
    bool via_traces = true;         // false: emit sampled offsets directly
    double sample_rate_hz = 200.0;
};

struct SynthResult {
    std::vector<TrialRow> rows;
    nlohmann::json manifest;
};

/// Draw trials for every condition of the study grid from the planted
/// surfaces. With via_traces the full loop runs per trial (sample a true
/// offset, synthesize a noisy trace, smooth, detect, gate) and rejected
/// attempts are redrawn, mirroring the study protocol of repeating failed
/// trials; rejected attempt counts land in the manifest.
inline SynthResult synthesize_dataset(const SynthConfig& cfg,
                                      const PlantedSurfaces& truth = default_planted_surfaces()) {
    if (cfg.subjects < 1 || cfg.trials_per_condition < 1)
        throw ValidationError("synthesize_dataset: subjects and trials must be positive");
    const auto grid = study_grid();
    Rng rng(cfg.seed);
    SynthResult res;
    res.rows.reserve(static_cast<std::size_t>(cfg.subjects) * grid.size() *
                     static_cast<std::size_t>(cfg.trials_per_condition));
    long next_id = 1;
    long rejected_attempts = 0;
    for (int subject = 1; subject <= cfg.subjects; ++subject) {
        for (const auto& cond : grid) {
            const auto p = truth.params_at(cond.move);
            for (int rep = 0; rep < cfg.trials_per_condition; ++rep) {
                // redraw until the trial passes the validity gates
                for (int attempt = 0; attempt < 1000; ++attempt) {
                    double true_offset = exgauss_draw(p, rng);
                    // left/right randomized; folding happens at grouping
                    const double side =
                        (cond.move.d_saccade_deg != 0.0 && rng.uniform() < 0.5) ? -1.0 : 1.0;
                    const GazeDisplacement move{cond.move.d_vergence_deg,
                                                side * cond.move.d_saccade_deg};
                    TrialRow row;
                    row.trial_id = next_id;
                    row.subject = subject;
                    row.dv_deg = move.d_vergence_deg;
                    row.ds_deg = move.d_saccade_deg;
                    if (cfg.via_traces) {
                        if (true_offset <= 0.02 || true_offset >= kMaxOffsetS) {
                            ++rejected_attempts;
                            continue;  // synthesizer precondition
                        }
                        const auto trace = synthesize_trace(true_offset, move, cond.origin,
                                                            cfg.noise_deg, rng.raw(),
                                                            cfg.sample_rate_hz);
                        const GazePoint target(cond.origin.vergence_deg + move.d_vergence_deg,
                                               cond.origin.saccade_deg + move.d_saccade_deg);
                        const auto outcome = process_trial(trace, target);
                        if (!outcome.accepted) {
                            ++rejected_attempts;
                            continue;
                        }
                        row.accepted = true;
                        row.offset_s = outcome.offset_s;
                    } else {
                        if (true_offset < kMinOffsetS || true_offset > kMaxOffsetS) {
                            ++rejected_attempts;
                            continue;
                        }
                        row.accepted = true;
                        row.offset_s = true_offset;
                    }
                    res.rows.push_back(std::move(row));
                    ++next_id;
                    break;
                }
            }
        }
    }

    nlohmann::json conditions = nlohmann::json::array();
    for (const auto& d : folded_displacements()) {
        const auto p = truth.params_at(d);
        conditions.push_back({{"dv_deg", d.d_vergence_deg},
                              {"ds_deg", d.d_saccade_deg},
                              {"true_mu", p.mu},
                              {"true_sigma", p.sigma},
                              {"true_tau", p.tau},
                              {"true_expected_offset", p.mu + p.tau}});
    }
    res.manifest = {{"schema", "gazetime-synth-manifest"},
                    {"version", 1},
                    {"seed", cfg.seed},
                    {"subjects", cfg.subjects},
                    {"trials_per_condition", cfg.trials_per_condition},
                    {"noise_deg", cfg.noise_deg},
                    {"via_traces", cfg.via_traces},
                    {"sample_rate_hz", cfg.sample_rate_hz},
                    {"rejected_attempts", rejected_attempts},
                    {"rows", res.rows.size()},
                    {"conditions", conditions}};
    return res;
}

}  // namespace gazetime
