#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazetime/errors.hpp"
#include "gazetime/exgauss.hpp"
#include "gazetime/geometry.hpp"
#include "gazetime/rbf.hpp"

namespace gazetime {

/// Offset-time samples pooled for one displacement condition (saccade
/// amplitude already folded to its absolute value).
struct ConditionSamples {
    GazeDisplacement displacement;
    std::vector<double> offsets_s;
};

/// MLE result for one condition.
struct ConditionEstimate {
    GazeDisplacement displacement;
    ExGaussParams params;
    int n_trials = 0;
};

/// Box of displacement amplitudes the model was trained on.
struct AmplitudeDomain {
    double max_abs_vergence_deg = 8.4;
    double max_saccade_deg = 12.0;

    bool contains(const GazeDisplacement& d) const {
        return std::abs(d.d_vergence_deg) <= max_abs_vergence_deg &&
               std::abs(d.d_saccade_deg) <= max_saccade_deg;
    }
    GazeDisplacement clamp(const GazeDisplacement& d) const {
        return {std::clamp(d.d_vergence_deg, -max_abs_vergence_deg, max_abs_vergence_deg),
                std::clamp(d.d_saccade_deg, -max_saccade_deg, max_saccade_deg)};
    }
    bool operator==(const AmplitudeDomain&) const = default;
};

struct TrainConfig {
    double learning_rate = 1e-2;
    long iterations = 200000;
    std::uint64_t seed = 0;  // provenance; training itself is deterministic
    long trace_stride = 1000;
    bool allow_collapsed_axis = false;  // ablated (1D) condition sets
};

struct TrainingMeta {
    double learning_rate = 0.0;
    long iterations = 0;
    std::uint64_t seed = 0;
    long trace_stride = 0;
    std::array<double, 3> initial_loss{};  // (mu, sigma, tau), s^2
    std::array<double, 3> final_loss{};
    std::vector<std::array<double, 3>> loss_trace;

    bool operator==(const TrainingMeta&) const = default;
};

/// The trained offset-time model: one RBF field per ExGauss parameter.
struct GazeModel {
    RbfNet net_mu, net_sigma, net_tau;
    AmplitudeDomain domain;
    TrainingMeta meta;

    bool operator==(const GazeModel&) const = default;
};

inline constexpr double kParamFloorS = 1e-3;  // sigma/tau floor at prediction
inline constexpr int kMinTrialsPerCondition = 20;

/// Per-condition MLE stage. Groups must each carry >= 20 offsets.
inline std::vector<ConditionEstimate> fit_conditions(const std::vector<ConditionSamples>& groups) {
    std::vector<ConditionEstimate> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        if (static_cast<int>(g.offsets_s.size()) < kMinTrialsPerCondition)
            throw ValidationError("fit_conditions: condition (dv=" +
                                  std::to_string(g.displacement.d_vergence_deg) + ", ds=" +
                                  std::to_string(g.displacement.d_saccade_deg) + ") has only " +
                                  std::to_string(g.offsets_s.size()) + " trials (need >= 20)");
        out.push_back({g.displacement, exgauss_mle_fit(g.offsets_s),
                       static_cast<int>(g.offsets_s.size())});
    }
    return out;
}

namespace detail {

struct TrainPoint {
    double dv, ds;
};

/// Ridge least-squares weights for fixed centers/shape; returns the MSE too.
inline std::pair<std::array<double, 4>, double> rbf_lls(const std::vector<TrainPoint>& xs,
                                                        const std::vector<double>& ys,
                                                        const std::array<std::array<double, 2>, 4>& c,
                                                        double eps, double ridge = 1e-10) {
    const std::size_t n = xs.size();
    double phi[4];
    double ata[4][4] = {};
    double atb[4] = {};
    for (std::size_t k = 0; k < n; ++k) {
        for (int i = 0; i < 4; ++i) {
            const double dv = xs[k].dv - c[i][0], ds = xs[k].ds - c[i][1];
            phi[i] = std::exp(-eps * eps * (dv * dv + ds * ds));
        }
        for (int i = 0; i < 4; ++i) {
            atb[i] += phi[i] * ys[k];
            for (int j = 0; j < 4; ++j) ata[i][j] += phi[i] * phi[j];
        }
    }
    for (int i = 0; i < 4; ++i) ata[i][i] += ridge;
    // Gaussian elimination with partial pivoting
    int piv[4] = {0, 1, 2, 3};
    for (int col = 0; col < 4; ++col) {
        int best = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(ata[r][col]) > std::abs(ata[best][col])) best = r;
        std::swap(ata[col], ata[best]);
        std::swap(atb[col], atb[best]);
        std::swap(piv[col], piv[best]);
        const double pivot = ata[col][col];
        if (pivot == 0.0) throw NumericError("rbf_lls: singular normal equations");
        for (int r = col + 1; r < 4; ++r) {
            const double f = ata[r][col] / pivot;
            for (int cc = col; cc < 4; ++cc) ata[r][cc] -= f * ata[col][cc];
            atb[r] -= f * atb[col];
        }
    }
    std::array<double, 4> w{};
    for (int r = 3; r >= 0; --r) {
        double acc = atb[r];
        for (int cc = r + 1; cc < 4; ++cc) acc -= ata[r][cc] * w[cc];
        w[r] = acc / ata[r][r];
    }
    double sse = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double pred = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double dv = xs[k].dv - c[i][0], ds = xs[k].ds - c[i][1];
            pred += w[i] * std::exp(-eps * eps * (dv * dv + ds * ds));
        }
        const double r = pred - ys[k];
        sse += r * r;
    }
    return {w, sse / static_cast<double>(n)};
}

inline double rbf_mse(const std::vector<TrainPoint>& xs, const std::vector<double>& ys,
                      const std::array<std::array<double, 2>, 4>& c,
                      const std::array<double, 4>& w, double eps) {
    double sse = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        double pred = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double dv = xs[k].dv - c[i][0], ds = xs[k].ds - c[i][1];
            pred += w[i] * std::exp(-eps * eps * (dv * dv + ds * ds));
        }
        const double r = pred - ys[k];
        sse += r * r;
    }
    return sse / static_cast<double>(xs.size());
}

inline constexpr double kInputScaleDeg = 8.0;
inline constexpr std::array<double, 5> kInitEpsGrid{0.05, 0.08, 0.12, 0.18, 0.25};

/// Train one RBF field against scalar targets at the given coordinates.
///
/// Initialization scans every 4-subset of the training coordinates as
/// candidate centers against a small shape-parameter grid, solving the
/// (linear) weights by ridge least squares and keeping the lowest-loss
/// candidate. Full-batch gradient descent then runs at the configured rate
/// in scale-normalized space (inputs / 8 deg, targets / their std) with a
/// step-halving safeguard, so the recorded loss trace is monotone. A final
/// least-squares weight solve polishes the linear part.
inline RbfNet train_field(const std::vector<TrainPoint>& xs_raw, const std::vector<double>& ys_raw,
                          const TrainConfig& cfg, std::vector<double>* trace_out) {
    const std::size_t n = xs_raw.size();
    double yscale = 0.0, ymean = 0.0;
    for (double y : ys_raw) ymean += y;
    ymean /= static_cast<double>(n);
    for (double y : ys_raw) yscale += (y - ymean) * (y - ymean);
    yscale = std::sqrt(yscale / static_cast<double>(n));
    if (!(yscale > 0.0)) yscale = std::max(std::abs(ymean), 1e-12);

    std::vector<TrainPoint> xs(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = {xs_raw[i].dv / kInputScaleDeg, xs_raw[i].ds / kInputScaleDeg};
        ys[i] = ys_raw[i] / yscale;
    }

    // --- init: exhaustive subset x shape grid, LLS weights
    std::array<std::array<double, 2>, 4> best_c{};
    std::array<double, 4> best_w{};
    double best_eps = 0.0, best_loss = std::numeric_limits<double>::infinity();
    std::array<int, 4> idx{0, 1, 2, 3};
    const int m = static_cast<int>(n);
    auto consider = [&](const std::array<int, 4>& id) {
        std::array<std::array<double, 2>, 4> c;
        for (int i = 0; i < 4; ++i) c[i] = {xs[id[i]].dv, xs[id[i]].ds};
        for (double eps_raw : kInitEpsGrid) {
            const double eps = eps_raw * kInputScaleDeg;
            auto [w, loss] = rbf_lls(xs, ys, c, eps);
            if (loss < best_loss) {
                best_loss = loss;
                best_c = c;
                best_w = w;
                best_eps = eps;
            }
        }
    };
    // iterate 4-combinations of [0, m)
    for (idx[0] = 0; idx[0] < m - 3; ++idx[0])
        for (idx[1] = idx[0] + 1; idx[1] < m - 2; ++idx[1])
            for (idx[2] = idx[1] + 1; idx[2] < m - 1; ++idx[2])
                for (idx[3] = idx[2] + 1; idx[3] < m; ++idx[3]) consider(idx);

    // --- safeguarded full-batch gradient descent
    auto c = best_c;
    auto w = best_w;
    double leps = std::log(best_eps);
    double cur = best_loss;
    if (trace_out) trace_out->push_back(cur * yscale * yscale);
    const double nn = static_cast<double>(n);
    for (long it = 0; it < cfg.iterations; ++it) {
        const double eps = std::exp(leps);
        const double e2 = eps * eps;
        std::array<double, 4> gw{};
        std::array<std::array<double, 2>, 4> gc{};
        double geps = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double phi[4], dv[4], ds[4], r2[4];
            double pred = 0.0;
            for (int i = 0; i < 4; ++i) {
                dv[i] = xs[k].dv - c[i][0];
                ds[i] = xs[k].ds - c[i][1];
                r2[i] = dv[i] * dv[i] + ds[i] * ds[i];
                phi[i] = std::exp(-e2 * r2[i]);
                pred += w[i] * phi[i];
            }
            const double res = 2.0 / nn * (pred - ys[k]);
            for (int i = 0; i < 4; ++i) {
                gw[i] += res * phi[i];
                const double kk = res * w[i] * phi[i] * 2.0 * e2;
                gc[i][0] += kk * dv[i];
                gc[i][1] += kk * ds[i];
                geps += res * w[i] * phi[i] * (-2.0 * eps) * r2[i];
            }
        }
        const double gleps = geps * eps;
        if (!std::isfinite(cur))
            throw NumericError("train: non-finite loss at iteration " + std::to_string(it));
        double step = cfg.learning_rate;
        bool accepted = false;
        std::array<std::array<double, 2>, 4> c2;
        std::array<double, 4> w2;
        double leps2 = 0.0, lnew = 0.0;
        for (int half = 0; half < 40; ++half) {
            for (int i = 0; i < 4; ++i) {
                c2[i][0] = c[i][0] - step * gc[i][0];
                c2[i][1] = c[i][1] - step * gc[i][1];
                w2[i] = w[i] - step * gw[i];
            }
            leps2 = leps - step * gleps;
            lnew = rbf_mse(xs, ys, c2, w2, std::exp(leps2));
            if (lnew <= cur) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // no representable improving step along -grad: converged
            if (trace_out && trace_out->back() != cur * yscale * yscale)
                trace_out->push_back(cur * yscale * yscale);
            break;
        }
        c = c2;
        w = w2;
        leps = leps2;
        cur = lnew;
        if (trace_out && ((it + 1) % cfg.trace_stride == 0 || it + 1 == cfg.iterations))
            trace_out->push_back(cur * yscale * yscale);
    }

    // --- final weight polish (weights enter linearly)
    const double eps = std::exp(leps);
    auto [wp, lp] = rbf_lls(xs, ys, c, eps);
    if (lp <= cur) {
        w = wp;
        cur = lp;
    }
    if (trace_out) trace_out->push_back(cur * yscale * yscale);

    // map back to raw units
    RbfNet net;
    for (int i = 0; i < 4; ++i) {
        net.centers[i] = {c[i][0] * kInputScaleDeg, c[i][1] * kInputScaleDeg};
        net.weights[i] = w[i] * yscale;
    }
    net.shape_eps = eps / kInputScaleDeg;
    return net;
}

}  // namespace detail

/// RBF regression stage: one field per ExGauss parameter, minimizing the
/// per-parameter MSE between the condition estimates and the interpolation.
inline GazeModel train(const std::vector<ConditionEstimate>& estimates, const TrainConfig& cfg) {
    const std::size_t n = estimates.size();
    const std::size_t min_needed = cfg.allow_collapsed_axis ? 4 : 5;
    if (n < min_needed)
        throw ValidationError("train: need at least " + std::to_string(min_needed) +
                              " condition estimates, got " + std::to_string(n));
    if (!cfg.allow_collapsed_axis) {
        std::set<double> dvs, dss;
        for (const auto& e : estimates) {
            dvs.insert(e.displacement.d_vergence_deg);
            dss.insert(std::abs(e.displacement.d_saccade_deg));
        }
        if (dvs.size() < 2 || dss.size() < 2)
            throw ValidationError("train: estimates must span both displacement axes");
    }
    if (!(cfg.learning_rate > 0.0) || cfg.iterations < 1)
        throw ValidationError("train: learning rate and iterations must be positive");

    std::vector<detail::TrainPoint> xs(n);
    std::vector<double> mu(n), sigma(n), tau(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = {estimates[i].displacement.d_vergence_deg,
                 std::abs(estimates[i].displacement.d_saccade_deg)};
        mu[i] = estimates[i].params.mu;
        sigma[i] = estimates[i].params.sigma;
        tau[i] = estimates[i].params.tau;
    }

    GazeModel model;
    std::vector<double> tr_mu, tr_sigma, tr_tau;
    model.net_mu = detail::train_field(xs, mu, cfg, &tr_mu);
    model.net_sigma = detail::train_field(xs, sigma, cfg, &tr_sigma);
    model.net_tau = detail::train_field(xs, tau, cfg, &tr_tau);

    model.meta.learning_rate = cfg.learning_rate;
    model.meta.iterations = cfg.iterations;
    model.meta.seed = cfg.seed;
    model.meta.trace_stride = cfg.trace_stride;
    model.meta.initial_loss = {tr_mu.front(), tr_sigma.front(), tr_tau.front()};
    model.meta.final_loss = {tr_mu.back(), tr_sigma.back(), tr_tau.back()};
    const std::size_t tlen = std::max({tr_mu.size(), tr_sigma.size(), tr_tau.size()});
    model.meta.loss_trace.resize(tlen);
    auto at = [](const std::vector<double>& v, std::size_t i) {
        return i < v.size() ? v[i] : v.back();  // a field may stop early
    };
    for (std::size_t i = 0; i < tlen; ++i)
        model.meta.loss_trace[i] = {at(tr_mu, i), at(tr_sigma, i), at(tr_tau, i)};
    return model;
}

/// Predicted ExGauss parameters at a displacement. Saccade sign is folded
/// (leftward and rightward are symmetric); sigma and tau are floored at
/// 1 ms. Out-of-domain displacements are refused unless extrapolate is set.
inline ExGaussParams predict(const GazeModel& model, const GazeDisplacement& d,
                             bool extrapolate = false) {
    const GazeDisplacement folded{d.d_vergence_deg, std::abs(d.d_saccade_deg)};
    if (!extrapolate && !model.domain.contains(folded))
        throw ValidationError("predict: displacement outside the trained domain (pass extrapolate to override)");
    return {model.net_mu.eval(folded),
            std::max(model.net_sigma.eval(folded), kParamFloorS),
            std::max(model.net_tau.eval(folded), kParamFloorS)};
}

/// E[T] at a displacement: mu-hat + tau-hat.
inline double expected_offset(const GazeModel& model, const GazeDisplacement& d,
                              bool extrapolate = false) {
    const auto p = predict(model, d, extrapolate);
    return p.mu + p.tau;
}

/// Analytic (d/d_dv, d/d_ds) of expected_offset. The tau floor zeroes the
/// tau term where it binds; the saccade fold flips the ds component sign.
inline std::array<double, 2> expected_offset_gradient(const GazeModel& model,
                                                      const GazeDisplacement& d,
                                                      bool extrapolate = false) {
    const GazeDisplacement folded{d.d_vergence_deg, std::abs(d.d_saccade_deg)};
    if (!extrapolate && !model.domain.contains(folded))
        throw ValidationError("expected_offset_gradient: displacement outside the trained domain");
    auto g = model.net_mu.grad_input(folded);
    if (model.net_tau.eval(folded) > kParamFloorS) {
        const auto gt = model.net_tau.grad_input(folded);
        g[0] += gt[0];
        g[1] += gt[1];
    }
    if (d.d_saccade_deg < 0.0) g[1] = -g[1];
    return g;
}

/// Saccade amplitude minimizing E[T] at the given vergence amplitude:
/// dense 0.01-degree scan over [0, max_saccade], then gradient refinement
/// that only ever accepts improvements, so the result never exceeds the
/// grid minimum.
inline double optimal_saccade(const GazeModel& model, double dv_deg) {
    if (std::abs(dv_deg) > model.domain.max_abs_vergence_deg)
        throw ValidationError("optimal_saccade: vergence amplitude outside the trained domain");
    const double hi = model.domain.max_saccade_deg;
    double best_s = 0.0, best_e = expected_offset(model, {dv_deg, 0.0});
    const long steps = std::lround(hi / 0.01);
    for (long i = 1; i <= steps; ++i) {
        const double s = static_cast<double>(i) * 0.01;
        const double e = expected_offset(model, {dv_deg, s});
        if (e < best_e) {
            best_e = e;
            best_s = s;
        }
    }
    double x = best_s;
    double fx = best_e;
    for (int it = 0; it < 200; ++it) {
        const double g = expected_offset_gradient(model, {dv_deg, x})[1];
        double step = 0.01;
        bool moved = false;
        for (int half = 0; half < 30; ++half) {
            const double xn = std::clamp(x - step * g, 0.0, hi);
            const double fn = expected_offset(model, {dv_deg, xn});
            if (fn < fx) {
                x = xn;
                fx = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// JSON persistence

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kModelSchemaName = "gazetime-model";

inline nlohmann::json to_json(const RbfNet& net) {
    nlohmann::json j;
    j["centers"] = net.centers;
    j["weights"] = net.weights;
    j["eps"] = net.shape_eps;
    return j;
}

inline RbfNet rbf_from_json(const nlohmann::json& j) {
    RbfNet net;
    const auto& c = j.at("centers");
    const auto& w = j.at("weights");
    if (c.size() != 4 || w.size() != 4)
        throw ValidationError("model file: RBF net must have exactly 4 bases");
    for (int i = 0; i < 4; ++i) {
        net.centers[i] = {c[i].at(0).get<double>(), c[i].at(1).get<double>()};
        net.weights[i] = w[i].get<double>();
    }
    net.shape_eps = j.at("eps").get<double>();
    if (!(net.shape_eps > 0.0)) throw ValidationError("model file: eps must be > 0");
    return net;
}

inline nlohmann::json to_json(const GazeModel& m) {
    nlohmann::json j;
    j["schema"] = kModelSchemaName;
    j["version"] = kModelSchemaVersion;
    j["domain"] = {{"max_abs_vergence_deg", m.domain.max_abs_vergence_deg},
                   {"max_saccade_deg", m.domain.max_saccade_deg}};
    j["nets"] = {{"mu", to_json(m.net_mu)},
                 {"sigma", to_json(m.net_sigma)},
                 {"tau", to_json(m.net_tau)}};
    j["training_meta"] = {{"learning_rate", m.meta.learning_rate},
                          {"iterations", m.meta.iterations},
                          {"seed", m.meta.seed},
                          {"trace_stride", m.meta.trace_stride},
                          {"initial_loss", m.meta.initial_loss},
                          {"final_loss", m.meta.final_loss},
                          {"loss_trace", m.meta.loss_trace}};
    return j;
}

inline GazeModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", "") != kModelSchemaName)
        throw ValidationError("model file: unrecognized schema");
    if (j.at("version").get<int>() != kModelSchemaVersion)
        throw ValidationError("model file: unsupported version " + j.at("version").dump());
    GazeModel m;
    m.domain.max_abs_vergence_deg = j.at("domain").at("max_abs_vergence_deg").get<double>();
    m.domain.max_saccade_deg = j.at("domain").at("max_saccade_deg").get<double>();
    m.net_mu = rbf_from_json(j.at("nets").at("mu"));
    m.net_sigma = rbf_from_json(j.at("nets").at("sigma"));
    m.net_tau = rbf_from_json(j.at("nets").at("tau"));
    const auto& t = j.at("training_meta");
    m.meta.learning_rate = t.at("learning_rate").get<double>();
    m.meta.iterations = t.at("iterations").get<long>();
    m.meta.seed = t.at("seed").get<std::uint64_t>();
    m.meta.trace_stride = t.at("trace_stride").get<long>();
    m.meta.initial_loss = t.at("initial_loss").get<std::array<double, 3>>();
    m.meta.final_loss = t.at("final_loss").get<std::array<double, 3>>();
    for (const auto& row : t.at("loss_trace"))
        m.meta.loss_trace.push_back(row.get<std::array<double, 3>>());
    return m;
}

/// Write the model as human-readable JSON. Doubles round-trip exactly.
inline void save_model(const GazeModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("save_model: cannot open " + path);
    out << to_json(m).dump(2) << "\n";
    if (!out) throw ValidationError("save_model: write failed for " + path);
}

inline GazeModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("load_model: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("load_model: corrupt JSON in " + path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace gazetime
