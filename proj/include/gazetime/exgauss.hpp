#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "gazetime/errors.hpp"
#include "gazetime/random.hpp"

namespace gazetime {

/// Parameters of an exponentially modified Gaussian: the law of N + E with
/// N ~ Normal(mu, sigma^2) and E ~ Exponential(mean tau). All in seconds.
/// mu locates the distribution, sigma spreads it, tau skews it right.
struct ExGaussParams {
    double mu = 0.0;
    double sigma = 1.0;
    double tau = 1.0;

    ExGaussParams() = default;
    ExGaussParams(double mu_, double sigma_, double tau_) : mu(mu_), sigma(sigma_), tau(tau_) {
        if (!std::isfinite(mu) || !(sigma > 0.0) || !(tau > 0.0))
            throw ValidationError("ExGaussParams: need finite mu, sigma > 0, tau > 0");
    }

    double mean() const { return mu + tau; }
    double variance() const { return sigma * sigma + tau * tau; }
    double skewness() const {
        const double r = tau / sigma;
        return 2.0 * r * r * r * std::pow(1.0 + r * r, -1.5);
    }
};

namespace detail {

/// Scaled complementary error function exp(x^2) * erfc(x). Direct product
/// below the crossover (no overflow there); Laplace continued fraction
/// above it, where erfc underflows long before exp overflows.
inline double erfcx(double x) {
    if (x <= 5.0) return std::exp(x * x) * std::erfc(x);
    // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    double cf = 0.0;
    for (int k = 24; k >= 1; --k) cf = 0.5 * k / (x + cf);
    return (1.0 / std::numbers::sqrt_pi) / (x + cf);
}

/// log(erfc(x)), finite for all finite x.
inline double log_erfc(double x) {
    if (x <= 5.0) return std::log(std::erfc(x));  // erfc(5) ~ 1.5e-12, no underflow
    return -x * x + std::log(erfcx(x));
}

/// d/dx log(erfc(x)) = -(2/sqrt(pi)) exp(-x^2) / erfc(x).
inline double dlog_erfc(double x) {
    constexpr double two_over_sqrt_pi = 2.0 / std::numbers::sqrt_pi;
    if (x > 0.0) return -two_over_sqrt_pi / erfcx(x);
    return -two_over_sqrt_pi * std::exp(-x * x) / std::erfc(x);
}

}  // namespace detail

/// Log density. Written in log space so likelihood sums stay finite where
/// the density itself underflows.
inline double exgauss_log_pdf(const ExGaussParams& p, double t) {
    if (!std::isfinite(t)) throw ValidationError("exgauss_log_pdf: t must be finite");
    const double a = (p.mu - t) / p.tau + 0.5 * p.sigma * p.sigma / (p.tau * p.tau);
    const double u = (p.mu - t) / (std::numbers::sqrt2 * p.sigma) +
                     p.sigma / (std::numbers::sqrt2 * p.tau);
    return -std::log(2.0 * p.tau) + a + detail::log_erfc(u);
}

/// Density of the ExGauss law: (1/2tau) exp((2mu + sigma^2/tau - 2t)/(2tau))
///                              * erfc((mu + sigma^2/tau - t)/(sqrt2 sigma)).
inline double exgauss_pdf(const ExGaussParams& p, double t) {
    return std::exp(exgauss_log_pdf(p, t));
}

/// CDF via the identity F(t) = Phi((t - mu)/sigma) - tau * f(t).
inline double exgauss_cdf(const ExGaussParams& p, double t) {
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double z = (t - p.mu) / p.sigma;
    const double phi = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double f = std::exp(exgauss_log_pdf(p, t));
    return std::clamp(phi - p.tau * f, 0.0, 1.0);
}

/// Quantile by bisection; q in (0, 1).
inline double exgauss_quantile(const ExGaussParams& p, double q) {
    if (!(q > 0.0 && q < 1.0))
        throw ValidationError("exgauss_quantile: q must be in (0, 1)");
    double lo = p.mu - 10.0 * p.sigma;
    double hi = p.mu + 10.0 * p.sigma + p.tau * (-std::log1p(-q) + 10.0);
    while (exgauss_cdf(p, lo) > q) lo -= 10.0 * p.sigma + p.tau;
    while (exgauss_cdf(p, hi) < q) hi += 10.0 * p.sigma + p.tau;
    for (int i = 0; i < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (exgauss_cdf(p, mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// One draw: normal + exponential component.
inline double exgauss_draw(const ExGaussParams& p, Rng& rng) {
    return rng.normal(p.mu, p.sigma) + rng.exponential(p.tau);
}

/// n seeded draws.
inline std::vector<double> exgauss_sample(const ExGaussParams& p, std::size_t n,
                                          std::uint64_t seed) {
    if (n == 0) throw ValidationError("exgauss_sample: n must be > 0");
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = exgauss_draw(p, rng);
    return out;
}

/// Total log-likelihood of samples.
inline double exgauss_log_likelihood(const ExGaussParams& p, std::span<const double> samples) {
    double ll = 0.0;
    for (double t : samples) ll += exgauss_log_pdf(p, t);
    return ll;
}

namespace detail {

/// Gradient of the mean log-likelihood in (mu, log sigma, log tau).
inline std::array<double, 3> mean_ll_grad(const ExGaussParams& p,
                                          std::span<const double> xs) {
    const double s = p.sigma, tau = p.tau, mu = p.mu;
    double gmu = 0.0, gsig = 0.0, gtau = 0.0;
    for (double t : xs) {
        const double u = (mu - t) / (std::numbers::sqrt2 * s) + s / (std::numbers::sqrt2 * tau);
        const double g = dlog_erfc(u);
        gmu += 1.0 / tau + g / (std::numbers::sqrt2 * s);
        gsig += s / (tau * tau) + g * (-(mu - t) / (std::numbers::sqrt2 * s * s) +
                                       1.0 / (std::numbers::sqrt2 * tau));
        gtau += -1.0 / tau - (mu - t) / (tau * tau) - s * s / (tau * tau * tau) +
                g * (-s / (std::numbers::sqrt2 * tau * tau));
    }
    const double n = static_cast<double>(xs.size());
    return {gmu / n, gsig * s / n, gtau * tau / n};
}

inline double mean_ll(const std::array<double, 3>& theta, std::span<const double> xs) {
    const ExGaussParams p(theta[0], std::exp(theta[1]), std::exp(theta[2]));
    return exgauss_log_likelihood(p, xs) / static_cast<double>(xs.size());
}

}  // namespace detail

/// Maximum-likelihood fit. Moment-matched start, then BFGS with Armijo
/// backtracking on the mean log-likelihood over (mu, log sigma, log tau);
/// stops when the gradient norm drops below 1e-8 or after 1e4 iterations.
inline ExGaussParams exgauss_mle_fit(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 20) throw ValidationError("exgauss_mle_fit: need at least 20 samples");
    double m = 0.0;
    for (double x : samples) {
        if (!std::isfinite(x)) throw ValidationError("exgauss_mle_fit: non-finite sample");
        m += x;
    }
    m /= static_cast<double>(n);
    double var = 0.0, skew = 0.0;
    for (double x : samples) {
        const double d = x - m;
        var += d * d;
        skew += d * d * d;
    }
    var /= static_cast<double>(n);
    if (!(var > 1e-16)) throw NumericError("exgauss_mle_fit: degenerate (zero-variance) samples");
    const double sd = std::sqrt(var);
    skew = skew / static_cast<double>(n) / (sd * sd * sd);

    // moment-matched initializer; clamp keeps the start strictly inside the domain
    const double tau0 = std::max(sd * std::cbrt(std::max(skew, 0.01) / 2.0), 1e-3);
    const double mu0 = m - tau0;
    const double sig0 = std::sqrt(std::max(var - tau0 * tau0, 1e-8));

    std::array<double, 3> theta{mu0, std::log(sig0), std::log(tau0)};
    double fcur = detail::mean_ll(theta, samples);

    // BFGS on -mean_ll with inverse-Hessian approximation H
    std::array<std::array<double, 3>, 3> H{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    auto grad = [&](const std::array<double, 3>& th) {
        const ExGaussParams p(th[0], std::exp(th[1]), std::exp(th[2]));
        return detail::mean_ll_grad(p, samples);
    };
    std::array<double, 3> g = grad(theta);

    for (int it = 0; it < 10000; ++it) {
        const double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        if (gnorm < 1e-8) break;
        // ascent direction d = H g
        std::array<double, 3> d{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) d[i] += H[i][j] * g[j];
        double dg = d[0] * g[0] + d[1] * g[1] + d[2] * g[2];
        if (!(dg > 0.0)) {  // reset on loss of positive definiteness
            H = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
            d = g;
            dg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        }
        // cap the raw step length
        const double dnorm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        double step = dnorm > 1.0 ? 1.0 / dnorm : 1.0;
        std::array<double, 3> tnew{};
        double fnew = 0.0;
        bool ok = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (int i = 0; i < 3; ++i) tnew[i] = theta[i] + step * d[i];
            fnew = detail::mean_ll(tnew, samples);
            if (std::isfinite(fnew) && fnew >= fcur + 1e-4 * step * dg) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;  // no admissible step: converged as far as the surface allows
        const std::array<double, 3> gnew = grad(tnew);
        std::array<double, 3> sv{}, yv{};
        for (int i = 0; i < 3; ++i) {
            sv[i] = tnew[i] - theta[i];
            yv[i] = g[i] - gnew[i];  // curvature of -mean_ll
        }
        const double sy = sv[0] * yv[0] + sv[1] * yv[1] + sv[2] * yv[2];
        if (sy > 1e-12) {
            // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
            std::array<double, 3> Hy{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) Hy[i] += H[i][j] * yv[j];
            const double yHy = yv[0] * Hy[0] + yv[1] * Hy[1] + yv[2] * Hy[2];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    H[i][j] += (sy + yHy) * sv[i] * sv[j] / (sy * sy) -
                               (Hy[i] * sv[j] + sv[i] * Hy[j]) / sy;
        }
        theta = tnew;
        fcur = fnew;
        g = gnew;
    }
    return {theta[0], std::exp(theta[1]), std::exp(theta[2])};
}

}  // namespace gazetime
