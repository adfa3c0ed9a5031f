#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "gazetime/exgauss.hpp"
#include "../support/oracles.hpp"

using namespace gazetime;
using Catch::Approx;

TEST_CASE("erfcx spot values") {
    // frozen from 40-digit arbitrary-precision evaluation
    CHECK(detail::erfcx(0.5) == Approx(0.6156903441929258749).epsilon(1e-13));
    CHECK(detail::erfcx(1.0) == Approx(0.4275835761558070044).epsilon(1e-13));
    CHECK(detail::erfcx(2.0) == Approx(0.2553956763105057439).epsilon(1e-13));
    CHECK(detail::erfcx(5.0) == Approx(0.1107046377330686264).epsilon(1e-13));
    CHECK(detail::erfcx(6.0) == Approx(0.0927765678005383544).epsilon(1e-13));
    CHECK(detail::erfcx(10.0) == Approx(0.0561409927438225859).epsilon(1e-13));
    CHECK(detail::erfcx(30.0) == Approx(0.0187958888614167515).epsilon(1e-13));
    CHECK(detail::erfcx(100.0) == Approx(0.0056416137829894329).epsilon(1e-13));
    CHECK(detail::erfcx(-1.0) == Approx(5.0089800807622834663).epsilon(1e-13));
}

TEST_CASE("pdf matches the convolution oracle") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    // frozen: numerical convolution of Normal(0.3, 0.05^2) with Exp(mean 0.1) at t=0.35
    CHECK(exgauss_pdf(p, 0.35) == Approx(4.7523473632004700937).epsilon(1e-12));
    // recompute the convolution here as an in-test oracle at several points
    for (double t : {0.15, 0.3, 0.45, 0.8}) {
        const double conv = oracles::simpson(
            [&](double n) {
                const double z = (n - p.mu) / p.sigma;
                const double gauss =
                    std::exp(-0.5 * z * z) / (p.sigma * std::sqrt(2.0 * std::numbers::pi));
                return n <= t ? gauss * std::exp(-(t - n) / p.tau) / p.tau : 0.0;
            },
            p.mu - 12.0 * p.sigma, t, 20000);
        CHECK(exgauss_pdf(p, t) == Approx(conv).epsilon(1e-8));
    }
}

TEST_CASE("pdf integrates to one") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    const double mass = oracles::simpson([&](double t) { return exgauss_pdf(p, t); },
                                         p.mu - 10.0 * p.sigma, p.mu + 10.0 * p.sigma + 40.0 * p.tau,
                                         40000);
    CHECK(mass == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pdf degenerates to the exponential at tiny sigma") {
    const ExGaussParams p(0.0, 1e-6, 1.0);
    for (double t : {0.1, 0.5, 1.0, 2.0})
        CHECK(exgauss_pdf(p, t) == Approx(std::exp(-t)).epsilon(1e-6));
}

TEST_CASE("pdf rejects non-finite input") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    CHECK_THROWS_AS(exgauss_pdf(p, std::numeric_limits<double>::quiet_NaN()), ValidationError);
}

TEST_CASE("log pdf stays finite where pdf underflows") {
    const ExGaussParams p(0.3, 0.001, 0.001);
    CHECK(exgauss_pdf(p, 0.0) == 0.0);  // underflows
    CHECK(std::isfinite(exgauss_log_pdf(p, 0.0)));
    CHECK(std::isfinite(exgauss_log_pdf(p, -5.0)));
}

TEST_CASE("cdf matches frozen quadrature values and limits") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    // frozen from 40-digit evaluation of Phi((t-mu)/sigma) - tau * pdf(t)
    CHECK(exgauss_cdf(p, 0.2) == Approx(0.0036230161855814802).epsilon(1e-10));
    CHECK(exgauss_cdf(p, 0.4) == Approx(0.5882372332233171728).epsilon(1e-10));
    CHECK(exgauss_cdf(p, 0.6) == Approx(0.9435838605809528118).epsilon(1e-10));
    CHECK(exgauss_cdf(p, -std::numeric_limits<double>::infinity()) == 0.0);
    CHECK(exgauss_cdf(p, std::numeric_limits<double>::infinity()) == 1.0);
    // integral of the pdf reproduces the cdf
    for (double t : {0.2, 0.4, 0.6}) {
        const double quad = oracles::simpson([&](double x) { return exgauss_pdf(p, x); },
                                             p.mu - 12.0 * p.sigma, t, 20000);
        CHECK(exgauss_cdf(p, t) == Approx(quad).margin(1e-8));
    }
}

TEST_CASE("cdf is monotone and consistent with the pdf derivative") {
    const ExGaussParams p(0.45, 0.09, 0.2);
    double prev = 0.0;
    for (double t = -0.2; t <= 2.0; t += 0.01) {
        const double c = exgauss_cdf(p, t);
        CHECK(c >= prev);
        prev = c;
    }
    for (double t : {0.3, 0.5, 0.9}) {
        const double deriv =
            oracles::central_diff([&](double x) { return exgauss_cdf(p, x); }, t, 1e-6);
        CHECK(deriv == Approx(exgauss_pdf(p, t)).epsilon(1e-6));
    }
}

TEST_CASE("quantile inverts the cdf") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    CHECK(exgauss_cdf(p, exgauss_quantile(p, 0.5)) == Approx(0.5).margin(1e-10));
    for (double q : {0.05, 0.1, 0.25, 0.75, 0.9, 0.99})
        CHECK(exgauss_cdf(p, exgauss_quantile(p, q)) == Approx(q).margin(1e-10));
    CHECK_THROWS_AS(exgauss_quantile(p, 0.0), ValidationError);
    CHECK_THROWS_AS(exgauss_quantile(p, 1.0), ValidationError);
}

TEST_CASE("sampling reproduces the analytic moments") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    const auto xs = exgauss_sample(p, 100000, 42);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0, skew = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        var += d * d;
        skew += d * d * d;
    }
    var /= static_cast<double>(xs.size());
    skew = skew / static_cast<double>(xs.size()) / std::pow(var, 1.5);
    CHECK(mean == Approx(p.mean()).margin(0.002));          // mu + tau = 0.4
    CHECK(var == Approx(p.variance()).epsilon(0.05));       // sigma^2 + tau^2 = 0.0125
    CHECK(skew == Approx(p.skewness()).margin(0.1));
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    CHECK(exgauss_sample(p, 1000, 7) == exgauss_sample(p, 1000, 7));
    CHECK(exgauss_sample(p, 10, 7) != exgauss_sample(p, 10, 8));
}

TEST_CASE("mle recovers the generator") {
    const ExGaussParams truth(0.3, 0.05, 0.1);
    const auto xs = exgauss_sample(truth, 10000, 7);
    const auto fit = exgauss_mle_fit(xs);
    CHECK(fit.mu == Approx(truth.mu).epsilon(0.05));
    CHECK(fit.sigma == Approx(truth.sigma).epsilon(0.05));
    CHECK(fit.tau == Approx(truth.tau).epsilon(0.05));
}

TEST_CASE("mle log-likelihood beats the moment initializer") {
    const ExGaussParams truth(0.45, 0.08, 0.15);
    const auto xs = exgauss_sample(truth, 500, 99);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0, skew = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        var += d * d;
        skew += d * d * d;
    }
    var /= static_cast<double>(xs.size());
    const double sd = std::sqrt(var);
    skew = skew / static_cast<double>(xs.size()) / (sd * sd * sd);
    const double tau0 = std::max(sd * std::cbrt(std::max(skew, 0.01) / 2.0), 1e-3);
    const ExGaussParams start(mean - tau0, std::sqrt(std::max(var - tau0 * tau0, 1e-8)), tau0);
    const auto fit = exgauss_mle_fit(xs);
    CHECK(exgauss_log_likelihood(fit, xs) >= exgauss_log_likelihood(start, xs));
}

TEST_CASE("mle on near-gaussian data pushes tau small") {
    Rng rng(5);
    std::vector<double> xs(5000);
    for (auto& x : xs) x = rng.normal(0.5, 0.08);
    const auto fit = exgauss_mle_fit(xs);
    CHECK(fit.tau < 0.03);
    CHECK(fit.mu + fit.tau == Approx(0.5).margin(0.01));
}

TEST_CASE("mle is location equivariant") {
    const auto xs = exgauss_sample({0.3, 0.05, 0.1}, 2000, 11);
    auto shifted = xs;
    for (auto& x : shifted) x += 2.5;
    const auto f0 = exgauss_mle_fit(xs);
    const auto f1 = exgauss_mle_fit(shifted);
    CHECK(f1.mu == Approx(f0.mu + 2.5).margin(1e-4));
    CHECK(f1.sigma == Approx(f0.sigma).epsilon(1e-3));
    CHECK(f1.tau == Approx(f0.tau).epsilon(1e-3));
}

TEST_CASE("mle input validation") {
    std::vector<double> few(10, 0.5);
    CHECK_THROWS_AS(exgauss_mle_fit(few), ValidationError);
    std::vector<double> flat(50, 0.5);
    CHECK_THROWS_AS(exgauss_mle_fit(flat), NumericError);
    std::vector<double> bad(50, 0.5);
    for (std::size_t i = 0; i < bad.size(); ++i) bad[i] = 0.3 + 0.01 * static_cast<double>(i);
    bad[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(exgauss_mle_fit(bad), ValidationError);
}

TEST_CASE("mle recovery across the study-relevant parameter range") {
    // n = 72 per condition; the recovered mean mu + tau stays within 10%
    // of truth on at least 95% of seeded replications
    int ok = 0;
    const int reps = 200;
    Rng meta(123);
    for (int r = 0; r < reps; ++r) {
        const ExGaussParams truth(meta.uniform(0.2, 0.6), meta.uniform(0.02, 0.15),
                                  meta.uniform(0.05, 0.3));
        const auto xs = exgauss_sample(truth, 72, 1000 + static_cast<std::uint64_t>(r));
        const auto fit = exgauss_mle_fit(xs);
        if (std::abs(fit.mean() - truth.mean()) / truth.mean() < 0.10) ++ok;
    }
    CHECK(ok >= static_cast<int>(0.95 * reps));
}

TEST_CASE("params expose analytic moments") {
    const ExGaussParams p(0.3, 0.05, 0.1);
    CHECK(p.mean() == Approx(0.4));
    CHECK(p.variance() == Approx(0.0125));
    const double r = p.tau / p.sigma;
    CHECK(p.skewness() == Approx(2.0 * r * r * r * std::pow(1.0 + r * r, -1.5)));
    CHECK_THROWS_AS(ExGaussParams(0.3, 0.0, 0.1), ValidationError);
    CHECK_THROWS_AS(ExGaussParams(0.3, 0.05, -0.1), ValidationError);
}
