#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "beliefnav/quadform.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace bnav;

namespace {

QuadFormCanonical form(std::vector<double> lam, std::vector<double> b) {
    QuadFormCanonical q;
    q.lambdas = Eigen::Map<Vector>(lam.data(), static_cast<Eigen::Index>(lam.size()));
    q.offsets = Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
    return q;
}

double partial_sum(const QuadFormCanonical &q, double y, int n_last) {
    SeriesOptions o;
    o.rule = StopRule::Fallback;
    o.tol = 1e-300;
    o.max_terms = n_last + 1;
    o.precision = Precision::Digits100;
    o.tail_shortcut = false;
    return cdf(q, y, o).value;
}

}  // namespace

TEST(Canonicalize, MomentsMatchDirectFormulas) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix s = testing_util::random_spd(rng, 3, 0.1, 2.0);
        const Matrix a = testing_util::random_spd(rng, 3, 0.5, 3.0);
        const Vector mu = testing_util::random_vector(rng, 3, 1.0);
        const QuadFormCanonical q = canonicalize(mu, s, a);
        const Matrix as = a * s;
        EXPECT_NEAR(q.mean(), as.trace() + mu.dot(a * mu), 1e-10);
        EXPECT_NEAR(q.variance(), 2.0 * (as * as).trace() + 4.0 * mu.dot(a * s * a * mu), 1e-9);
    }
}

TEST(Canonicalize, RejectsBadInput) {
    EXPECT_THROW(canonicalize(vec2(0, 0), diag2(1, 0), Matrix::Identity(2, 2)), std::exception);
    EXPECT_THROW(canonicalize(vec2(0, 0), diag2(1, 1), diag2(1, -1)), std::exception);
    EXPECT_THROW(canonicalize(Vector::Zero(3), diag2(1, 1), Matrix::Identity(2, 2)), std::exception);
}

TEST(Series, CentralIsotropicClosedForm) {
    for (double s2 : {0.04, 0.25, 1.0}) {
        const QuadFormCanonical q = canonicalize(vec2(0, 0), diag2(s2, s2), Matrix::Identity(2, 2));
        for (double y = 0.1; y <= 10.0 + 1e-9; y += 0.1) {
            const double expect = -std::expm1(-y / (2.0 * s2));
            SeriesOptions o;
            o.tol = 1e-12;
            EXPECT_NEAR(cdf(q, y, o).value, expect, 1e-10) << "s2=" << s2 << " y=" << y;
        }
    }
}

TEST(Series, NoncentralChiSquareOracle) {
    // Equal unit eigenvalues give a noncentral chi-square with 2 degrees of freedom.
    for (double b0 : {0.0, 0.5, 2.0, 4.0}) {
        for (double y : {0.5, 4.0, 16.0, 30.0}) {
            const QuadFormCanonical q = form({1.0, 1.0}, {b0, 0.3});
            const boost::math::non_central_chi_squared d(2, b0 * b0 + 0.09);
            SeriesOptions o;
            o.tol = 1e-11;
            EXPECT_NEAR(cdf(q, y, o).value, boost::math::cdf(d, y), 1e-9) << b0 << " " << y;
        }
    }
}

TEST(Series, DiscOracleAgreement) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        const Matrix s = testing_util::random_spd(rng, 2, 0.02, 1.0);
        const Vector mu = testing_util::random_vector(rng, 2, 1.2);
        const double r = 0.1 + 0.9 * u(rng);
        const QuadFormCanonical q = canonicalize(mu, s, Matrix::Identity(2, 2));
        SeriesOptions o;
        o.tol = 1e-10;
        const double expect = oracle::disc_probability(mu[0], mu[1], {s(0, 0), s(0, 1), s(1, 1)}, r);
        EXPECT_NEAR(cdf(q, r * r, o).value, expect, 1e-9);
    }
}

TEST(Series, ConfigAFrozen) {
    // Robot r 0.3 at the origin, obstacle r 0.5 at (0.8, 0), combined covariance 0.04 I.
    const double oracle_value = oracle::disc_probability(0.8, 0.0, {0.04, 0.0, 0.04}, 0.8);
    constexpr double kFrozen = 0.449727936319374;
    ASSERT_NEAR(oracle_value, kFrozen, 1e-13);
    const QuadFormCanonical q = canonicalize(vec2(0.8, 0), diag2(0.04, 0.04), Matrix::Identity(2, 2));
    SeriesOptions o;
    o.tol = 1e-12;
    EXPECT_NEAR(cdf(q, 0.64, o).value, kFrozen, 1e-12);
}

TEST(Series, PartialSumsMatchNaiveRecursion) {
    const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
        {{0.04, 0.04}, {4.0, 0.0}}, {{0.2, 0.5}, {0.3, -1.1}}, {{0.1, 0.9, 0.4}, {1.0, 0.2, -0.5}}};
    for (const auto &[lam, b] : cases) {
        const double y = 0.64;
        const std::vector<double> ref = oracle::series_partial_sums(lam, b, y, 40);
        const QuadFormCanonical q = form(lam, b);
        for (int n = 0; n <= 40; n += 3) {
            const double expect = std::clamp(ref[static_cast<std::size_t>(n)], 0.0, 1.0);
            EXPECT_NEAR(partial_sum(q, y, n), expect, 1e-12 * std::max(1.0, std::abs(ref[static_cast<std::size_t>(n)])))
                << "N=" << n;
        }
    }
}

TEST(Series, CoefficientsMatchRecursionByHand) {
    const QuadFormCanonical q = form({0.5, 2.0}, {1.0, 0.0});
    const SeriesCoefficients c = series_coefficients(q, 2);
    const double c0 = std::exp(-0.5) / std::sqrt(1.0 * 4.0);
    const double d1 = 0.5 * ((1 - 1.0) / 1.0 + 1.0 / 4.0);
    const double d2 = 0.5 * ((1 - 2.0) / 1.0 + 1.0 / 16.0);
    EXPECT_NEAR(c.c[0], c0, 1e-15);
    EXPECT_NEAR(c.d[1], d1, 1e-15);
    EXPECT_NEAR(c.d[2], d2, 1e-15);
    EXPECT_NEAR(c.c[1], d1 * c0, 1e-15);
    EXPECT_NEAR(c.c[2], 0.5 * (d2 * c0 + d1 * c.c[1]), 1e-15);
}

TEST(TruncationBound, SoundOnRandomForms) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 2 + static_cast<int>(u(rng) * 2.0);
        std::vector<double> lam, b;
        for (int i = 0; i < n; ++i) {
            lam.push_back(0.05 + u(rng));
            b.push_back(3.0 * (u(rng) - 0.5));
        }
        const double y = 0.1 + 2.0 * u(rng);
        const QuadFormCanonical q = form(lam, b);
        const std::vector<double> ref = oracle::series_partial_sums(lam, b, y, 200);
        const double rho = 0.5 * q.lambdas.minCoeff();
        for (int nl = 1; nl <= 30; ++nl) {
            const double err = std::abs(ref[200] - ref[static_cast<std::size_t>(nl)]);
            if (err > truncation_bound(q, rho, y, nl)) ++violations;
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(TruncationBound, DecreasesEventuallyAndRejectsBadRho) {
    const QuadFormCanonical q = form({0.04, 0.04}, {4.0, 0.0});
    EXPECT_LT(truncation_bound(q, 0.02, 0.64, 80), truncation_bound(q, 0.02, 0.64, 60));
    EXPECT_THROW(truncation_bound(q, 0.04, 0.64, 5), std::invalid_argument);
    EXPECT_THROW(truncation_bound(q, 0.0, 0.64, 5), std::invalid_argument);
    EXPECT_EQ(truncation_bound(q, 0.02, 0.0, 5), 0.0);
}

TEST(TermsNeeded, IsTheFirstCertifiedIndex) {
    const QuadFormCanonical q = form({0.04, 0.04}, {4.0, 0.0});
    const double rho = 0.02;
    for (double tol : {1e-4, 1e-6, 1e-9}) {
        const int n = terms_needed(q, 0.64, tol);
        ASSERT_GT(n, 0);
        EXPECT_LE(truncation_bound(q, rho, 0.64, n), tol);
        EXPECT_GT(truncation_bound(q, rho, 0.64, n - 1), tol);
    }
}

TEST(TermsNeeded, OptimisedRhoNeverNeedsMore) {
    const QuadFormCanonical q = form({0.04, 0.08}, {3.0, 1.0});
    RhoPolicy opt;
    opt.optimize = true;
    EXPECT_LE(terms_needed(q, 0.64, 1e-6, opt), terms_needed(q, 0.64, 1e-6));
}

TEST(StopRules, CertificateIsCertifiedAndAccurate) {
    const QuadFormCanonical q = canonicalize(vec2(1.0, 0.0), diag2(0.04, 0.04), Matrix::Identity(2, 2));
    const double expect = oracle::disc_probability(1.0, 0.0, {0.04, 0.0, 0.04}, 0.8);
    for (StopRule rule : {StopRule::Dual, StopRule::Certificate, StopRule::Fallback}) {
        SeriesOptions o;
        o.tol = 1e-6;
        o.rule = rule;
        const SeriesResult r = cdf(q, 0.64, o);
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(r.certified, rule != StopRule::Fallback);
        EXPECT_NEAR(r.value, expect, 1e-6);
        if (r.certified) EXPECT_LE(r.bound_at_stop, 1e-6);
    }
}

TEST(StopRules, CertificateNeedsTwoDimensions) {
    const QuadFormCanonical q = form({0.5}, {0.2});
    SeriesOptions o;
    o.rule = StopRule::Certificate;
    EXPECT_THROW(cdf(q, 1.0, o), std::invalid_argument);
    o.rule = StopRule::Dual;
    const SeriesResult r = cdf(q, 1.0, o);
    EXPECT_FALSE(r.certified);
    const double sd = std::sqrt(0.5);
    const double expect = 0.5 * (std::erf((1.0 / sd - 0.2) / std::sqrt(2.0)) + std::erf((1.0 / sd + 0.2) / std::sqrt(2.0)));
    EXPECT_NEAR(r.value, expect, 1e-8);
}

TEST(Precision, EscalatesOnCancellation) {
    // y / (2 min lambda) = 40 loses about 18 digits in double.
    const QuadFormCanonical q = form({0.01, 0.3}, {0.5, 0.0});
    const double y = 0.8;
    SeriesOptions o;
    o.tol = 1e-8;
    const SeriesResult r = cdf(q, y, o);
    EXPECT_GT(r.digits, 16);
    EXPECT_LE(r.rounding_error, o.tol);
    const double expect = oracle::disc_probability(0.5 * 0.1, 0.0, {0.01, 0.0, 0.3}, std::sqrt(y));
    EXPECT_NEAR(r.value, expect, 1e-8);
}

TEST(Pdf, IsTheDerivativeOfTheCdf) {
    const QuadFormCanonical q = form({0.3, 0.7}, {0.4, -0.9});
    SeriesOptions o;
    o.tol = 1e-12;
    for (double y : {0.2, 1.0, 3.0}) {
        const double h = 1e-4;
        const double fd = (cdf(q, y + h, o).value - cdf(q, y - h, o).value) / (2 * h);
        EXPECT_NEAR(pdf(q, y, o).value, fd, 1e-7);
    }
}

TEST(Series, MonotoneInY) {
    const QuadFormCanonical q = form({0.1, 0.4}, {1.5, 0.5});
    double prev = 0.0;
    for (double y = 0.05; y < 5.0; y += 0.05) {
        const double v = cdf(q, y).value;
        EXPECT_GE(v, prev - 1e-9);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        prev = v;
    }
}

TEST(Series, ZeroYAndValidation) {
    const QuadFormCanonical q = form({0.1, 0.4}, {1.5, 0.5});
    EXPECT_EQ(cdf(q, 0.0).value, 0.0);
    EXPECT_THROW(cdf(q, -1.0), std::invalid_argument);
    SeriesOptions o;
    o.tol = 0.0;
    EXPECT_THROW(cdf(q, 1.0, o), std::invalid_argument);
}

TEST(Series, CentralCaseIsFast) {
    const QuadFormCanonical q = canonicalize(vec2(0, 0), diag2(0.25, 0.25), Matrix::Identity(2, 2));
    const auto t0 = std::chrono::steady_clock::now();
    double acc = 0.0;
    for (int i = 0; i < 100; ++i) acc += cdf(q, 1.0 + 0.01 * i).value;
    const double per = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 100;
    EXPECT_GT(acc, 0.0);
    EXPECT_LT(per, 1e-3);
}

TEST(TailShortcut, SettlesOnlyWithinTolerance) {
    const double s2 = 0.04;
    const QuadFormCanonical q = canonicalize(vec2(0.3, 0), diag2(s2, s2), Matrix::Identity(2, 2));
    for (double y : {0.001, 0.01, 2.0, 5.0, 10.0}) {
        SeriesOptions fast, slow;
        fast.tol = slow.tol = 1e-10;
        slow.tail_shortcut = false;
        slow.precision = Precision::Digits100;
        const SeriesResult a = cdf(q, y, fast), b = cdf(q, y, slow);
        EXPECT_NEAR(a.value, b.value, 1e-10) << y;
        if (a.terms_used == 0) {
            const boost::math::non_central_chi_squared nc(2.0, 0.09 / s2);
            const double lower = boost::math::cdf(nc, y / s2);
            const double upper = boost::math::cdf(boost::math::complement(nc, y / s2));
            EXPECT_TRUE(a.certified);
            EXPECT_GE(a.bound_at_stop, a.value == 1.0 ? upper : lower) << y;
        }
    }
}

TEST(TailShortcut, FarUpperTailSkipsTheSeries) {
    const QuadFormCanonical q = canonicalize(vec2(0, 0), diag2(0.04, 0.04), Matrix::Identity(2, 2));
    SeriesOptions o;
    o.tol = 1e-12;
    const SeriesResult on = cdf(q, 10.0, o);
    EXPECT_EQ(on.terms_used, 0);
    EXPECT_EQ(on.value, 1.0);
    o.tail_shortcut = false;
    EXPECT_GT(cdf(q, 10.0, o).terms_used, 0);
}

TEST(DoubleDouble, ArithmeticCarries31Digits) {
    using R = boost::multiprecision::cpp_bin_float_50;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto exact = [](const DoubleDouble &x) { return R(x.hi()) + R(x.lo()); };
    for (int i = 0; i < 1000; ++i) {
        const DoubleDouble x = DoubleDouble(u(rng)) / DoubleDouble(3.0 + u(rng));
        const DoubleDouble y = DoubleDouble(u(rng)) * DoubleDouble(1e3 * u(rng)) + DoubleDouble(1e-20);
        const R rx = exact(x), ry = exact(y);
        EXPECT_LE(abs(exact(x + y) - (rx + ry)), 1e-30 * (abs(rx) + abs(ry)));
        EXPECT_LE(abs(exact(x * y) - rx * ry), 1e-30 * abs(rx * ry));
        EXPECT_LE(abs(exact(x * 7.0) - rx * 7), 1e-30 * abs(rx * 7));
        EXPECT_LE(abs(exact(x / y) - rx / ry), 1e-30 * abs(rx / ry));
    }
}

TEST(Precision, DoubleDoubleTierAgreesWithHundredDigits) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const QuadFormCanonical q =
            canonicalize(testing_util::random_vector(rng, 2, 1.0), testing_util::random_spd(rng, 2, 0.05, 0.5),
                         Matrix::Identity(2, 2));
        SeriesOptions o;
        o.tol = 1e-12;
        o.tail_shortcut = false;
        o.precision = Precision::DoubleDouble;
        const SeriesResult dd = cdf(q, 2.0, o);
        o.precision = Precision::Digits100;
        const SeriesResult ref = cdf(q, 2.0, o);
        EXPECT_EQ(dd.terms_used, ref.terms_used);
        EXPECT_LE(std::abs(dd.value - ref.value), std::max(dd.rounding_error, 1e-15)) << i;
    }
}
