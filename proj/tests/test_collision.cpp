#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "beliefnav/collision.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace bnav;

namespace {

double oracle_for(const Vector &mu, const Matrix &s, double r) {
    return oracle::disc_probability(mu[0], mu[1], {s(0, 0), s(0, 1), s(1, 1)}, r);
}

}  // namespace

TEST(Collision, RandomQueriesMatchOracle) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        const Matrix s = testing_util::random_spd(rng, 2, 0.02, 1.0);
        const double ang = 2 * std::numbers::pi * u(rng);
        const double d = 3.0 * u(rng);
        const Vector mu = vec2(d * std::cos(ang), d * std::sin(ang));
        const double r = 0.1 + 0.9 * u(rng);
        CollisionOptions o;
        o.tol = 1e-8;
        const CollisionResult c = disc_collision_probability(mu, s, r, o);
        ASSERT_TRUE(c.converged);
        const double expect = oracle_for(mu, s, r);
        EXPECT_NEAR(c.value, expect, 1e-8);
        EXPECT_LE(std::abs(c.value - expect), c.error_bound() + 1e-12);
    }
}

TEST(Collision, RobotObstacleFormMatchesRelative) {
    const Body robot = make_disc(1.0, 2.0, 0.3, diag2(0.02, 0.03));
    Matrix so(2, 2);
    so << 0.05, 0.01, 0.01, 0.04;
    const Body obst = make_disc(1.5, 2.4, 0.4, so);
    const double expect = oracle_for(vec2(-0.5, -0.4), diag2(0.02, 0.03) + so, 0.7);
    EXPECT_NEAR(collision_probability(robot, obst, 1e-9).value, expect, 1e-9);
    EXPECT_NEAR(collision_probability(obst, robot, 1e-9).value, expect, 1e-9);
}

TEST(Collision, FarFieldShortcut) {
    const CollisionResult c = disc_collision_probability(vec2(5.0, 0.0), diag2(0.04, 0.04), 0.8);
    EXPECT_EQ(c.method, CollisionMethod::Shortcut);
    EXPECT_EQ(c.value, 0.0);
    EXPECT_LE(c.bound_at_stop, 1e-5);
    EXPECT_LE(oracle_for(vec2(5.0, 0.0), diag2(0.04, 0.04), 0.8), c.bound_at_stop);
}

TEST(Collision, DeepInsideShortcut) {
    const CollisionResult c = disc_collision_probability(vec2(0.0, 0.0), diag2(0.01, 0.01), 2.0);
    EXPECT_EQ(c.method, CollisionMethod::Shortcut);
    EXPECT_EQ(c.value, 1.0);
    EXPECT_GE(oracle_for(vec2(0.0, 0.0), diag2(0.01, 0.01), 2.0), 1.0 - c.bound_at_stop);
}

TEST(Collision, DeterministicIndicator) {
    const Body robot = make_disc(0.0, 0.0, 0.3);
    EXPECT_EQ(collision_probability(robot, make_disc(0.7, 0.0, 0.5)).value, 1.0);
    EXPECT_EQ(collision_probability(robot, make_disc(0.81, 0.0, 0.5)).value, 0.0);
    EXPECT_EQ(collision_probability(robot, make_disc(0.81, 0.0, 0.5)).method, CollisionMethod::Deterministic);
}

TEST(Collision, ElongatedCovarianceUsesQuadrature) {
    const Matrix s = diag2(0.5, 0.001);
    const Vector mu = vec2(0.2, 0.1);
    const CollisionResult c = disc_collision_probability(mu, s, 0.5);
    EXPECT_EQ(c.method, CollisionMethod::Quadrature);
    EXPECT_NEAR(c.value, oracle_for(mu, s, 0.5), 1e-7);
}

TEST(Collision, NearlySingularCovarianceIsFinite) {
    const Matrix s = diag2(0.3, 1e-13);
    const Vector mu = vec2(0.1, 0.05);
    const CollisionResult c = disc_collision_probability(mu, s, 0.4);
    EXPECT_TRUE(std::isfinite(c.value));
    // In the limit the y-offset is fixed at 0.05 and only the x-marginal remains.
    const double half = std::sqrt(0.16 - 0.0025);
    const double sd = std::sqrt(0.3);
    const double limit = 0.5 * (std::erf((half - 0.1) / (sd * std::sqrt(2.0))) - std::erf((-half - 0.1) / (sd * std::sqrt(2.0))));
    EXPECT_NEAR(c.value, limit, 1e-8);
}

TEST(Collision, LowerBoundIsALowerBound) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        const Matrix s = testing_util::random_spd(rng, 2, 0.01, 1.0);
        const Vector mu = testing_util::random_vector(rng, 2, 1.0);
        const double r = 0.1 + u(rng);
        const double lb = disc_probability_lower_bound(mu, s, r);
        const double exact = oracle_for(mu, s, r);
        EXPECT_LE(lb, exact + 1e-12);
        EXPECT_GE(lb, 0.0);
    }
    // Concentrated mass well inside the disc: the bound is close to 1.
    EXPECT_GT(disc_probability_lower_bound(vec2(0, 0), diag2(1e-4, 1e-4), 1.0), 0.99);
}

TEST(Collision, MonotoneInDistance) {
    double prev = 1.0;
    for (double d = 0.0; d < 3.0; d += 0.1) {
        const double v = disc_collision_probability(vec2(d, 0.0), diag2(0.1, 0.05), 0.8).value;
        EXPECT_LE(v, prev + 1e-9);
        prev = v;
    }
}

TEST(Collision, RejectsBadInput) {
    EXPECT_THROW(disc_collision_probability(vec2(0, 0), diag2(0.1, 0.1), 0.0), std::invalid_argument);
    EXPECT_THROW(disc_collision_probability(Vector::Zero(3), diag2(0.1, 0.1), 1.0), std::invalid_argument);
    CollisionOptions o;
    o.tol = 0.0;
    EXPECT_THROW(disc_collision_probability(vec2(0, 0), diag2(0.1, 0.1), 1.0, o), std::invalid_argument);
}

TEST(MultiCircle, TakesTheWorstCircle) {
    const Body obst = make_disc(1.0, 0.0, 0.3, diag2(0.02, 0.02));
    const std::vector<Body> circles = {make_disc(-0.5, 0.0, 0.2, diag2(0.01, 0.01)),
                                       make_disc(0.3, 0.0, 0.2, diag2(0.01, 0.01))};
    const double near = collision_probability(circles[1], obst).value;
    EXPECT_NEAR(multi_circle_probability(circles, obst).value, near, 1e-12);
    EXPECT_THROW(multi_circle_probability({}, obst), std::invalid_argument);
}

TEST(EpsSafe, Verdicts) {
    const Body robot = make_disc(0.0, 0.0, 0.3, diag2(0.01, 0.01));
    const std::vector<Body> far = {make_disc(3.0, 0.0, 0.5), make_disc(0.0, 4.0, 0.5)};
    EXPECT_TRUE(is_eps_safe(robot, far, 0.99).safe);
    const std::vector<Body> touching = {make_disc(0.8, 0.0, 0.5)};
    const SafetyVerdict v = is_eps_safe(robot, touching, 0.99);
    EXPECT_FALSE(v.safe);
    EXPECT_GT(v.worst_prob, 0.01);
    EXPECT_THROW(is_eps_safe(robot, far, 1.0), std::invalid_argument);
}

TEST(EpsSafe, ErrorBoundIsIncluded) {
    CollisionResult r;
    r.converged = true;
    r.value = 0.009;
    r.bound_at_stop = 0.002;
    EXPECT_FALSE(certifies_safe(r, 0.99));
    r.bound_at_stop = 0.0005;
    EXPECT_TRUE(certifies_safe(r, 0.99));
    r.converged = false;
    EXPECT_FALSE(certifies_safe(r, 0.99));
}
