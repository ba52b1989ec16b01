#pragma once

// Comparison estimators for the disc collision probability: two density-times-volume approximations,
// plain Monte Carlo, and deterministic polar-grid integration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "beliefnav/collision.hpp"
#include "beliefnav/gaussian.hpp"

namespace bnav {

enum class VolumeConvention {
    CombinedRadius,  // V = pi (r1 + r2)^2
    RobotRadius,     // V = pi r1^2
};

inline double baseline_volume(const Body &robot, const Body &obstacle, VolumeConvention v) {
    const double r = v == VolumeConvention::CombinedRadius ? robot.radius + obstacle.radius : robot.radius;
    return std::numbers::pi * r * r;
}

namespace detail {

inline Gaussian relative_position(const Body &robot, const Body &obstacle) {
    robot.validate();
    obstacle.validate();
    return gaussian_difference(robot.position(), obstacle.position());
}

}  // namespace detail

/// V times the density of the relative position evaluated at the mean separation.
inline double dutoit_burdick(const Body &robot, const Body &obstacle,
                             VolumeConvention v = VolumeConvention::CombinedRadius) {
    const Gaussian w = detail::relative_position(robot, obstacle);
    const double dens = gaussian_pdf(Vector::Zero(2), Gaussian{-w.mean, w.cov});
    return std::clamp(baseline_volume(robot, obstacle, v) * dens, 0.0, 1.0);
}

struct ParkResult {
    double value = 0.0;
    Vector argmax;      // point of the disc with the largest density
    double max_density = 0.0;
    bool interior = false;
};

/// V times the largest density of w over the disc |w| <= r1 + r2.
inline ParkResult park_upper_bound_detail(const Body &robot, const Body &obstacle,
                                          VolumeConvention v = VolumeConvention::CombinedRadius) {
    const Gaussian w = detail::relative_position(robot, obstacle);
    const double radius = robot.radius + obstacle.radius;
    ParkResult out;
    if (w.mean.norm() <= radius) {
        out.interior = true;
        out.argmax = w.mean;
    } else {
        // The boundary maximiser is (I + nu Sigma)^-1 mu for the multiplier nu that puts it on the circle;
        // in the eigenbasis of Sigma that is a scalar search.
        const SymEig e = sym_eig(w.cov);
        const Vector m = e.vectors.transpose() * w.mean;
        auto point = [&](double nu) -> Vector {
            Vector p(2);
            for (int i = 0; i < 2; ++i) p[i] = m[i] / (1.0 + nu * std::max(e.values[i], 0.0));
            return e.vectors * p;
        };
        double lo = 0.0;
        double hi = 1.0;
        int grow = 0;
        while (point(hi).norm() > radius) {
            lo = hi;
            hi *= 2.0;
            if (++grow > 200) throw NumericalError("park_upper_bound: could not bracket the multiplier");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (point(mid).norm() > radius) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.argmax = point(hi);
        if (std::abs(out.argmax.norm() - radius) > 1e-9 * std::max(1.0, radius)) {
            throw NumericalError("park_upper_bound: multiplier search did not reach the boundary");
        }
    }
    out.max_density = gaussian_pdf(out.argmax, w);
    out.value = std::clamp(baseline_volume(robot, obstacle, v) * out.max_density, 0.0, 1.0);
    return out;
}

inline double park_upper_bound(const Body &robot, const Body &obstacle,
                               VolumeConvention v = VolumeConvention::CombinedRadius) {
    return park_upper_bound_detail(robot, obstacle, v).value;
}

struct MonteCarloResult {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::int64_t samples = 0;
};

/// Fraction of paired draws (x, s) with |x - s| <= r1 + r2.
inline MonteCarloResult monte_carlo(const Body &robot, const Body &obstacle, std::int64_t samples,
                                    std::uint64_t seed) {
    robot.validate();
    obstacle.validate();
    if (samples < 1000) throw std::invalid_argument("monte_carlo: at least 1000 samples required");
    const Matrix lr = sym_sqrt(symmetrize(robot.position_cov()));
    const Matrix lo = sym_sqrt(symmetrize(obstacle.position_cov()));
    const Vector mr = robot.position_mean();
    const Vector mo = obstacle.position_mean();
    const double r2 = (robot.radius + obstacle.radius) * (robot.radius + obstacle.radius);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < samples; ++i) {
        const double a0 = n01(rng), a1 = n01(rng), b0 = n01(rng), b1 = n01(rng);
        const double dx = (mr[0] + lr(0, 0) * a0 + lr(0, 1) * a1) - (mo[0] + lo(0, 0) * b0 + lo(0, 1) * b1);
        const double dy = (mr[1] + lr(1, 0) * a0 + lr(1, 1) * a1) - (mo[1] + lo(1, 0) * b0 + lo(1, 1) * b1);
        if (dx * dx + dy * dy <= r2) ++hits;
    }
    MonteCarloResult out;
    out.samples = samples;
    out.estimate = static_cast<double>(hits) / static_cast<double>(samples);
    out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(samples));
    return out;
}

struct GridResult {
    double value = 0.0;
    int radial = 0;
    int angular = 0;
    double last_change = 0.0;  // |value at this resolution - value at half resolution|
};

/// Integrate the relative-position density over the disc of radius r1 + r2 on a polar grid
/// (composite 8-point Gauss-Legendre in r, trapezoid in angle), doubling both resolutions until two
/// successive results differ by less than change_tol.
inline GridResult grid_integral(const Body &robot, const Body &obstacle, int radial = 64, int angular = 128,
                                double change_tol = 1e-5, int max_doublings = 7) {
    if (radial < 64 || angular < 128) throw std::invalid_argument("grid_integral: resolution below 64 x 128");
    const Gaussian w = detail::relative_position(robot, obstacle);
    const Matrix inv = spd_inverse(w.cov);
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(w.cov.determinant()));
    const double radius = robot.radius + obstacle.radius;
    using Rule = boost::math::quadrature::gauss<double, 8>;

    auto integrate = [&](int nr, int nt) {
        const int panels = std::max(1, nr / 8);
        const double h = radius / panels;
        const double dt = 2.0 * std::numbers::pi / nt;
        std::vector<double> cs(static_cast<std::size_t>(nt)), sn(static_cast<std::size_t>(nt));
        for (int j = 0; j < nt; ++j) {
            cs[j] = std::cos(j * dt);
            sn[j] = std::sin(j * dt);
        }
        double total = 0.0;
        const auto &abs = Rule::abscissa();
        const auto &wts = Rule::weights();
        auto radial_node = [&](double r, double weight) {
            double ring = 0.0;
            for (int j = 0; j < nt; ++j) {
                const double dx = r * cs[j] - w.mean[0];
                const double dy = r * sn[j] - w.mean[1];
                const double q = inv(0, 0) * dx * dx + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy * dy;
                ring += std::exp(-0.5 * q);
            }
            total += weight * r * ring * dt;
        };
        for (int p = 0; p < panels; ++p) {
            const double mid = (p + 0.5) * h;
            const double half = 0.5 * h;
            // Boost stores the non-negative half of a symmetric rule.
            for (std::size_t i = 0; i < abs.size(); ++i) {
                if (abs[i] == 0.0) {
                    radial_node(mid, half * wts[i]);
                } else {
                    radial_node(mid + half * abs[i], half * wts[i]);
                    radial_node(mid - half * abs[i], half * wts[i]);
                }
            }
        }
        return std::clamp(norm * total, 0.0, 1.0);
    };

    GridResult out;
    int nr = radial;
    int nt = angular;
    double prev = integrate(nr, nt);
    for (int level = 0; level < max_doublings; ++level) {
        nr *= 2;
        nt *= 2;
        const double cur = integrate(nr, nt);
        out = {cur, nr, nt, std::abs(cur - prev)};
        if (out.last_change < change_tol) return out;
        prev = cur;
    }
    throw NumericalError("grid_integral: no convergence after " + std::to_string(max_doublings) + " refinements");
}

enum class Estimator { Series, DuToit, Park };

/// Collision probability by the chosen estimator, wrapped as a CollisionResult. The approximations
/// carry no error estimate, so they are treated as exact by the safety test.
inline CollisionResult estimate_collision(Estimator est, const Body &robot, const Body &obstacle,
                                          const CollisionOptions &opt = {}) {
    if (est == Estimator::Series) return collision_probability(robot, obstacle, opt);
    CollisionResult r;
    r.converged = true;
    r.certified = false;
    r.terms_used = 0;
    r.method = CollisionMethod::Deterministic;
    const Matrix cov = robot.position_cov() + obstacle.position_cov();
    if (sym_eig(symmetrize(cov)).values.minCoeff() <= kDeterministicVariance) {
        // Both approximations need a density; fall back to the exact rule for degenerate covariance.
        return collision_probability(robot, obstacle, opt);
    }
    r.value = est == Estimator::DuToit ? dutoit_burdick(robot, obstacle) : park_upper_bound(robot, obstacle);
    return r;
}

inline Estimator parse_estimator(const std::string &s) {
    if (s == "series") return Estimator::Series;
    if (s == "dutoit") return Estimator::DuToit;
    if (s == "park") return Estimator::Park;
    throw std::invalid_argument("unknown estimator '" + s + "' (expected series, dutoit or park)");
}

inline const char *to_string(Estimator e) {
    switch (e) {
    case Estimator::DuToit:
        return "dutoit";
    case Estimator::Park:
        return "park";
    default:
        return "series";
    }
}

}  // namespace bnav
