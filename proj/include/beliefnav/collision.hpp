#pragma once

// Collision probability between two discs with independent Gaussian position uncertainty.
//
// With w = robot - obstacle ~ N(mu_w, Sigma_w), the bodies overlap iff |w|^2 <= (r1 + r2)^2, so
// P(C) = F((r1 + r2)^2) for the quadratic form w^T w.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "beliefnav/gaussian.hpp"
#include "beliefnav/quadform.hpp"

namespace bnav {

/// Circular body. pose may be a full pose (x, y, theta, ...); only the first two components matter.
struct Body {
    Gaussian pose;
    double radius = 0.0;

    Body() = default;
    Body(Gaussian p, double r) : pose(std::move(p)), radius(r) { validate(); }

    void validate() const {
        if (!(radius > 0.0)) throw std::invalid_argument("Body: radius must be positive");
        if (pose.dim() < 2) throw std::invalid_argument("Body: pose must have at least two components");
    }

    [[nodiscard]] Vector position_mean() const { return pose.mean.head(2); }
    [[nodiscard]] Matrix position_cov() const { return pose.cov.topLeftCorner(2, 2); }
    [[nodiscard]] Gaussian position() const { return {position_mean(), position_cov()}; }
};

inline Body make_disc(double x, double y, double radius, const Matrix &cov = Matrix::Zero(2, 2)) {
    return Body{Gaussian{vec2(x, y), cov}, radius};
}

enum class CollisionMethod {
    Series,         // truncated series
    Shortcut,       // Gaussian tail bound decides the answer to within tol
    Deterministic,  // combined covariance numerically zero
    Quadrature,     // series out of reach; 1D conditional integral
};

struct CollisionResult : SeriesResult {
    CollisionMethod method = CollisionMethod::Series;

    /// Rigorous-or-estimated error on value, used by the safety decision.
    [[nodiscard]] double error_bound() const {
        const double trunc = std::isfinite(bound_at_stop) ? bound_at_stop : std::numeric_limits<double>::infinity();
        return trunc + rounding_error;
    }
    [[nodiscard]] double upper() const { return std::min(1.0, value + error_bound()); }
};

struct CollisionOptions {
    double tol = 1e-4;
    StopRule rule = StopRule::Dual;
    RhoPolicy rho{0.5, true};
    // Series is attempted while y / (2 min lambda) stays below this; beyond it the alternating terms
    // cancel more than 100-digit arithmetic within the 500-term cap can absorb.
    double max_series_ratio = 80.0;
    bool allow_quadrature = true;
};

inline constexpr double kDeterministicVariance = 1e-14;
inline constexpr double kEigenFloorRatio = 1e-10;

namespace detail {

// P(|v| <= R) for v ~ N(m, diag(l_narrow, l_wide)). The outer integral runs along the narrow axis, so
// the integrand is a narrow Gaussian times a chord probability that is smooth on the scale of the wide
// axis.
inline std::pair<double, double> disc_probability_quadrature(double m_narrow, double m_wide, double l_narrow,
                                                             double l_wide, double radius) {
    const double sn = std::sqrt(l_narrow);
    const double sw = std::sqrt(l_wide);
    const double lo = std::max(-radius, m_narrow - 10.0 * sn);
    const double hi = std::min(radius, m_narrow + 10.0 * sn);
    if (lo >= hi) return {0.0, 1e-20};
    const boost::math::normal_distribution<double> unit;
    auto integrand = [&](double v) {
        const double half = std::sqrt(std::max(0.0, radius * radius - v * v));
        const double z = (v - m_narrow) / sn;
        const double dens = std::exp(-0.5 * z * z) / (sn * std::sqrt(2.0 * std::numbers::pi));
        // Use the complementary cdf on the far side to avoid 1 - 1 cancellation.
        const double a = (-half - m_wide) / sw;
        const double b = (half - m_wide) / sw;
        const double chord = (a > 0.0) ? boost::math::cdf(boost::math::complement(unit, a)) -
                                             boost::math::cdf(boost::math::complement(unit, b))
                                       : boost::math::cdf(unit, b) - boost::math::cdf(unit, a);
        return dens * chord;
    };
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 15, 1e-11, &err);
    return {value, err + 1e-20};
}

}  // namespace detail

/// Collision probability for w ~ N(mu_w, sigma_w) and combined radius R.
/// Rigorous lower bound on P(|w| <= R): the mass of rectangles aligned with the eigen-axes of sigma_w
/// and inscribed in the disc, maximised over a few centres along the mean direction and aspect ratios.
inline double disc_probability_lower_bound(const Vector &mu_w, const Matrix &sigma_w, double radius) {
    const SymEig e = sym_eig(symmetrize(sigma_w));
    const Vector lam = detail::clamp_psd(e.values, "collision");
    const Vector m = e.vectors.transpose() * mu_w;
    const double norm = m.norm();
    const Vector towards = norm > radius ? Vector(m * (radius / norm)) : m;
    auto mass = [](double lo, double hi, double mean, double var) {
        if (var <= 0.0) return (mean >= lo && mean <= hi) ? 1.0 : 0.0;
        const double s = std::sqrt(2.0 * var);
        return 0.5 * (std::erfc((lo - mean) / s) - std::erfc((hi - mean) / s));
    };
    double best = 0.0;
    for (double frac : {0.0, 0.5, 0.8, 0.95}) {
        const Vector c = frac * towards;
        const double r = radius - c.norm();
        for (int k = 1; k < 12; ++k) {
            const double theta = 0.5 * std::numbers::pi * k / 12.0;
            const double a = r * std::cos(theta), b = r * std::sin(theta);
            const double p = mass(c[0] - a, c[0] + a, m[0], lam[0]) * mass(c[1] - b, c[1] + b, m[1], lam[1]);
            best = std::max(best, p);
        }
    }
    return best;
}

inline CollisionResult disc_collision_probability(const Vector &mu_w, const Matrix &sigma_w, double radius,
                                                  const CollisionOptions &opt = {}) {
    if (mu_w.size() != 2 || sigma_w.rows() != 2 || sigma_w.cols() != 2) {
        throw std::invalid_argument("collision: expected 2D relative position");
    }
    if (!(radius > 0.0)) throw std::invalid_argument("collision: combined radius must be positive");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("collision: tol must be positive");

    CollisionResult out;
    out.converged = true;
    out.certified = true;
    out.terms_used = 0;

    // Far from the disc: |w - mu| is dominated by sqrt(trace) * chi_2, so
    // P <= exp(-(|mu| - R)^2 / (2 trace)). Checked before the eigendecomposition because most queries
    // in a search end here.
    if (const double gap = mu_w.norm() - radius; gap > 0.0 && is_symmetric(sigma_w)) {
        const double tr = sigma_w.trace();
        const double tail = tr > 0.0 ? std::exp(-gap * gap / (2.0 * tr)) : 0.0;
        if (tail <= 0.1 * opt.tol) {
            out.method = tr > 0.0 ? CollisionMethod::Shortcut : CollisionMethod::Deterministic;
            out.value = 0.0;
            out.bound_at_stop = tail;
            return out;
        }
    }

    const SymEig e = sym_eig(symmetrize(sigma_w));
    Vector lam = detail::clamp_psd(e.values, "collision");
    const double lmax = lam.maxCoeff();
    const double dist = mu_w.norm();
    const double y = radius * radius;

    if (lmax <= kDeterministicVariance) {
        out.method = CollisionMethod::Deterministic;
        out.value = dist <= radius ? 1.0 : 0.0;
        return out;
    }

    // Tail bounds. Outside the disc: the disc lies in the half-plane {w . u <= R} with u = mu_w / |mu_w|,
    // whose mass is Phi((R - |mu|) / sigma_u). Inside: |w - mu| is dominated by sigma_max * chi_2,
    // whose tail is exactly exp(-d^2 / (2 sigma_max^2)).
    if (dist > radius) {
        const Vector u = mu_w / dist;
        const double sigma_u = std::sqrt(std::max(mahalanobis_sq(u, sigma_w), 1e-300));
        const double tail = 0.5 * std::erfc((dist - radius) / (sigma_u * std::sqrt(2.0)));
        if (tail <= 0.1 * opt.tol) {
            out.method = CollisionMethod::Shortcut;
            out.value = 0.0;
            out.bound_at_stop = tail;
            return out;
        }
    } else {
        const double d = radius - dist;
        const double tail = std::exp(-d * d / (2.0 * lmax));
        if (tail <= 0.1 * opt.tol) {
            out.method = CollisionMethod::Shortcut;
            out.value = 1.0;
            out.bound_at_stop = tail;
            return out;
        }
    }

    for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], lmax * kEigenFloorRatio);
    const Vector b_scaled = e.vectors.transpose() * mu_w;

    if (y / (2.0 * lam.minCoeff()) <= opt.max_series_ratio || !opt.allow_quadrature) {
        QuadFormCanonical q{lam, b_scaled.cwiseQuotient(lam.cwiseSqrt())};
        SeriesOptions so;
        so.tol = opt.tol;
        so.rule = opt.rule;
        so.rho = opt.rho;
        const SeriesResult s = cdf(q, y, so);
        static_cast<SeriesResult &>(out) = s;
        out.method = CollisionMethod::Series;
        if (s.converged || !opt.allow_quadrature) return out;
    }

    // Eigenvalues ascending: index 0 is the narrow axis.
    const auto [value, err] =
        detail::disc_probability_quadrature(b_scaled[0], b_scaled[1], lam[0], lam[1], radius);
    out = CollisionResult{};
    out.method = CollisionMethod::Quadrature;
    out.value = std::clamp(value, 0.0, 1.0);
    out.terms_used = 0;
    out.bound_at_stop = err;
    out.converged = err <= opt.tol;
    out.certified = false;
    return out;
}

/// P(robot and obstacle discs overlap), independent Gaussian positions.
inline CollisionResult collision_probability(const Body &robot, const Body &obstacle,
                                             const CollisionOptions &opt = {}) {
    const Gaussian w = gaussian_difference(robot.position(), obstacle.position());
    return disc_collision_probability(w.mean, w.cov, robot.radius + obstacle.radius, opt);
}

inline CollisionResult collision_probability(const Body &robot, const Body &obstacle, double tol) {
    CollisionOptions opt;
    opt.tol = tol;
    return collision_probability(robot, obstacle, opt);
}

/// Largest per-circle probability for a robot bounded by several circles.
inline CollisionResult multi_circle_probability(const std::vector<Body> &circles, const Body &obstacle,
                                                const CollisionOptions &opt = {}) {
    if (circles.empty()) throw std::invalid_argument("multi_circle_probability: no circles");
    CollisionResult worst;
    bool first = true;
    for (const Body &c : circles) {
        CollisionResult r = collision_probability(c, obstacle, opt);
        if (first || r.upper() > worst.upper()) worst = r;
        first = false;
    }
    return worst;
}

struct SafetyVerdict {
    bool safe = false;
    double worst_prob = 0.0;   // largest point estimate over the obstacles
    double worst_upper = 0.0;  // largest value + error over the obstacles
    bool inconclusive = false; // some probability failed to converge or straddles the threshold
};

/// A result is eps-safe when P(C) <= 1 - eps holds with its error included.
inline bool certifies_safe(const CollisionResult &r, double eps) {
    return r.converged && r.upper() <= 1.0 - eps;
}

inline SafetyVerdict is_eps_safe(const Body &robot, const std::vector<Body> &obstacles, double eps,
                                 const CollisionOptions &opt = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("is_eps_safe: eps must lie in (0, 1)");
    SafetyVerdict v;
    v.safe = true;
    for (const Body &o : obstacles) {
        const CollisionResult r = collision_probability(robot, o, opt);
        v.worst_prob = std::max(v.worst_prob, r.value);
        v.worst_upper = std::max(v.worst_upper, r.upper());
        if (!certifies_safe(r, eps)) {
            v.safe = false;
            if (!r.converged || r.value <= 1.0 - eps) v.inconclusive = true;
        }
    }
    return v;
}

inline SafetyVerdict is_eps_safe(const Body &robot, const std::vector<Body> &obstacles, double eps, double tol) {
    CollisionOptions opt;
    opt.tol = tol;
    return is_eps_safe(robot, obstacles, eps, opt);
}

}  // namespace bnav
