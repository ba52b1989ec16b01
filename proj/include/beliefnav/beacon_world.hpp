#pragma once

// Mobile robot with odometry motion, localising from signal strength of beacons whose positions may be
// uncertain.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "beliefnav/belief_filter.hpp"
#include "beliefnav/collision.hpp"
#include "beliefnav/roadmap.hpp"

namespace bnav {

/// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * std::numbers::pi);
    if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
    return w;
}

/// u = (rot1, trans, rot2)
inline Vector odometry_motion(const Vector &x, const Vector &u) {
    if (x.size() != 3 || u.size() != 3) throw std::invalid_argument("odometry_motion: expected pose and (rot1, trans, rot2)");
    const double heading = x[2] + u[0];
    Vector out(3);
    out << x[0] + u[1] * std::cos(heading), x[1] + u[1] * std::sin(heading), wrap_angle(x[2] + u[0] + u[2]);
    return out;
}

inline Matrix odometry_jacobian(const Vector &x, const Vector &u) {
    const double heading = x[2] + u[0];
    Matrix f = Matrix::Identity(3, 3);
    f(0, 2) = -u[1] * std::sin(heading);
    f(1, 2) = u[1] * std::cos(heading);
    return f;
}

struct OdometryNoise {
    double trans = 0.01;  // variance per metre^2 travelled, along x and y
    double rot = 0.01;    // heading variance per rad^2 turned
    double floor = 1e-6;  // added to every diagonal entry
};

inline Matrix odometry_noise(const Vector &u, const OdometryNoise &n) {
    const double t2 = u[1] * u[1];
    const double r2 = u[0] * u[0] + u[2] * u[2];
    Matrix r = Matrix::Zero(3, 3);
    r(0, 0) = n.trans * t2 + n.floor;
    r(1, 1) = n.trans * t2 + n.floor;
    r(2, 2) = n.rot * r2 + n.floor;
    return r;
}

inline MotionModel odometry_model(const OdometryNoise &n) {
    return {odometry_motion, odometry_jacobian, [n](const Vector &, const Vector &u) { return odometry_noise(u, n); }};
}

/// z_i = 1 / (|p - b_i|^2 + 1)
inline Vector beacon_observation(const Vector &x, const std::vector<Vector> &beacons) {
    Vector z(static_cast<Eigen::Index>(beacons.size()));
    for (std::size_t i = 0; i < beacons.size(); ++i) {
        const double dx = x[0] - beacons[i][0];
        const double dy = x[1] - beacons[i][1];
        z[static_cast<Eigen::Index>(i)] = 1.0 / (dx * dx + dy * dy + 1.0);
    }
    return z;
}

inline Matrix beacon_jacobian(const Vector &x, const std::vector<Vector> &beacons) {
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(beacons.size()), x.size());
    for (std::size_t i = 0; i < beacons.size(); ++i) {
        const double dx = x[0] - beacons[i][0];
        const double dy = x[1] - beacons[i][1];
        const double s = dx * dx + dy * dy + 1.0;
        h(static_cast<Eigen::Index>(i), 0) = -2.0 * dx / (s * s);
        h(static_cast<Eigen::Index>(i), 1) = -2.0 * dy / (s * s);
    }
    return h;
}

inline ObservationModel beacon_model(const std::vector<Vector> &beacons, double sigma_z) {
    const Eigen::Index n = static_cast<Eigen::Index>(beacons.size());
    return {[beacons](const Vector &x) { return beacon_observation(x, beacons); },
            [beacons](const Vector &x) { return beacon_jacobian(x, beacons); },
            sigma_z * sigma_z * Matrix::Identity(n, n)};
}

inline constexpr double kHeadingViewpointVariance = 1e6;
inline constexpr double kCertainTrace = 1e-9;

/// Viewpoint prior for an uncertain beacon: centred on the predicted pose with the beacon's position
/// covariance; heading is left essentially free. Certain beacons yield no prior.
inline std::optional<ObjectPrior> object_prior_for_beacon(const Gaussian &beacon, const Belief &predicted) {
    if (beacon.cov.trace() < kCertainTrace) return std::nullopt;
    if (!is_positive_definite(beacon.cov)) throw NumericalError("object_prior_for_beacon: beacon covariance not PD");
    ObjectPrior op;
    op.mean = predicted.mean;
    op.cov = Matrix::Zero(predicted.dim(), predicted.dim());
    op.cov.topLeftCorner(2, 2) = beacon.cov;
    for (Eigen::Index i = 2; i < predicted.dim(); ++i) op.cov(i, i) = kHeadingViewpointVariance;
    return op;
}

struct Beacon {
    Vector mean;   // assumed position
    Matrix cov;    // position covariance
    Vector truth;  // where it actually is; equals mean unless the fixture says otherwise
};

struct BeaconWorld {
    Environment2D env;
    std::vector<Beacon> beacons;
    Vector start_pose;  // (x, y, theta)
    Matrix start_cov;
    Vector goal;        // (x, y)
    double sigma_z = 0.01;
    double sensing_range = 1e9;
    OdometryNoise odometry{};
    double waypoint_step = 0.25;
    std::vector<Vector> obstacle_truth;  // actual obstacle centres; empty means they sit at their means
};

inline std::vector<Vector> beacon_positions(const BeaconWorld &w, bool truth) {
    std::vector<Vector> out;
    for (const Beacon &b : w.beacons) out.push_back(truth ? b.truth : b.mean);
    return out;
}

/// Control that moves the pose mean straight to target: turn, drive, no final turn.
inline Vector control_towards(const Vector &pose, const Vector &target) {
    const Vector d = target - pose.head(2);
    const double len = d.norm();
    Vector u(3);
    u << (len > 0.0 ? wrap_angle(std::atan2(d[1], d[0]) - pose[2]) : 0.0), len, 0.0;
    return u;
}

/// Measurement update against every beacon in range. With object_uncertainty, uncertain beacons are
/// fused one at a time together with their viewpoint prior; otherwise the standard EKF is used.
inline Belief beacon_update(const BeaconWorld &w, const Belief &pred, const Vector &z_full, bool object_uncertainty) {
    std::vector<Vector> certain_pos;
    std::vector<double> certain_z;
    Belief b = pred;
    std::vector<std::size_t> uncertain;
    for (std::size_t i = 0; i < w.beacons.size(); ++i) {
        if ((pred.mean.head(2) - w.beacons[i].mean).norm() > w.sensing_range) continue;
        if (object_uncertainty && w.beacons[i].cov.trace() >= kCertainTrace) {
            uncertain.push_back(i);
        } else {
            certain_pos.push_back(w.beacons[i].mean);
            certain_z.push_back(z_full[static_cast<Eigen::Index>(i)]);
        }
    }
    if (!certain_pos.empty()) {
        const ObservationModel om = beacon_model(certain_pos, w.sigma_z);
        b = update_standard(b, Eigen::Map<const Vector>(certain_z.data(), static_cast<Eigen::Index>(certain_z.size())), om);
    }
    for (std::size_t i : uncertain) {
        const ObservationModel om = beacon_model({w.beacons[i].mean}, w.sigma_z);
        Vector z(1);
        z[0] = z_full[static_cast<Eigen::Index>(i)];
        b = update(b, z, om, object_prior_for_beacon(Gaussian{w.beacons[i].mean, w.beacons[i].cov}, b));
    }
    return b;
}

/// Planning-time step: predict towards target, then update with the maximum-likelihood measurement.
inline Transition beacon_step(const BeaconWorld &w, const Belief &b, const Vector &target, bool object_uncertainty) {
    const MotionModel mm = odometry_model(w.odometry);
    const Vector u = control_towards(b.mean, target);
    const Belief pred = predict(b, u, mm);
    const Vector z = beacon_observation(pred.mean, beacon_positions(w, false));
    return {u, beacon_update(w, pred, z, object_uncertainty)};
}

/// Obstacles as the planner sees them. Without object uncertainty the map is taken at its mean.
inline std::vector<Body> planning_obstacles(const BeaconWorld &w, bool object_uncertainty) {
    std::vector<Body> out = w.env.obstacles;
    if (!object_uncertainty) {
        for (Body &o : out) o.pose.cov.setZero();
    }
    return out;
}

/// Obstacles where they actually are, without uncertainty.
inline std::vector<Body> true_obstacles(const BeaconWorld &w) {
    std::vector<Body> out = w.env.obstacles;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].pose.cov.setZero();
        if (i < w.obstacle_truth.size()) out[i].pose.mean = w.obstacle_truth[i];
    }
    return out;
}

inline PlanningDomain beacon_domain(const BeaconWorld &w, bool object_uncertainty) {
    PlanningDomain d;
    d.propagate = [w, object_uncertainty](const Belief &b, const Vector &target, int) {
        return beacon_step(w, b, target, object_uncertainty);
    };
    const std::vector<Body> obstacles = planning_obstacles(w, object_uncertainty);
    d.obstacles = [obstacles](int) { return obstacles; };
    d.robot_radius = w.env.robot_radius;
    d.waypoint_step = w.waypoint_step;
    return d;
}

struct ExecutionStep {
    Vector true_pose;
    Belief belief;
    double p_collision = 0.0;  // robot at its true position with the belief's covariance, true obstacles
};

struct ExecutionTrace {
    std::vector<ExecutionStep> steps;
    [[nodiscard]] double max_collision_probability() const {
        double m = 0.0;
        for (const auto &s : steps) m = std::max(m, s.p_collision);
        return m;
    }
    [[nodiscard]] int violations(double eps) const {
        int n = 0;
        for (const auto &s : steps) n += s.p_collision > 1.0 - eps ? 1 : 0;
        return n;
    }
};

/// Follow the planned waypoints in closed loop. Measurements come from the true beacon positions
/// (noise free, so runs are reproducible) while the filter keeps using the assumed ones; motion is
/// executed exactly as commanded. Collision is scored against the true obstacle positions.
inline ExecutionTrace execute_plan(const BeaconWorld &w, const PlanResult &plan, bool object_uncertainty,
                                   double tol = 1e-4) {
    const MotionModel mm = odometry_model(w.odometry);
    const std::vector<Vector> truth = beacon_positions(w, true);
    const std::vector<Body> obstacles = true_obstacles(w);
    ExecutionTrace trace;
    Belief b = plan.waypoints.front().belief;
    Vector true_pose = b.mean;
    auto record = [&] {
        ExecutionStep s;
        s.true_pose = true_pose;
        s.belief = b;
        const Body robot{Gaussian{true_pose.head(2), b.cov.topLeftCorner(2, 2)}, w.env.robot_radius};
        for (const Body &o : obstacles) s.p_collision = std::max(s.p_collision, collision_probability(robot, o, tol).value);
        trace.steps.push_back(std::move(s));
    };
    record();
    for (std::size_t i = 1; i < plan.waypoints.size(); ++i) {
        const Vector target = plan.waypoints[i].belief.mean.head(2);
        const Vector u = control_towards(b.mean, target);
        true_pose = odometry_motion(true_pose, u);
        const Belief pred = predict(b, u, mm);
        b = beacon_update(w, pred, beacon_observation(true_pose, truth), object_uncertainty);
        record();
    }
    return trace;
}

}  // namespace bnav
