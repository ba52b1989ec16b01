#pragma once

// Planar end-effector approaching a grasp point in front of a puck. A horizontal laser pointing along -x
// ranges the first body it hits (the puck or a static aiding object); a ball with Gaussian velocity rolls
// through the workspace.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "beliefnav/belief_filter.hpp"
#include "beliefnav/collision.hpp"
#include "beliefnav/roadmap.hpp"

namespace bnav {

struct RollingBall {
    Body body;           // position at t = 0
    Vector velocity;     // mean displacement per step
    Matrix velocity_cov; // covariance added per step
};

/// Ball belief after t steps: mean + t v, cov + t Sigma_v.
inline Body ball_at(const RollingBall &b, int t) {
    return Body{Gaussian{b.body.position_mean() + t * b.velocity, b.body.position_cov() + t * b.velocity_cov},
                b.body.radius};
}

inline std::vector<Body> propagate_ball(const RollingBall &b, int steps) {
    if (steps < 0) throw std::invalid_argument("propagate_ball: steps must be >= 0");
    std::vector<Body> out;
    for (int t = 0; t <= steps; ++t) out.push_back(ball_at(b, t));
    return out;
}

struct RangeTarget {
    Vector centre;
    double radius = 0.0;
};

/// Distance along the ray from p towards -x to the first target, if any. Grazing hits where the chord
/// offset exceeds graze * radius count as misses, which keeps the Jacobian bounded.
inline std::optional<std::pair<double, std::size_t>> laser_hit(const Vector &p, const std::vector<RangeTarget> &targets,
                                                               double graze = 0.95) {
    std::optional<std::pair<double, std::size_t>> best;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double dy = p[1] - targets[i].centre[1];
        if (std::abs(dy) > graze * targets[i].radius) continue;
        const double range = (p[0] - targets[i].centre[0]) - std::sqrt(targets[i].radius * targets[i].radius - dy * dy);
        if (range < 0.0) continue;
        if (!best || range < best->first) best = std::make_pair(range, i);
    }
    return best;
}

inline ObservationModel laser_model(const RangeTarget &t, double sigma) {
    ObservationModel om;
    om.h = [t](const Vector &p) {
        const double dy = p[1] - t.centre[1];
        Vector z(1);
        z[0] = (p[0] - t.centre[0]) - std::sqrt(std::max(0.0, t.radius * t.radius - dy * dy));
        return z;
    };
    om.jacobian = [t](const Vector &p) {
        const double dy = p[1] - t.centre[1];
        Matrix h(1, 2);
        h << 1.0, dy / std::sqrt(std::max(1e-12, t.radius * t.radius - dy * dy));
        return h;
    };
    om.noise = Matrix::Constant(1, 1, sigma * sigma);
    return om;
}

struct LaserGraspWorld {
    Body puck;
    Body aiding;          // static object that helps localisation; mean and covariance as believed
    Vector aiding_truth;  // actual position
    std::optional<RollingBall> ball;
    double ee_radius = 0.02;
    double laser_sigma = 0.005;
    double motion_noise = 0.01;  // variance per metre^2 moved
    double motion_floor = 1e-6;
    Vector start;  // relative to the grasp point, which is the origin
    Matrix start_cov;
    std::vector<Vector> lattice;  // roadmap nodes; spacing defines the step
    double lattice_step = 0.05;
    int horizon = 80;
    int replan_period = 1;
};

inline MotionModel grasp_motion(double noise, double floor) {
    MotionModel m;
    m.f = [](const Vector &x, const Vector &u) { return Vector(x + u); };
    m.jacobian = [](const Vector &x, const Vector &) { return Matrix(Matrix::Identity(x.size(), x.size())); };
    m.noise = [noise, floor](const Vector &x, const Vector &u) {
        return Matrix((noise * u.squaredNorm() + floor) * Matrix::Identity(x.size(), x.size()));
    };
    return m;
}

inline std::vector<RangeTarget> laser_targets(const LaserGraspWorld &w, bool truth) {
    return {{w.puck.position_mean(), w.puck.radius}, {truth ? w.aiding_truth : w.aiding.position_mean(), w.aiding.radius}};
}

/// Update with a laser range z taken at the predicted pose; skipped when the ray misses everything.
inline Belief laser_update(const LaserGraspWorld &w, const Belief &pred, const std::optional<double> &z) {
    const auto targets = laser_targets(w, false);
    const auto hit = laser_hit(pred.mean, targets);
    if (!hit || !z) return pred;
    const ObservationModel om = laser_model(targets[hit->second], w.laser_sigma);
    Vector zz(1);
    zz[0] = *z;
    std::optional<ObjectPrior> prior;
    if (hit->second == 1 && w.aiding.position_cov().trace() >= 1e-9) {
        prior = ObjectPrior{pred.mean, w.aiding.position_cov()};
    }
    return update(pred, zz, om, prior);
}

inline Transition grasp_step(const LaserGraspWorld &w, const Belief &b, const Vector &target) {
    const MotionModel mm = grasp_motion(w.motion_noise, w.motion_floor);
    const Vector u = target - b.mean;
    const Belief pred = predict(b, u, mm);
    const auto hit = laser_hit(pred.mean, laser_targets(w, false));
    std::optional<double> z;
    if (hit) z = hit->first;  // maximum-likelihood range
    return {u, laser_update(w, pred, z)};
}

/// Execution step: the range comes from the true object positions, the filter keeps its beliefs.
inline Transition grasp_execute_step(const LaserGraspWorld &w, const Belief &b, const Vector &target) {
    const MotionModel mm = grasp_motion(w.motion_noise, w.motion_floor);
    const Vector u = target - b.mean;
    const Belief pred = predict(b, u, mm);
    const auto hit = laser_hit(pred.mean, laser_targets(w, true));
    std::optional<double> z;
    if (hit) z = hit->first;
    return {u, laser_update(w, pred, z)};
}

inline Roadmap grasp_roadmap(const LaserGraspWorld &w) {
    Roadmap rm;
    rm.max_edge_length = w.lattice_step * 1.0001;
    for (const Vector &p : w.lattice) rm.add_node(p);
    for (int i = 0; i < rm.size(); ++i) {
        for (int j = i + 1; j < rm.size(); ++j) {
            if ((rm.nodes[i] - rm.nodes[j]).norm() <= rm.max_edge_length) rm.add_edge(i, j);
        }
    }
    return rm;
}

inline int nearest_node(const Roadmap &rm, const Vector &p) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rm.size(); ++i) {
        const double d = (rm.nodes[i] - p.head(2)).norm();
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

/// Ball estimates seen from time t0: for online planning the estimate is refreshed at t0 with the
/// initial covariance, so only the growth after t0 remains.
inline PlanningDomain grasp_domain(const LaserGraspWorld &w, int t0, bool refreshed) {
    PlanningDomain d;
    d.propagate = [w](const Belief &b, const Vector &target, int) { return grasp_step(w, b, target); };
    d.obstacles = [w, t0, refreshed](int t) {
        std::vector<Body> out;
        if (!w.ball) return out;
        const RollingBall &rb = *w.ball;
        if (refreshed) {
            RollingBall now = rb;
            now.body = Body{Gaussian{rb.body.position_mean() + t0 * rb.velocity, rb.body.position_cov()}, rb.body.radius};
            out.push_back(ball_at(now, t));
        } else {
            out.push_back(ball_at(rb, t0 + t));
        }
        return out;
    };
    d.time_varying = true;
    d.allow_wait = true;
    d.robot_radius = w.ee_radius;
    d.waypoint_step = w.lattice_step;
    d.horizon = w.horizon;
    return d;
}

struct GraspStep {
    Belief belief;
    Vector control;
    Body ball;  // ball estimate used for the safety check at this step
    double p_collision = 0.0;
    bool safe = true;
    double cost_so_far = 0.0;
    bool replanned = false;
    bool stalled = false;  // no safe action was found; the end-effector held position
};

struct GraspRun {
    std::vector<GraspStep> steps;
    bool reached_goal = false;
    double total_cost = 0.0;
    double planning_seconds = 0.0;
    int replans = 0;

    [[nodiscard]] bool all_safe() const {
        return std::all_of(steps.begin(), steps.end(), [](const GraspStep &s) { return s.safe; });
    }
};

/// Index of the first step that moves towards the goal after the first retreat; without a retreat, the
/// first step that moves towards the goal. -1 when no such step exists. Progress is measured by the
/// distance of the mean to the goal.
inline int readvance_index(const std::vector<Vector> &positions, const Vector &goal) {
    int retreat = -1;
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
        const double before = (positions[k] - goal).norm();
        const double after = (positions[k + 1] - goal).norm();
        if (retreat < 0 && after > before + 1e-9) retreat = static_cast<int>(k);
        if (retreat >= 0 && static_cast<int>(k) > retreat && after < before - 1e-9) return static_cast<int>(k);
    }
    if (retreat >= 0) return -1;
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
        if ((positions[k + 1] - goal).norm() < (positions[k] - goal).norm() - 1e-9) return static_cast<int>(k);
    }
    return -1;
}

inline bool has_retreat(const std::vector<Vector> &positions, const Vector &goal) {
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
        if ((positions[k + 1] - goal).norm() > (positions[k] - goal).norm() + 1e-9) return true;
    }
    return false;
}

inline Belief grasp_start_belief(const LaserGraspWorld &w) { return Belief{w.start, w.start_cov}; }

/// Plan once against the open-loop ball prediction and execute the plan as is.
inline GraspRun run_grasp_offline(const LaserGraspWorld &w, const PlannerOptions &opt) {
    Roadmap rm = grasp_roadmap(w);
    const int start = nearest_node(rm, w.start);
    const int goal = nearest_node(rm, Vector::Zero(2));
    const PlanningDomain dom = grasp_domain(w, 0, false);
    const PlanResult p = plan(rm, start, goal, grasp_start_belief(w), dom, opt);
    GraspRun run;
    run.planning_seconds = p.planning_seconds;
    for (std::size_t k = 0; k < p.waypoints.size(); ++k) {
        const Waypoint &wp = p.waypoints[k];
        GraspStep s;
        s.belief = wp.belief;
        s.control = wp.control.size() ? wp.control : Vector::Zero(2);
        const auto obs = dom.obstacles(static_cast<int>(k));
        if (!obs.empty()) s.ball = obs.front();
        s.p_collision = wp.p_collision;
        s.safe = wp.safe;
        s.cost_so_far = wp.cost_so_far;
        s.replanned = k == 0;
        run.steps.push_back(std::move(s));
    }
    run.total_cost = p.total_cost;
    run.reached_goal = true;
    run.replans = 1;
    return run;
}

/// Receding-horizon execution: the ball estimate is refreshed every step, and the plan is recomputed
/// every replan_period steps or as soon as the next planned waypoint is no longer eps-safe.
inline GraspRun run_grasp_online(const LaserGraspWorld &w, const PlannerOptions &opt, int max_steps = 200) {
    Roadmap rm = grasp_roadmap(w);
    const int goal = nearest_node(rm, Vector::Zero(2));
    GraspRun run;
    Belief b = grasp_start_belief(w);
    std::vector<Waypoint> current;
    std::size_t cursor = 0;
    int since_plan = 0;
    double cost = 0.0;

    auto ball_now = [&](int t) -> std::vector<Body> { return grasp_domain(w, t, true).obstacles(0); };
    auto record = [&](int t, const Vector &u, bool replanned, bool stalled) {
        GraspStep s;
        s.belief = b;
        s.control = u;
        const auto obs = ball_now(t);
        if (!obs.empty()) s.ball = obs.front();
        const WaypointCheck chk = check_waypoint(b, obs, w.ee_radius, opt);
        s.p_collision = chk.p_collision;
        s.safe = chk.safe;
        s.replanned = replanned;
        s.stalled = stalled;
        s.cost_so_far = cost;
        run.steps.push_back(std::move(s));
    };
    record(0, Vector::Zero(2), false, false);

    for (int t = 0; t < max_steps; ++t) {
        const int here = nearest_node(rm, b.mean);
        if (here == goal) {
            run.reached_goal = true;
            break;
        }
        bool need_plan = current.empty() || cursor + 1 >= current.size() || since_plan >= w.replan_period;
        if (!need_plan) {
            const Waypoint &next = current[cursor + 1];
            const PlanningDomain dom = grasp_domain(w, t, true);
            need_plan = !check_waypoint(next.belief, dom.obstacles(1), w.ee_radius, opt).safe;
        }
        bool replanned = false;
        if (need_plan) {
            PlanningDomain dom = grasp_domain(w, t, true);
            dom.horizon = w.horizon;
            try {
                const PlanResult p = plan(rm, here, goal, b, dom, opt);
                run.planning_seconds += p.planning_seconds;
                current = p.waypoints;
                cursor = 0;
                since_plan = 0;
                replanned = true;
                ++run.replans;
            } catch (const PlanningError &) {
                current.clear();
            }
        }
        if (current.empty() || cursor + 1 >= current.size()) {
            const Transition hold = grasp_execute_step(w, b, b.mean);
            b = hold.belief;
            record(t + 1, Vector::Zero(2), replanned, true);
            continue;
        }
        const Waypoint &next = current[cursor + 1];
        const Transition tr = grasp_execute_step(w, b, next.belief.mean.head(2));
        b = tr.belief;
        cost += next.stage_cost;
        ++cursor;
        ++since_plan;
        record(t + 1, tr.control, replanned, false);
    }
    run.total_cost = cost;
    return run;
}

}  // namespace bnav
