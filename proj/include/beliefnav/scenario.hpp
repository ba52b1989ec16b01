#pragma once

// Builds worlds and query sets from config files. Every constant the experiments depend on comes from
// the file; the defaults here only fill optional knobs.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "beliefnav/beacon_world.hpp"
#include "beliefnav/config.hpp"
#include "beliefnav/laser_grasp.hpp"
#include "beliefnav/roadmap.hpp"

namespace bnav {

/// 2x2 covariance from "xx, xy, yy"; a single value means an isotropic covariance.
inline Matrix read_cov2(const Section &s, const std::string &key) {
    const auto v = s.numbers(key);
    Matrix m(2, 2);
    if (v.size() == 1) {
        m << v[0], 0.0, 0.0, v[0];
    } else if (v.size() == 3) {
        m << v[0], v[1], v[1], v[2];
    } else {
        s.fail(s.line(), "field '" + key + "' needs 1 or 3 values (xx, xy, yy)");
    }
    if (m(0, 0) < 0.0 || m(1, 1) < 0.0 || m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1) < -1e-15) {
        s.fail(s.line(), "field '" + key + "' is not positive semidefinite");
    }
    return m;
}

inline Matrix read_cov2_or_zero(const Section &s, const std::string &key) {
    return s.has(key) ? read_cov2(s, key) : Matrix(Matrix::Zero(2, 2));
}

inline Vector read_vec(const Section &s, const std::string &key, int n) {
    const auto v = s.numbers(key, n);
    return Eigen::Map<const Vector>(v.data(), n);
}

inline double read_positive(const Section &s, const std::string &key) {
    const double v = s.number(key);
    if (!(v > 0.0)) s.fail(s.line(), "field '" + key + "' must be positive");
    return v;
}

/// A disc body from `position`, `radius` and optional `cov`.
inline Body read_body(const Section &s) {
    const Vector p = read_vec(s, "position", 2);
    return make_disc(p[0], p[1], read_positive(s, "radius"), read_cov2_or_zero(s, "cov"));
}

/// Matrix weight from a scalar (times identity) or a diagonal.
inline Matrix read_weight(const Section &s, const std::string &key) {
    const auto v = s.numbers(key);
    for (double x : v) {
        if (x < 0.0) s.fail(s.line(), "field '" + key + "' must be non-negative");
    }
    if (v.size() == 1) return Matrix::Constant(1, 1, v[0]);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).asDiagonal();
}

inline CostWeights read_weights(const Section &s) {
    CostWeights w;
    w.M_u = read_weight(s, "M_u");
    w.M_g = read_weight(s, "M_g");
    if (w.M_g.size() == 1) w.M_g = w.M_g(0, 0) * Matrix::Identity(2, 2);
    w.M_Sigma = read_weight(s, "M_Sigma");
    if (w.M_Sigma.size() == 1) w.M_Sigma = w.M_Sigma(0, 0) * Matrix::Identity(2, 2);
    w.M_C = s.number("M_C");
    if (w.M_C < 0.0) s.fail(s.line(), "field 'M_C' must be non-negative");
    return w;
}

struct PlannerSettings {
    PlannerOptions options;
    PrmParams prm;
    std::vector<Vector> fixed_nodes;
};

inline void read_planner(const Config &c, PlannerSettings &ps) {
    ps.options.weights = read_weights(c.one("weights"));
    if (const Section *p = c.optional("planner")) {
        ps.options.eps = p->number_or("eps", ps.options.eps);
        ps.options.collision.tol = p->number_or("tol", ps.options.collision.tol);
        ps.options.max_expansions = static_cast<std::size_t>(p->integer_or("max_expansions", 200000));
        ps.options.extension_rounds = p->integer_or("extension_rounds", ps.options.extension_rounds);
        ps.options.extension_samples = p->integer_or("extension_samples", ps.options.extension_samples);
        ps.options.extension_seconds = p->number_or("extension_seconds", ps.options.extension_seconds);
        ps.options.seed = static_cast<std::uint64_t>(p->integer_or("seed", 1));
        if (p->has("estimator")) {
            try {
                ps.options.estimator = parse_estimator(p->text("estimator"));
            } catch (const std::invalid_argument &e) {
                p->fail(p->entries().at("estimator").line, e.what());
            }
        }
        if (!(ps.options.eps > 0.0 && ps.options.eps < 1.0)) p->fail(p->line(), "field 'eps' must lie in (0, 1)");
        if (!(ps.options.collision.tol > 0.0)) p->fail(p->line(), "field 'tol' must be positive");
    }
    if (const Section *r = c.optional("prm")) {
        ps.prm.node_count = r->integer_or("nodes", ps.prm.node_count);
        ps.prm.k_neighbors = r->integer_or("k", ps.prm.k_neighbors);
        ps.prm.max_edge_length = r->number_or("max_edge", ps.prm.max_edge_length);
        ps.prm.seed = static_cast<std::uint64_t>(r->integer_or("seed", 1));
        if (ps.prm.k_neighbors < 1) r->fail(r->line(), "field 'k' must be >= 1");
        if (!(ps.prm.max_edge_length > 0.0)) r->fail(r->line(), "field 'max_edge' must be positive");
    }
    for (const Section *n : c.all("node")) ps.fixed_nodes.push_back(read_vec(*n, "position", 2));
}

struct BeaconScenario {
    BeaconWorld world;
    PlannerSettings planner;
};

inline BeaconScenario load_beacon_scenario(const Config &c) {
    BeaconScenario sc;
    BeaconWorld &w = sc.world;
    const Section &ws = c.one("world");
    const auto b = ws.numbers("bounds", 4);
    w.env.xmin = b[0];
    w.env.xmax = b[1];
    w.env.ymin = b[2];
    w.env.ymax = b[3];
    if (!(w.env.xmax > w.env.xmin && w.env.ymax > w.env.ymin)) ws.fail(ws.line(), "field 'bounds' is empty");
    w.env.robot_radius = read_positive(ws, "robot_radius");
    w.sigma_z = read_positive(ws, "sigma_z");
    w.sensing_range = ws.number_or("sensing_range", w.sensing_range);
    w.waypoint_step = ws.has("waypoint_step") ? read_positive(ws, "waypoint_step") : w.waypoint_step;
    w.odometry.trans = ws.number_or("odometry_trans", w.odometry.trans);
    w.odometry.rot = ws.number_or("odometry_rot", w.odometry.rot);
    w.odometry.floor = ws.number_or("odometry_floor", w.odometry.floor);

    const Section &ss = c.one("start");
    w.start_pose = read_vec(ss, "pose", 3);
    const auto sd = ss.numbers("cov", 3);
    w.start_cov = Eigen::Map<const Vector>(sd.data(), 3).asDiagonal();
    if (w.start_cov.minCoeff() < 0.0) ss.fail(ss.line(), "field 'cov' must be non-negative");
    w.goal = read_vec(c.one("goal"), "position", 2);

    for (const Section *o : c.all("obstacle")) {
        const Body body = read_body(*o);
        if (!w.env.inside(body.position_mean())) o->fail(o->line(), "obstacle outside the world bounds");
        w.env.obstacles.push_back(body);
        w.obstacle_truth.push_back(o->has("truth") ? read_vec(*o, "truth", 2) : body.position_mean());
    }
    for (const Section *bs : c.all("beacon")) {
        Beacon bc;
        bc.mean = read_vec(*bs, "position", 2);
        bc.cov = read_cov2_or_zero(*bs, "cov");
        bc.truth = bs->has("truth") ? read_vec(*bs, "truth", 2) : bc.mean;
        if (!w.env.inside(bc.mean)) bs->fail(bs->line(), "beacon outside the world bounds");
        w.beacons.push_back(bc);
    }
    if (w.beacons.empty()) c.fail(1, "at least one [beacon] section is required");
    read_planner(c, sc.planner);
    return sc;
}

struct GraspScenario {
    LaserGraspWorld world;
    PlannerOptions options;
};

inline GraspScenario load_grasp_scenario(const Config &c) {
    GraspScenario sc;
    LaserGraspWorld &w = sc.world;
    w.puck = read_body(c.one("puck"));
    const Section &as = c.one("aiding");
    w.aiding = read_body(as);
    w.aiding_truth = as.has("truth") ? read_vec(as, "truth", 2) : w.aiding.position_mean();
    if (const Section *bs = c.optional("ball")) {
        RollingBall rb;
        rb.body = read_body(*bs);
        rb.velocity = read_vec(*bs, "velocity", 2);
        rb.velocity_cov = read_cov2_or_zero(*bs, "velocity_cov");
        w.ball = rb;
    }
    const Section &es = c.one("effector");
    w.ee_radius = read_positive(es, "radius");
    w.start = read_vec(es, "start", 2);
    w.start_cov = read_cov2(es, "start_cov");
    w.motion_noise = es.number_or("motion_noise", w.motion_noise);
    w.motion_floor = es.number_or("motion_floor", w.motion_floor);
    w.laser_sigma = read_positive(c.one("laser"), "sigma");

    const Section &ls = c.one("lattice");
    const auto box = ls.numbers("box", 4);
    w.lattice_step = read_positive(ls, "step");
    const int nx = static_cast<int>(std::floor((box[1] - box[0]) / w.lattice_step + 1e-9));
    const int ny = static_cast<int>(std::floor((box[3] - box[2]) / w.lattice_step + 1e-9));
    if (nx < 1 || ny < 1) ls.fail(ls.line(), "field 'box' spans less than one step");
    for (int i = 0; i <= nx; ++i) {
        for (int j = 0; j <= ny; ++j) w.lattice.push_back(vec2(box[0] + i * w.lattice_step, box[2] + j * w.lattice_step));
    }

    PlannerSettings ps;
    read_planner(c, ps);
    sc.options = ps.options;
    if (const Section *p = c.optional("planner")) {
        w.horizon = p->integer_or("horizon", w.horizon);
        w.replan_period = p->integer_or("replan_period", w.replan_period);
        if (w.horizon < 1 || w.replan_period < 1) p->fail(p->line(), "horizon and replan_period must be >= 1");
    }
    return sc;
}

}  // namespace bnav
