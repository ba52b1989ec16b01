#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <vector>

#include "beliefnav/beliefnav.hpp"

namespace bnav::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

VolumeConvention read_volume(const Section &s) {
    const std::string v = s.text_or("volume", "combined");
    if (v == "combined") return VolumeConvention::CombinedRadius;
    if (v == "robot") return VolumeConvention::RobotRadius;
    s.fail(s.entries().at("volume").line, "field 'volume' must be 'combined' or 'robot', got '" + v + "'");
}

Estimator estimator_override(const CommandOptions &o, Estimator fallback) {
    if (!o.estimator) return fallback;
    try {
        return parse_estimator(*o.estimator);
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("--estimator: ") + e.what());
    }
}

void apply_overrides(const CommandOptions &o, PlannerOptions &p) {
    if (o.eps) {
        if (!(*o.eps > 0.0 && *o.eps < 1.0)) throw ConfigError("--eps must lie in (0, 1)");
        p.eps = *o.eps;
    }
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw ConfigError("--tol must be positive");
        p.collision.tol = *o.tol;
    }
    if (o.seed) p.seed = *o.seed;
    p.estimator = estimator_override(o, p.estimator);
}

double tol_override(const CommandOptions &o, double fallback) {
    if (!o.tol) return fallback;
    if (!(*o.tol > 0.0)) throw ConfigError("--tol must be positive");
    return *o.tol;
}

bool degenerate(const Body &robot, const Body &obstacle) {
    const Matrix cov = symmetrize(robot.position_cov() + obstacle.position_cov());
    return sym_eig(cov).values.minCoeff() <= kDeterministicVariance;
}

/// Both approximations need a density; with a singular combined covariance the overlap indicator is
/// reported instead.
double baseline(Estimator e, const Body &robot, const Body &obstacle, VolumeConvention v) {
    if (degenerate(robot, obstacle)) return collision_probability(robot, obstacle, CollisionOptions{}).value;
    return e == Estimator::DuToit ? dutoit_burdick(robot, obstacle, v) : park_upper_bound(robot, obstacle, v);
}

GridResult grid_or_indicator(const Body &robot, const Body &obstacle) {
    if (degenerate(robot, obstacle)) {
        GridResult g;
        g.value = collision_probability(robot, obstacle, CollisionOptions{}).value;
        return g;
    }
    return grid_integral(robot, obstacle);
}

Body read_case_body(const Section &s, const std::string &prefix) {
    const Vector p = read_vec(s, prefix + "_position", 2);
    return make_disc(p[0], p[1], read_positive(s, prefix + "_radius"), read_cov2_or_zero(s, prefix + "_cov"));
}

const std::vector<std::string> kTrajectoryColumns = {"step",   "mean_x", "mean_y",          "mean_theta", "cov_xx",
                                                     "cov_xy", "cov_yy", "p_collision_max", "safe_flag",  "cost_so_far"};

std::vector<std::string> trajectory_cells(int step, const Belief &b, double p, bool safe, double cost) {
    const double theta = b.dim() > 2 ? b.mean[2] : 0.0;
    return {format_number(step),         format_number(b.mean[0]),   format_number(b.mean[1]),
            format_number(theta),        format_number(b.cov(0, 0)), format_number(b.cov(0, 1)),
            format_number(b.cov(1, 1)), format_number(p),           safe ? "1" : "0",
            format_number(cost)};
}

}  // namespace

int cmd_prob(const CommandOptions &o, std::ostream &out) {
    const Config c = Config::load(o.config);
    const Body robot = read_body(c.one("robot"));
    const Body obstacle = read_body(c.one("obstacle"));
    const Section *ps = c.optional("prob");
    const Section empty;
    const Section &p = ps ? *ps : empty;
    const double tol = tol_override(o, p.number_or("tol", 1e-9));
    const int samples = p.integer_or("samples", 1000000);
    if (samples < 1000) p.fail(p.line(), "field 'samples' must be at least 1000");
    const std::uint64_t seed = o.seed ? *o.seed : static_cast<std::uint64_t>(p.integer_or("seed", 1));
    const VolumeConvention vol = ps ? read_volume(p) : VolumeConvention::CombinedRadius;

    CsvWriter w(out, {"estimator", "value", "terms", "samples", "stderr", "seconds"});
    auto t0 = Clock::now();
    CollisionOptions copt;
    copt.tol = tol;
    const CollisionResult s = collision_probability(robot, obstacle, copt);
    w.row("series", s.value, s.terms_used, 0, 0.0, seconds_since(t0));
    t0 = Clock::now();
    const double dt = baseline(Estimator::DuToit, robot, obstacle, vol);
    w.row("dutoit", dt, 0, 0, 0.0, seconds_since(t0));
    t0 = Clock::now();
    const double pk = baseline(Estimator::Park, robot, obstacle, vol);
    w.row("park", pk, 0, 0, 0.0, seconds_since(t0));
    t0 = Clock::now();
    const MonteCarloResult mc = monte_carlo(robot, obstacle, samples, seed);
    w.row("monte_carlo", mc.estimate, 0, mc.samples, mc.stderr_, seconds_since(t0));
    t0 = Clock::now();
    const GridResult g = grid_or_indicator(robot, obstacle);
    w.row("grid", g.value, 0, static_cast<long long>(g.radial) * g.angular, 0.0, seconds_since(t0));
    return kExitOk;
}

int cmd_converge(const CommandOptions &o, std::ostream &out) {
    const Config c = Config::load(o.config);
    const Section &s = c.one("converge");
    const double r1 = read_positive(s, "robot_radius");
    const double r2 = read_positive(s, "obstacle_radius");
    const double base = s.number("base_distance");
    const std::vector<double> offsets = s.numbers("offsets");
    const double start = read_positive(s, "cov_start");
    const double stop = read_positive(s, "cov_stop");
    const double step = read_positive(s, "cov_step");
    if (stop < start) s.fail(s.line(), "cov_stop is below cov_start");
    const std::string rule = s.text_or("rule", "fallback");
    SeriesOptions sopt;
    if (rule == "fallback") {
        sopt.rule = StopRule::Fallback;
    } else if (rule == "dual") {
        sopt.rule = StopRule::Dual;
    } else if (rule == "certificate") {
        sopt.rule = StopRule::Certificate;
    } else {
        s.fail(s.entries().at("rule").line, "field 'rule' must be fallback, dual or certificate");
    }
    sopt.tol = tol_override(o, s.number_or("tol", 1e-6));
    sopt.tail_shortcut = false;  // the sweep reports series term counts
    const int repeats = s.integer_or("repeats", 1);
    if (repeats < 1) s.fail(s.line(), "field 'repeats' must be >= 1");
    if (offsets.size() > 26) s.fail(s.line(), "at most 26 offsets");

    // The sweep runs start, start + step, ... and always ends on stop.
    std::vector<double> variances;
    for (int k = 0; start + k * step < stop - 1e-9; ++k) variances.push_back(start + k * step);
    variances.push_back(stop);

    const double y = (r1 + r2) * (r1 + r2);
    CsvWriter w(out, {"config", "distance", "variance", "terms", "value", "bound", "seconds"});
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const std::string label(1, static_cast<char>('A' + i));
        const double d = base + offsets[i];
        for (double v : variances) {
            std::vector<double> times;
            SeriesResult r;
            for (int rep = 0; rep < repeats; ++rep) {
                const auto t0 = Clock::now();
                r = cdf(canonicalize(vec2(d, 0.0), diag2(v, v), Matrix::Identity(2, 2)), y, sopt);
                times.push_back(seconds_since(t0));
            }
            std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
            w.row(label, d, v, r.terms_used, r.value, r.bound_at_stop, times[times.size() / 2]);
        }
    }
    return kExitOk;
}

int cmd_compare(const CommandOptions &o, std::ostream &out) {
    const Config c = Config::load(o.config);
    const Section *cs = c.optional("compare");
    const Section empty;
    const Section &p = cs ? *cs : empty;
    const int samples = p.integer_or("samples", 1000000);
    if (samples < 1000) p.fail(p.line(), "field 'samples' must be at least 1000");
    const std::uint64_t seed = o.seed ? *o.seed : static_cast<std::uint64_t>(p.integer_or("seed", 1));
    CollisionOptions copt;
    copt.tol = tol_override(o, p.number_or("tol", 1e-9));
    const auto cases = c.all("case");
    if (cases.empty()) c.fail(1, "at least one [case] section is required");

    CsvWriter w(out, {"case", "volume", "series", "series_terms", "dutoit", "park", "grid", "monte_carlo",
                      "monte_carlo_stderr"});
    for (const Section *s : cases) {
        const std::string name = s->text("name");
        const Body robot = read_case_body(*s, "robot");
        const Body obstacle = read_case_body(*s, "obstacle");
        const VolumeConvention vol = read_volume(*s);
        const CollisionResult r = collision_probability(robot, obstacle, copt);
        const MonteCarloResult mc = monte_carlo(robot, obstacle, samples, seed);
        w.row(name, vol == VolumeConvention::RobotRadius ? "robot" : "combined", r.value, r.terms_used,
              baseline(Estimator::DuToit, robot, obstacle, vol), baseline(Estimator::Park, robot, obstacle, vol),
              grid_or_indicator(robot, obstacle).value, mc.estimate, mc.stderr_);
    }
    return kExitOk;
}

int cmd_plan(const CommandOptions &o, std::ostream &out) {
    const Config c = Config::load(o.config);
    BeaconScenario sc = load_beacon_scenario(c);
    BeaconWorld &world = sc.world;
    PlannerSettings &ps = sc.planner;
    apply_overrides(o, ps.options);
    if (o.seed) ps.prm.seed = *o.seed;
    const bool object_uncertainty = o.object_uncertainty.value_or(true);

    const auto t0 = Clock::now();
    Roadmap rm = build_prm(world.env, world.start_pose.head(2), world.goal, ps.prm, ps.fixed_nodes);
    const PlanResult p = plan(rm, 0, 1, Belief{world.start_pose, world.start_cov},
                              beacon_domain(world, object_uncertainty), ps.options, &world.env);
    const double total_seconds = seconds_since(t0);
    const ExecutionTrace exec = execute_plan(world, p, object_uncertainty, ps.options.collision.tol);

    CsvWriter w(out, kTrajectoryColumns);
    for (std::size_t k = 0; k < p.waypoints.size(); ++k) {
        const Waypoint &wp = p.waypoints[k];
        w.row_cells(trajectory_cells(static_cast<int>(k), wp.belief, wp.p_collision, wp.safe, wp.cost_so_far));
    }
    nlohmann::json path = nlohmann::json::array();
    for (int n : p.node_path) path.push_back({rm.nodes[n][0], rm.nodes[n][1]});
    w.footer({{"total_cost", p.total_cost},
              {"planning_time", p.planning_seconds},
              {"total_time", total_seconds},
              {"nodes_added", p.nodes_added},
              {"expansions", p.expansions},
              {"estimator", to_string(ps.options.estimator)},
              {"object_uncertainty", object_uncertainty},
              {"eps", ps.options.eps},
              {"certificate", p.certificate},
              {"max_p_collision", p.max_collision_probability()},
              {"path", path},
              {"execution_max_p_collision", exec.max_collision_probability()},
              {"execution_violations", exec.violations(ps.options.eps)}});
    return kExitOk;
}

int cmd_grasp(const CommandOptions &o, std::ostream &out) {
    if (o.mode != "offline" && o.mode != "online") throw ConfigError("--mode must be offline or online");
    const Config c = Config::load(o.config);
    GraspScenario sc = load_grasp_scenario(c);
    apply_overrides(o, sc.options);
    const GraspRun run =
        o.mode == "online" ? run_grasp_online(sc.world, sc.options) : run_grasp_offline(sc.world, sc.options);

    std::vector<std::string> cols = kTrajectoryColumns;
    for (const char *b : {"ball_x", "ball_y", "ball_cov_xx", "ball_cov_xy", "ball_cov_yy"}) cols.emplace_back(b);
    CsvWriter w(out, cols);
    std::vector<Vector> positions;
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
        const GraspStep &s = run.steps[k];
        positions.push_back(s.belief.mean);
        std::vector<std::string> cells = trajectory_cells(static_cast<int>(k), s.belief, s.p_collision, s.safe, s.cost_so_far);
        if (sc.world.ball) {
            const Vector m = s.ball.position_mean();
            const Matrix v = s.ball.position_cov();
            for (double x : {m[0], m[1], v(0, 0), v(0, 1), v(1, 1)}) cells.push_back(format_number(x));
        } else {
            for (int i = 0; i < 5; ++i) cells.emplace_back("nan");
        }
        w.row_cells(cells);
    }
    const Vector goal = Vector::Zero(2);
    w.footer({{"total_cost", run.total_cost},
              {"planning_time", run.planning_seconds},
              {"nodes_added", 0},
              {"mode", o.mode},
              {"replans", run.replans},
              {"reached_goal", run.reached_goal},
              {"all_safe", run.all_safe()},
              {"retreat", has_retreat(positions, goal)},
              {"readvance_index", readvance_index(positions, goal)}});
    if (!run.reached_goal) throw PlanningError("grasp: the end-effector did not reach the grasp point");
    return kExitOk;
}

int run(const std::string &command, const CommandOptions &o, std::ostream &out, std::ostream &err) {
    try {
        if (command == "prob") return cmd_prob(o, out);
        if (command == "converge") return cmd_converge(o, out);
        if (command == "compare") return cmd_compare(o, out);
        if (command == "plan") return cmd_plan(o, out);
        if (command == "grasp") return cmd_grasp(o, out);
        err << "error: unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const PlanningError &e) {
        err << "planning failure: " << e.what() << '\n';
        return kExitPlanning;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace bnav::cli
