#pragma once

// Probabilistic roadmap and belief-space search. Expanding an edge propagates the belief through every
// interpolated waypoint, checks eps-safety there and accumulates the stage cost
//   |u|^2_{M_u} + |x - x_g|^2_{M_g} + tr(M_S^T Sigma M_S) + M_C P(C).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "beliefnav/baselines.hpp"
#include "beliefnav/belief_filter.hpp"
#include "beliefnav/collision.hpp"

namespace bnav {

class PlanningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Environment2D {
    double xmin = 0.0, xmax = 30.0, ymin = 0.0, ymax = 20.0;
    std::vector<Body> obstacles;  // means are used for sampling and edge clearance
    double robot_radius = 0.0;

    [[nodiscard]] bool inside(const Vector &p) const {
        return p[0] >= xmin && p[0] <= xmax && p[1] >= ymin && p[1] <= ymax;
    }
    [[nodiscard]] bool point_free(const Vector &p) const {
        for (const Body &o : obstacles) {
            if ((p - o.position_mean()).norm() <= o.radius + robot_radius) return false;
        }
        return true;
    }
    [[nodiscard]] bool segment_free(const Vector &a, const Vector &b) const {
        const Vector d = b - a;
        const double len2 = d.squaredNorm();
        for (const Body &o : obstacles) {
            const Vector c = o.position_mean();
            const double t = len2 > 0.0 ? std::clamp((c - a).dot(d) / len2, 0.0, 1.0) : 0.0;
            if ((a + t * d - c).norm() <= o.radius + robot_radius) return false;
        }
        return true;
    }
};

struct Roadmap {
    std::vector<Vector> nodes;
    std::vector<std::vector<std::pair<int, double>>> adjacency;
    double max_edge_length = 5.0;
    int k_neighbors = 6;

    int add_node(const Vector &p) {
        nodes.push_back(p);
        adjacency.emplace_back();
        return static_cast<int>(nodes.size()) - 1;
    }
    [[nodiscard]] bool has_edge(int a, int b) const {
        for (const auto &[n, len] : adjacency[a]) {
            if (n == b) return true;
        }
        return false;
    }
    void add_edge(int a, int b) {
        if (a == b || has_edge(a, b)) return;
        const double len = (nodes[a] - nodes[b]).norm();
        if (!(len > 0.0)) return;
        adjacency[a].emplace_back(b, len);
        adjacency[b].emplace_back(a, len);
    }
    [[nodiscard]] int size() const { return static_cast<int>(nodes.size()); }
    [[nodiscard]] std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto &a : adjacency) n += a.size();
        return n / 2;
    }
    /// Connect node i to its k nearest neighbours within max_edge_length whose segments are free.
    void connect_nearest(int i, const Environment2D &env) {
        std::vector<std::pair<double, int>> cand;
        for (int j = 0; j < size(); ++j) {
            if (j == i) continue;
            const double d = (nodes[i] - nodes[j]).norm();
            if (d <= max_edge_length) cand.emplace_back(d, j);
        }
        std::sort(cand.begin(), cand.end());
        int added = 0;
        for (const auto &[d, j] : cand) {
            if (added >= k_neighbors) break;
            if (env.segment_free(nodes[i], nodes[j])) {
                add_edge(i, j);
                ++added;
            }
        }
    }
    [[nodiscard]] bool connected(int a, int b) const {
        std::vector<char> seen(nodes.size(), 0);
        std::vector<int> stack{a};
        seen[a] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (v == b) return true;
            for (const auto &[n, len] : adjacency[v]) {
                if (!seen[n]) {
                    seen[n] = 1;
                    stack.push_back(n);
                }
            }
        }
        return false;
    }
};

struct PrmParams {
    int node_count = 65;  // including start and goal
    int k_neighbors = 6;
    double max_edge_length = 5.0;
    std::uint64_t seed = 1;
    int max_attempts_per_node = 1000;
};

/// Start and goal become nodes 0 and 1; the rest are uniform samples outside the inflated obstacle means.
inline Roadmap build_prm(const Environment2D &env, const Vector &start, const Vector &goal, const PrmParams &p,
                         const std::vector<Vector> &fixed_nodes = {}) {
    if (!env.point_free(start)) throw PlanningError("build_prm: start lies inside an obstacle");
    if (!env.point_free(goal)) throw PlanningError("build_prm: goal lies inside an obstacle");
    Roadmap rm;
    rm.max_edge_length = p.max_edge_length;
    rm.k_neighbors = p.k_neighbors;
    rm.add_node(start);
    rm.add_node(goal);
    for (const Vector &f : fixed_nodes) {
        if (env.point_free(f)) rm.add_node(f);
    }
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> ux(env.xmin, env.xmax), uy(env.ymin, env.ymax);
    while (rm.size() < p.node_count) {
        bool placed = false;
        for (int a = 0; a < p.max_attempts_per_node && !placed; ++a) {
            const Vector s = vec2(ux(rng), uy(rng));
            if (env.point_free(s)) {
                rm.add_node(s);
                placed = true;
            }
        }
        if (!placed) throw PlanningError("build_prm: free space too small to place samples");
    }
    for (int i = 0; i < rm.size(); ++i) rm.connect_nearest(i, env);
    if (!rm.connected(0, 1)) {
        throw PlanningError("build_prm: start and goal are not connected; extend the roadmap or add samples");
    }
    return rm;
}

/// Points from a to b inclusive, spaced uniformly at no more than step.
inline std::vector<Vector> edge_waypoints(const Vector &a, const Vector &b, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("edge_waypoints: step must be positive");
    const double len = (b - a).norm();
    const int segments = static_cast<int>(std::ceil(len / step - 1e-12));
    std::vector<Vector> out;
    out.push_back(a);
    for (int i = 1; i <= segments; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / segments));
    return out;
}

struct CostWeights {
    Matrix M_u;      // control weight, control-dimension square
    Matrix M_g;      // 2x2 goal weight
    Matrix M_Sigma;  // weight on the leading block of the covariance
    double M_C = 10.0;

    void validate() const {
        if (M_C < 0.0 || (M_u.size() > 0 && M_u.minCoeff() < 0.0) || M_g.minCoeff() < 0.0 ||
            M_Sigma.minCoeff() < 0.0) {
            throw std::invalid_argument("CostWeights: weights must be non-negative");
        }
    }
};

/// Weight matrices from scalars or diagonals, resized to the control dimension at use.
inline Matrix control_weight(const Matrix &m, Eigen::Index dim) {
    if (m.rows() == dim && m.cols() == dim) return m;
    if (m.size() == 1) return m(0, 0) * Matrix::Identity(dim, dim);
    throw std::invalid_argument("CostWeights: M_u does not match the control dimension");
}

inline double stage_cost(const Belief &b, const Vector &u, double p_collision, const Vector &goal,
                         const CostWeights &w) {
    if (p_collision < 0.0 || p_collision > 1.0) throw std::invalid_argument("stage_cost: probability outside [0,1]");
    double c = 0.0;
    if (u.size() > 0) c += mahalanobis_sq(u, control_weight(w.M_u, u.size()));
    c += mahalanobis_sq(b.mean.head(goal.size()) - goal, w.M_g);
    const Eigen::Index k = w.M_Sigma.rows();
    const Matrix s = b.cov.topLeftCorner(k, k);
    c += (w.M_Sigma.transpose() * s * w.M_Sigma).trace();
    c += w.M_C * p_collision;
    return c;
}

struct Transition {
    Vector control;
    Belief belief;
};

/// Domain hooks used by the search.
struct PlanningDomain {
    /// Drive the belief mean towards target (2D) for time step t -> t+1.
    std::function<Transition(const Belief &, const Vector &target, int t)> propagate;
    /// Obstacles present at time step t.
    std::function<std::vector<Body>(int t)> obstacles;
    bool time_varying = false;
    double robot_radius = 0.3;
    double waypoint_step = 0.25;
    int horizon = 100000;     // max time steps along a plan
    bool allow_wait = false;  // time-varying domains may hold position for a step
};

struct PlannerOptions {
    double eps = 0.99;
    Estimator estimator = Estimator::Series;
    CollisionOptions collision{};
    CostWeights weights{};
    std::size_t max_expansions = 200000;
    int extension_rounds = 3;
    int extension_samples = 50;
    double extension_seconds = 5.0;
    std::uint64_t seed = 1;
};

struct Waypoint {
    Belief belief;
    Vector control;
    double p_collision = 0.0;
    bool safe = true;
    double stage_cost = 0.0;
    double cost_so_far = 0.0;
    int node = -1;  // roadmap node, or -1 for an interpolated point
};

struct PlanResult {
    std::vector<Waypoint> waypoints;
    std::vector<int> node_path;
    double total_cost = 0.0;
    bool certificate = false;
    int nodes_added = 0;
    std::size_t expansions = 0;
    double planning_seconds = 0.0;

    [[nodiscard]] double max_collision_probability() const {
        double m = 0.0;
        for (const auto &w : waypoints) m = std::max(m, w.p_collision);
        return m;
    }
};

struct WaypointCheck {
    double p_collision = 0.0;
    bool safe = true;
};

/// Largest collision probability over the obstacles and the eps-safety verdict at one belief. With
/// early_reject, a waypoint whose rigorous lower bound already exceeds 1 - eps is reported unsafe
/// without evaluating the estimators (its p_collision is then only that lower bound).
inline WaypointCheck check_waypoint(const Belief &b, const std::vector<Body> &obstacles, double robot_radius,
                                    const PlannerOptions &opt, bool early_reject = false) {
    WaypointCheck out;
    const Body robot{b, robot_radius};
    if (early_reject && opt.estimator != Estimator::DuToit) {
        for (const Body &o : obstacles) {
            const Gaussian w = gaussian_difference(robot.position(), o.position());
            const double gap = w.mean.norm() - robot.radius - o.radius;
            if (gap > 0.0 && std::exp(-gap * gap / (2.0 * w.cov.trace())) <= 1.0 - opt.eps) continue;
            const double lb = disc_probability_lower_bound(w.mean, w.cov, robot.radius + o.radius);
            if (lb > 1.0 - opt.eps) return {lb, false};
        }
    }
    for (const Body &o : obstacles) {
        const CollisionResult r = estimate_collision(opt.estimator, robot, o, opt.collision);
        out.p_collision = std::max(out.p_collision, r.value);
        if (!certifies_safe(r, opt.eps)) out.safe = false;
    }
    return out;
}

namespace detail {

struct Label {
    int node = 0;
    int time = 0;
    double cost = 0.0;
    Belief belief;
    std::shared_ptr<const Label> parent;
    std::vector<Waypoint> segment;  // waypoints after the parent's node, ending at this node
};

using LabelPtr = std::shared_ptr<const Label>;

struct LabelOrder {
    bool operator()(const LabelPtr &a, const LabelPtr &b) const {
        if (a->cost != b->cost) return a->cost > b->cost;
        return a->node > b->node;
    }
};

struct SearchOutcome {
    LabelPtr goal;
    std::vector<LabelPtr> settled;
    std::size_t expansions = 0;
};

inline LabelPtr expand_edge(const LabelPtr &from, int to, const Roadmap &rm, const Vector &goal_xy,
                            const PlanningDomain &dom, const PlannerOptions &opt) {
    auto label = std::make_shared<Label>();
    label->node = to;
    label->parent = from;
    Belief b = from->belief;
    double cost = from->cost;
    int t = from->time;
    std::vector<Vector> pts;
    if (to == from->node) {
        pts = {rm.nodes[to], rm.nodes[to]};
    } else {
        pts = edge_waypoints(rm.nodes[from->node], rm.nodes[to], dom.waypoint_step);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (t >= dom.horizon) return nullptr;
        Transition tr = dom.propagate(b, pts[i], t);
        ++t;
        const WaypointCheck chk = check_waypoint(tr.belief, dom.obstacles(t), dom.robot_radius, opt, true);
        if (!chk.safe) return nullptr;
        Waypoint w;
        w.belief = tr.belief;
        w.control = tr.control;
        w.p_collision = chk.p_collision;
        w.safe = true;
        w.stage_cost = stage_cost(tr.belief, tr.control, chk.p_collision, goal_xy, opt.weights);
        cost += w.stage_cost;
        w.cost_so_far = cost;
        w.node = (i + 1 == pts.size()) ? to : -1;
        label->segment.push_back(std::move(w));
        b = tr.belief;
    }
    label->belief = b;
    label->cost = cost;
    label->time = t;
    return label;
}

inline SearchOutcome search(const Roadmap &rm, int start, int goal, const Belief &start_belief,
                            const PlanningDomain &dom, const PlannerOptions &opt) {
    SearchOutcome out;
    const Vector goal_xy = rm.nodes[goal];
    std::priority_queue<LabelPtr, std::vector<LabelPtr>, LabelOrder> open;
    auto root = std::make_shared<Label>();
    root->node = start;
    root->belief = start_belief;
    open.push(root);

    // Visited (position mean, trace) per node, or per (node, time) when obstacles move. Heading is left
    // out: it only records the incoming edge direction and would keep every label alive.
    std::map<std::pair<int, int>, std::vector<std::pair<Vector, double>>> visited;

    while (!open.empty()) {
        LabelPtr cur = open.top();
        open.pop();
        const std::pair<int, int> key{cur->node, dom.time_varying ? cur->time : 0};
        const double tr = cur->belief.cov.topLeftCorner(2, 2).trace();
        auto &seen = visited[key];
        bool dominated = false;
        for (const auto &[m, t] : seen) {
            if ((m - cur->belief.mean.head(2)).norm() <= 1e-6 && t <= tr) {
                dominated = true;
                break;
            }
        }
        if (dominated) continue;
        seen.emplace_back(cur->belief.mean.head(2), tr);
        out.settled.push_back(cur);
        if (cur->node == goal) {
            out.goal = cur;
            return out;
        }
        if (++out.expansions > opt.max_expansions) return out;
        for (const auto &[next, len] : rm.adjacency[cur->node]) {
            if (LabelPtr l = expand_edge(cur, next, rm, goal_xy, dom, opt)) open.push(std::move(l));
        }
        if (dom.allow_wait) {
            if (LabelPtr l = expand_edge(cur, cur->node, rm, goal_xy, dom, opt)) open.push(std::move(l));
        }
    }
    return out;
}

inline PlanResult assemble(const LabelPtr &goal_label, const Belief &start_belief, const PlanningDomain &dom,
                           const PlannerOptions &opt, int start) {
    std::vector<const Label *> chain;
    for (const Label *l = goal_label.get(); l != nullptr; l = l->parent.get()) chain.push_back(l);
    std::reverse(chain.begin(), chain.end());
    PlanResult res;
    Waypoint w0;
    w0.belief = start_belief;
    w0.control = Vector();
    const WaypointCheck c0 = check_waypoint(start_belief, dom.obstacles(0), dom.robot_radius, opt);
    w0.p_collision = c0.p_collision;
    w0.safe = c0.safe;
    w0.node = start;
    res.waypoints.push_back(w0);
    res.node_path.push_back(start);
    for (std::size_t i = 1; i < chain.size(); ++i) {
        for (const Waypoint &w : chain[i]->segment) res.waypoints.push_back(w);
        res.node_path.push_back(chain[i]->node);
    }
    res.total_cost = goal_label->cost;
    res.certificate = true;
    for (const Waypoint &w : res.waypoints) res.certificate = res.certificate && w.safe;
    return res;
}

}  // namespace detail

struct ExtensionResult {
    int added = 0;
    int attempts = 0;
    bool success = false;
};

/// Add samples inside the circle of radius max_edge_length / 2 around frontier until succeeded() reports
/// an eps-safe continuation or the sample / time budget runs out.
inline ExtensionResult extend_roadmap(Roadmap &rm, int frontier, const Environment2D &env, std::uint64_t seed,
                                      const std::function<bool()> &succeeded, int max_samples = 50,
                                      double max_seconds = 5.0) {
    if (frontier < 0 || frontier >= rm.size()) throw std::invalid_argument("extend_roadmap: bad frontier node");
    ExtensionResult out;
    if (succeeded()) {
        out.success = true;
        return out;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double radius = 0.5 * rm.max_edge_length;
    const Vector centre = rm.nodes[frontier];
    while (out.attempts < max_samples) {
        if (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > max_seconds) break;
        ++out.attempts;
        const double r = radius * std::sqrt(unit(rng));
        const double a = 2.0 * std::numbers::pi * unit(rng);
        const Vector s = centre + vec2(r * std::cos(a), r * std::sin(a));
        if (!env.inside(s) || !env.point_free(s)) continue;
        const int id = rm.add_node(s);
        ++out.added;
        rm.connect_nearest(id, env);
        if (env.segment_free(centre, s)) rm.add_edge(frontier, id);
        if (succeeded()) {
            out.success = true;
            return out;
        }
    }
    return out;
}

/// Lowest-cost eps-safe plan from node start to node goal. On failure the roadmap is extended around
/// the settled node closest to the goal, up to opt.extension_rounds times.
inline PlanResult plan(Roadmap &rm, int start, int goal, const Belief &start_belief, const PlanningDomain &dom,
                       const PlannerOptions &opt, const Environment2D *env = nullptr) {
    if (start < 0 || start >= rm.size() || goal < 0 || goal >= rm.size()) {
        throw std::invalid_argument("plan: start or goal is not a roadmap node");
    }
    opt.weights.validate();
    const auto t0 = std::chrono::steady_clock::now();
    int added = 0;
    std::size_t expansions = 0;
    std::vector<int> tried;

    detail::SearchOutcome outcome = detail::search(rm, start, goal, start_belief, dom, opt);
    expansions += outcome.expansions;
    for (int round = 0; !outcome.goal && env != nullptr && round < opt.extension_rounds; ++round) {
        int frontier = -1;
        double best = std::numeric_limits<double>::infinity();
        for (const auto &l : outcome.settled) {
            if (std::find(tried.begin(), tried.end(), l->node) != tried.end()) continue;
            const double d = (rm.nodes[l->node] - rm.nodes[goal]).norm();
            if (d < best) {
                best = d;
                frontier = l->node;
            }
        }
        if (frontier < 0) break;
        tried.push_back(frontier);
        auto retry = [&] {
            outcome = detail::search(rm, start, goal, start_belief, dom, opt);
            expansions += outcome.expansions;
            return static_cast<bool>(outcome.goal);
        };
        const ExtensionResult ext = extend_roadmap(rm, frontier, *env, opt.seed + 7919ULL * (round + 1), retry,
                                                   opt.extension_samples, opt.extension_seconds);
        added += ext.added;
    }
    if (!outcome.goal) {
        throw PlanningError("plan: no eps-safe path found after " + std::to_string(expansions) + " expansions and " +
                            std::to_string(added) + " added nodes");
    }
    PlanResult res = detail::assemble(outcome.goal, start_belief, dom, opt, start);
    res.nodes_added = added;
    res.expansions = expansions;
    res.planning_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace bnav
