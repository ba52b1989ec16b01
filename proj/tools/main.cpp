#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char **argv) {
    using namespace bnav::cli;
    CLI::App app{"beliefnav: collision probabilities, convergence tables and belief-space planning"};
    app.require_subcommand(1);

    CommandOptions opt;
    std::string out_path;
    std::string object_uncertainty;
    std::uint64_t seed = 0;
    double eps = 0.0, tol = 0.0;
    std::string estimator;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", opt.config, "scenario or sweep file")->required();
        sub->add_option("--out", out_path, "write CSV here instead of stdout");
        sub->add_option("--seed", seed, "random seed override");
        sub->add_option("--tol", tol, "series tolerance override");
    };
    auto planning = [&](CLI::App *sub) {
        sub->add_option("--eps", eps, "safety level, configurations need P(collision) <= 1 - eps");
        sub->add_option("--estimator", estimator, "series, dutoit or park")
            ->check(CLI::IsMember({"series", "dutoit", "park"}));
    };

    CLI::App *prob = app.add_subcommand("prob", "one robot/obstacle pair through every estimator");
    common(prob);
    CLI::App *converge = app.add_subcommand("converge", "series term counts over a covariance sweep");
    common(converge);
    CLI::App *compare = app.add_subcommand("compare", "estimator table over several [case] sections");
    common(compare);
    CLI::App *plan = app.add_subcommand("plan", "beacon-world plan as a trajectory CSV");
    common(plan);
    planning(plan);
    plan->add_option("--object-uncertainty", object_uncertainty, "model map uncertainty (default on)")
        ->check(CLI::IsMember({"on", "off"}));
    CLI::App *grasp = app.add_subcommand("grasp", "laser-grasp run as a trajectory CSV");
    common(grasp);
    planning(grasp);
    grasp->add_option("--mode", opt.mode, "offline or online")->check(CLI::IsMember({"offline", "online"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitConfig;
    }

    CLI::App *sub = app.get_subcommands().front();
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--tol")) opt.tol = tol;
    if (sub->get_option_no_throw("--eps") && sub->count("--eps")) opt.eps = eps;
    if (sub->get_option_no_throw("--estimator") && sub->count("--estimator")) opt.estimator = estimator;
    if (!object_uncertainty.empty()) opt.object_uncertainty = object_uncertainty == "on";

    std::ostringstream buffer;
    const int code = run(sub->get_name(), opt, buffer, std::cerr);
    if (out_path.empty()) {
        std::cout << buffer.str();
    } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write " << out_path << '\n';
            return kExitConfig;
        }
        f << buffer.str();
    }
    return code;
}
