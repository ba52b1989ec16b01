#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace bnav::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitPlanning = 3,
};

/// Command-line overrides; unset fields fall back to the config file.
struct CommandOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    std::optional<double> tol;
    std::optional<std::string> estimator;
    std::optional<bool> object_uncertainty;
    std::string mode = "offline";  // grasp only
};

int cmd_prob(const CommandOptions &o, std::ostream &out);
int cmd_converge(const CommandOptions &o, std::ostream &out);
int cmd_compare(const CommandOptions &o, std::ostream &out);
int cmd_plan(const CommandOptions &o, std::ostream &out);
int cmd_grasp(const CommandOptions &o, std::ostream &out);

/// Dispatch by subcommand name and map errors to exit codes, writing diagnostics to err.
int run(const std::string &command, const CommandOptions &o, std::ostream &out, std::ostream &err);

}  // namespace bnav::cli
