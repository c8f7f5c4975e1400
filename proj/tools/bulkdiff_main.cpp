// Command-line front end; talks to the toolkit through the C API only.

#include <cmath>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "bulkdiff/bulkdiff.h"

namespace {

int run(const std::string& command, const std::string& config, const std::string& outdir,
        int workers, long long seed, double alpha) {
    char* log = nullptr;
    const bd_status st =
        bd_run(command.c_str(), config.empty() ? nullptr : config.c_str(),
               outdir.empty() ? nullptr : outdir.c_str(), workers, seed, alpha, &log);
    if (log) {
        std::fputs(log, stdout);
        bd_string_free(log);
    }
    if (st != BD_OK) {
        const char* msg = bd_last_error();
        if (msg && *msg) std::fprintf(stderr, "bulkdiff: %s\n", msg);
    }
    return static_cast<int>(st);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bulkdiff: finite-volume diffusion matrices, density-fluctuation "
                 "two-point functions, and localized transport formulas for "
                 "interacting particle systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("bulkdiff ") + bd_version());

    std::string config, outdir;
    int workers = 0;
    long long seed = -1;
    double alpha = std::nan("");

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config, "experiment config (JSON file)");
        if (config_required) opt->required();
        sub->add_option("--output", outdir, "output directory override");
        sub->add_option("--workers", workers, "worker threads (0: hardware)");
        sub->add_option("--seed", seed, "seed override (>= 0)");
        sub->add_option("--alpha-override", alpha, "rate exponent override");
    };

    add_common(app.add_subcommand("abar", "cell-problem sweep over scales"), true);
    add_common(app.add_subcommand("two-point", "chain vs kernel two-point table"), true);
    add_common(app.add_subcommand("green-kubo", "localized transport sweep"), true);
    add_common(app.add_subcommand("selftest", "fast self-check battery"), false);

    CLI11_PARSE(app, argc, argv);

    const std::string sub = app.get_subcommands().front()->get_name();
    return run(sub, config, outdir, workers, seed, alpha);
}
