#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spiny/commands.hpp"

namespace {

void add_common(CLI::App* sub, spiny::ExperimentSpec& spec) {
    sub->add_option("--config", spec.config_path, "experiment file (key = value lines)");
    sub->add_option("--set", spec.overrides, "override, key=value; repeatable")->allow_extra_args(false);
    sub->add_option("--out", spec.output_path, "output CSV path");
    sub->add_option("--seed", spec.seed, "master seed");
    sub->add_option("--realizations", spec.realizations, "realizations per ensemble")->check(CLI::PositiveNumber);
    sub->add_option("--workers", spec.workers, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic travelling waves in spiny dendrites"};
    app.require_subcommand(1);

    spiny::ExperimentSpec spec;
    struct Entry {
        const char* name;
        const char* help;
        spiny::Command cmd;
    };
    const Entry entries[] = {
        {"simulate", "one realization: field dump, firing log and speed summary", spiny::Command::simulate},
        {"sweep-noise", "ensemble speed over nu_values (or mu_values)", spiny::Command::sweep_noise},
        {"sweep-kappa", "BR speed over kappa_values", spiny::Command::sweep_kappa},
        {"smallnoise", "travelling-wave speed from the small-noise ODE", spiny::Command::smallnoise},
        {"noise-test", "noise generator statistics against analytic targets", spiny::Command::noise_test},
    };
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, spec);
        sub->callback([&spec, cmd = e.cmd] { spec.command = cmd; });
        if (e.cmd == spiny::Command::noise_test) {
            sub->add_option("--samples", spec.samples, "number of increments")->check(CLI::PositiveNumber);
            sub->add_option("--dump", spec.dump_path, "binary little-endian f64 dump of the increments");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : spiny::kExitValidation;
    }
    return spiny::run_command(spec, std::cerr);
}
