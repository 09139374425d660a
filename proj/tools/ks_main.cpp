#include <CLI11.hpp>
#include <string>
#include <vector>

#include "ks/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nonlocal kernel Sobolev toolkit: kernel diagnostics, critical-order "
                 "estimation, bilinear-form assembly, embedding probes, and variational solves"};
    app.require_subcommand(1);

    struct Sub {
        std::string name, help;
    };
    const std::vector<Sub> subs = {
        {"kernel-check", "validate kernel integrability and monotonicity"},
        {"exponent", "estimate the critical order bracket and classify l_infinity"},
        {"assemble", "assemble the stiffness matrix and report its spectrum summary"},
        {"solve", "compute a nontrivial ground state (Nehari or mountain pass)"},
        {"sweep", "tabulate embedding constants across q and resolution"},
        {"probe", "cube-projection compactness diagnostic and concentration trends"},
    };

    std::string config_path;
    std::vector<std::string> overrides;
    std::string chosen;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("config", config_path, "INI config file")->required();
        sub->add_option("--set", overrides, "override a config value (section.key=value)");
        sub->callback([&chosen, name = s.name]() { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return ks::run_task(chosen, config_path, overrides);
}
