#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stopflow/cli_commands.hpp"
#include "stopflow/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"optimal free-target Brownian stopping and Stefan flows"};
    app.set_version_flag("--version", stopflow::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string suite = "all";
    std::uint64_t seed = 20260808ULL;
    int trials = 20;
    std::string in_path, export_out;
    bool summary = false;

    auto* solve = app.add_subcommand("solve", "free target, barrier and flow artifacts");
    solve->add_option("--config", config_path, "run config (JSON)")->required();
    solve->add_option("--out", out_dir, "output directory override");

    auto* sim = app.add_subcommand("simulate", "Brownian particles against a stored barrier");
    sim->add_option("--config", config_path, "run config (JSON)")->required();
    sim->add_option("--out", out_dir, "output directory override");
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    sim->add_option("--seed", sim_seed, "seed override")->each([&](const std::string&) {
        sim_seed_set = true;
    });

    auto* verify = app.add_subcommand("verify", "theorem-check suites");
    verify->add_option("--suite", suite,
                       "monotonicity|contraction_bv|universality_saturation|mc_consistency|all");
    verify->add_option("--seed", seed, "harness seed");
    verify->add_option("--trials", trials, "trials per suite");
    verify->add_option("--out", out_dir, "report directory");
    std::string verify_config;
    verify->add_option("--config", verify_config, "optional explicit-pair config");

    auto* exp = app.add_subcommand("export", "re-emit or summarize a field CSV");
    exp->add_option("input", in_path, "field CSV")->required();
    exp->add_option("--out", export_out, "rewrite destination");
    exp->add_flag("--summary", summary, "print a JSON summary");

    CLI11_PARSE(app, argc, argv);

    auto opt = [](const std::string& s) {
        return s.empty() ? std::optional<std::string>{} : std::optional<std::string>{s};
    };

    if (solve->parsed()) return stopflow::cmd_solve(config_path, opt(out_dir));
    if (sim->parsed())
        return stopflow::cmd_simulate(config_path, opt(out_dir),
                                      sim_seed_set
                                          ? std::optional<std::uint64_t>{sim_seed}
                                          : std::nullopt);
    if (verify->parsed())
        return stopflow::cmd_verify(suite, seed, trials, opt(out_dir), opt(verify_config));
    if (exp->parsed()) return stopflow::cmd_export(in_path, opt(export_out), summary);
    return 2;
}
