#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "sdeinv/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"sdeinv - numerical checks for stochastic invariance of closed sets"};
    app.require_subcommand(1);

    std::string config_path, out_path = "report.json", timing_out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    double tol_eq = 0.0, tol_ineq = 0.0;
    bool tol_eq_set = false, tol_ineq_set = false;

    CLI::App* check = app.add_subcommand("check", "run the checks described by a config file");
    check->fallthrough();  // global flags may follow the subcommand
    check->add_option("--config", config_path, "JSON config path")->required();
    check->add_option("--out", out_path, "JSON report output path");
    check->add_option("--timing-out", timing_out, "optional wall-time sidecar (not part of the report)");

    std::vector<std::string> suites;
    std::string negative_control;
    std::string verify_out;
    CLI::App* verify = app.add_subcommand("verify-ops", "run the built-in property suites");
    verify->fallthrough();
    verify->add_option("--suite", suites, "suite name(s); all suites when omitted");
    verify->add_option("--negative-control", negative_control,
                       "perturb the named suite so it must fail (self-test hook)");
    verify->add_option("--out", verify_out, "optional JSON report path");

    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) { seed_set = true; });
    app.add_option("--threads", threads, "OpenMP thread count");
    app.add_option("--tol-eq", tol_eq, "kernel-condition tolerance override")
        ->each([&](const std::string&) { tol_eq_set = true; });
    app.add_option("--tol-ineq", tol_ineq, "drift-inequality tolerance override")
        ->each([&](const std::string&) { tol_ineq_set = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sdeinv::kExitConfigError;
    }

    sdeinv::CliOverrides ov;
    if (seed_set) ov.seed = seed;
    if (threads > 0) ov.threads = threads;
    if (tol_eq_set) ov.tol_eq = tol_eq;
    if (tol_ineq_set) ov.tol_ineq = tol_ineq;
    ov.timing_out = timing_out;

    if (check->parsed()) return sdeinv::run_check(config_path, out_path, ov, std::cerr);
    return sdeinv::run_verify_ops(suites, negative_control, verify_out, seed_set ? seed : 1,
                                  std::cerr);
}
