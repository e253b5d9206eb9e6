#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdeinv {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// exit codes of the command-line entry points
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInconclusive = 2;
inline constexpr int kExitConfigError = 64;

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> tol_eq;
    std::optional<double> tol_ineq;
    std::string timing_out;  // optional sidecar file for wall times
};

/// Loads a config, runs the requested checks, writes the JSON report
/// atomically. The report is a pure function of (config, seed, tool
/// version); wall times go to `log` and the optional timing sidecar only.
int run_check(const std::string& config_path, const std::string& out_path,
              const CliOverrides& overrides, std::ostream& log);

struct VerifySuiteResult {
    std::string name;
    bool pass = false;
    int cases = 0;
    double worst_residual = 0.0;
    double tolerance = 0.0;
};

/// Built-in property suites: penrose, powers_stormer, eigenvalue_lipschitz,
/// cone_formulas, series_identities. `negative_control` perturbs the named
/// suite so it must fail (sanity hook for the harness itself).
std::vector<VerifySuiteResult> run_verify_suites(const std::vector<std::string>& names,
                                                 const std::string& negative_control,
                                                 std::uint64_t seed);

/// Runs the suites, writes a JSON report when out_path is nonempty, returns
/// an exit code. An empty or unknown suite selection is a config error.
int run_verify_ops(const std::vector<std::string>& names, const std::string& negative_control,
                   const std::string& out_path, std::uint64_t seed, std::ostream& log);

std::string tool_version();

}  // namespace sdeinv
