#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sdeinv/geometry.hpp"
#include "sdeinv/invariance.hpp"
#include "sdeinv/matrix.hpp"

namespace sdeinv {

struct SimConfig {
    double h = 1e-3;
    double T = 1.0;
    int n_paths = 1;
    std::uint64_t seed = 1;
    int store_stride = 1;  // store every k-th step; the final state is always kept
    double band_c = 5.0;   // discretization band, in units of sqrt(h)
};

/// Euler trajectories under truncated Q-Wiener noise. States are stored on
/// the (possibly strided) grid; per-path statistics are recomputable from
/// them. Identical (seed, cfg, model) give bit-identical ensembles whether
/// simulated serially or in parallel.
struct PathEnsemble {
    int dim = 0;
    int n_paths = 0;
    std::vector<double> time_grid;
    std::vector<double> states;  // [path][stored index][component]
    std::vector<std::uint8_t> aborted;
    std::vector<std::int64_t> clip_events;  // positive-part evaluations per path

    int n_stored() const { return static_cast<int>(time_grid.size()); }
    Vec state(int path, int k) const {
        const std::size_t base =
            (static_cast<std::size_t>(path) * static_cast<std::size_t>(n_stored()) +
             static_cast<std::size_t>(k)) *
            static_cast<std::size_t>(dim);
        return Vec(states.begin() + static_cast<std::ptrdiff_t>(base),
                   states.begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(dim)));
    }
};

/// X_{k+1} = X_k + b(X_k) h + Sigma(X_k) sqrt(h) xi_k, with xi_k drawn from a
/// counter-based stream keyed (seed, path, step, mode). The Q-Wiener
/// increment is sigma-applied, so the q_eigs cancel out of the state update;
/// see wiener_increment for the raw mode marginals.
PathEnsemble simulate(const ModelSpec& m, const Vec& x0, const SimConfig& cfg);

/// Plain-loop reference implementation; must match simulate() bit for bit.
PathEnsemble simulate_reference(const ModelSpec& m, const Vec& x0, const SimConfig& cfg);

/// Q-Wiener increment component sqrt(lambda_j h) xi for the given step, from
/// the same stream simulate() consumes.
double wiener_increment(const ModelSpec& m, const SimConfig& cfg, int path, int step, int mode);

struct InvarianceStats {
    double band = 0.0;  // band_c * sqrt(h)
    double median_max_violation = 0.0;
    double max_max_violation = 0.0;
    double exceed_frequency = 0.0;  // fraction of paths whose violation exceeds the band
    int paths_counted = 0;
};

/// Pure post-processing of stored paths against the set D.
InvarianceStats invariance_stats(const PathEnsemble& e, const SetOracle& d, const SimConfig& cfg);

struct MomentEstimate {
    double t = 0.0;
    double mean = 0.0;       // of I_t^2
    double std_error = 0.0;
    int n_paths = 0;
};

/// Nested Euler estimate of E[I_t^2] for the constant double stochastic
/// integral I_t = sum_{ij} gamma^{ij} int_0^t W^i dW^j.
std::vector<MomentEstimate> double_integral_mc(const Matrix& gamma, const std::vector<double>& t_list,
                                               int n_paths, double h, std::uint64_t seed,
                                               bool parallel = true);

struct OdeResult {
    double max_distance = 0.0;
    double final_distance = 0.0;
    bool aborted = false;
};

/// Classical 4th-order one-step integration of y' = a(y); returns the
/// distance-to-set profile. Non-finite states abort with a flag.
OdeResult ode_viability(const std::function<Vec(const Vec&)>& field, const SetOracle& d,
                        const Vec& x0, double h, double T);

}  // namespace sdeinv
