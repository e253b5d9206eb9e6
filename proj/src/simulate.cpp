#include "sdeinv/simulate.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sdeinv/rng.hpp"

namespace sdeinv {

namespace {

void validate(const SimConfig& cfg) {
    if (cfg.h <= 0.0) throw std::invalid_argument("SimConfig: h must be positive");
    if (cfg.T < cfg.h) throw std::invalid_argument("SimConfig: T must be at least h");
    if (cfg.n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be at least 1");
    if (cfg.store_stride < 1) throw std::invalid_argument("SimConfig: store_stride must be at least 1");
}

std::vector<int> stored_steps(int n_steps, int stride) {
    std::vector<int> ks;
    for (int k = 0; k <= n_steps; k += stride) ks.push_back(k);
    if (ks.back() != n_steps) ks.push_back(n_steps);
    return ks;
}

PathEnsemble run_paths(const ModelSpec& m, const Vec& x0, const SimConfig& cfg, bool parallel) {
    validate(cfg);
    if (static_cast<int>(x0.size()) != m.dim)
        throw std::invalid_argument("simulate: x0 has wrong dimension");

    const int n_steps = static_cast<int>(std::llround(cfg.T / cfg.h));
    const std::vector<int> ks = stored_steps(n_steps, cfg.store_stride);

    PathEnsemble e;
    e.dim = m.dim;
    e.n_paths = cfg.n_paths;
    e.time_grid.reserve(ks.size());
    for (int k : ks) e.time_grid.push_back(k * cfg.h);
    e.states.assign(static_cast<std::size_t>(cfg.n_paths) * ks.size() * static_cast<std::size_t>(m.dim), 0.0);
    e.aborted.assign(static_cast<std::size_t>(cfg.n_paths), 0);
    e.clip_events.assign(static_cast<std::size_t>(cfg.n_paths), 0);

    const double sqrt_h = std::sqrt(cfg.h);
    const int n = m.dim;

#pragma omp parallel for schedule(static) if (parallel)
    for (int p = 0; p < cfg.n_paths; ++p) {
        Vec x = x0;
        std::int64_t clips = 0;
        bool dead = false;
        std::size_t next_store = 0;
        const auto store = [&](int k) {
            while (next_store < ks.size() && ks[next_store] == k) {
                const std::size_t base =
                    (static_cast<std::size_t>(p) * ks.size() + next_store) * static_cast<std::size_t>(n);
                for (int i = 0; i < n; ++i) e.states[base + static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
                ++next_store;
            }
        };
        store(0);
        for (int k = 0; k < n_steps; ++k) {
            if (!dead) {
                try {
                    if (m.clip_negative)
                        for (double v : x)
                            if (v < 0.0) {
                                ++clips;
                                break;
                            }
                    const Vec b = m.drift_at(x);
                    const Matrix s = m.sigma_at(x);
                    Vec dx(static_cast<std::size_t>(n), 0.0);
                    for (int j = 0; j < n; ++j) {
                        const double xi = counter_normal(cfg.seed, RngStream::PathSim,
                                                          static_cast<std::uint64_t>(p),
                                                          static_cast<std::uint32_t>(k),
                                                          static_cast<std::uint32_t>(j));
                        const double w = sqrt_h * xi;
                        for (int i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] += s(i, j) * w;
                    }
                    for (int i = 0; i < n; ++i)
                        x[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)] * cfg.h +
                                                          dx[static_cast<std::size_t>(i)];
                    if (!all_finite(x)) dead = true;
                } catch (const std::exception&) {
                    dead = true;
                }
            }
            store(k + 1);
        }
        e.aborted[static_cast<std::size_t>(p)] = dead ? 1 : 0;
        e.clip_events[static_cast<std::size_t>(p)] = clips;
    }
    return e;
}

}  // namespace

PathEnsemble simulate(const ModelSpec& m, const Vec& x0, const SimConfig& cfg) {
    return run_paths(m, x0, cfg, true);
}

PathEnsemble simulate_reference(const ModelSpec& m, const Vec& x0, const SimConfig& cfg) {
    return run_paths(m, x0, cfg, false);
}

double wiener_increment(const ModelSpec& m, const SimConfig& cfg, int path, int step, int mode) {
    const double lambda = m.q_eigs.at(static_cast<std::size_t>(mode));
    const double xi = counter_normal(cfg.seed, RngStream::PathSim, static_cast<std::uint64_t>(path),
                                     static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(mode));
    return std::sqrt(lambda * cfg.h) * xi;
}

InvarianceStats invariance_stats(const PathEnsemble& e, const SetOracle& d, const SimConfig& cfg) {
    InvarianceStats s;
    s.band = cfg.band_c * std::sqrt(cfg.h);
    s.paths_counted = e.n_paths;

    std::vector<double> max_violation(static_cast<std::size_t>(e.n_paths), 0.0);
    const int stored = e.n_stored();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < e.n_paths; ++p) {
        double worst = 0.0;
        for (int k = 0; k < stored; ++k) worst = std::max(worst, d.distance(e.state(p, k)));
        max_violation[static_cast<std::size_t>(p)] = worst;
    }

    int exceed = 0;
    for (double v : max_violation)
        if (v > s.band) ++exceed;
    s.exceed_frequency = static_cast<double>(exceed) / static_cast<double>(e.n_paths);
    for (double v : max_violation) s.max_max_violation = std::max(s.max_max_violation, v);

    std::vector<double> sorted = max_violation;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median_max_violation = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

std::vector<MomentEstimate> double_integral_mc(const Matrix& gamma, const std::vector<double>& t_list,
                                               int n_paths, double h, std::uint64_t seed,
                                               bool parallel) {
    if (gamma.rows() != gamma.cols()) throw std::invalid_argument("double_integral_mc: gamma not square");
    if (h <= 0.0 || n_paths < 1) throw std::invalid_argument("double_integral_mc: bad configuration");
    const int modes = gamma.rows();
    double t_max = 0.0;
    for (double t : t_list) t_max = std::max(t_max, t);
    const int n_steps = static_cast<int>(std::llround(t_max / h));

    std::vector<int> t_steps;
    for (double t : t_list) t_steps.push_back(static_cast<int>(std::llround(t / h)));

    // I2[path][t index]
    std::vector<double> i2(static_cast<std::size_t>(n_paths) * t_list.size(), 0.0);
    const double sqrt_h = std::sqrt(h);

#pragma omp parallel for schedule(static) if (parallel)
    for (int p = 0; p < n_paths; ++p) {
        Vec w(static_cast<std::size_t>(modes), 0.0);
        Vec dw(static_cast<std::size_t>(modes), 0.0);
        double integral = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            for (int i = 0; i < modes; ++i)
                dw[static_cast<std::size_t>(i)] =
                    sqrt_h * counter_normal(seed, RngStream::DoubleIntegral,
                                            static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(k),
                                            static_cast<std::uint32_t>(i));
            // Ito: integrand uses W before the increment
            for (int i = 0; i < modes; ++i) {
                const double wi = w[static_cast<std::size_t>(i)];
                if (wi == 0.0) continue;
                for (int j = 0; j < modes; ++j) {
                    const double g = gamma(i, j);
                    if (g != 0.0) integral += g * wi * dw[static_cast<std::size_t>(j)];
                }
            }
            for (int i = 0; i < modes; ++i) w[static_cast<std::size_t>(i)] += dw[static_cast<std::size_t>(i)];
            for (std::size_t ti = 0; ti < t_steps.size(); ++ti)
                if (t_steps[ti] == k + 1)
                    i2[static_cast<std::size_t>(p) * t_list.size() + ti] = integral * integral;
        }
    }

    std::vector<MomentEstimate> out;
    for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
        MomentEstimate est;
        est.t = t_list[ti];
        est.n_paths = n_paths;
        double mean = 0.0;
        for (int p = 0; p < n_paths; ++p) mean += i2[static_cast<std::size_t>(p) * t_list.size() + ti];
        mean /= n_paths;
        double var = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            const double d = i2[static_cast<std::size_t>(p) * t_list.size() + ti] - mean;
            var += d * d;
        }
        var /= std::max(1, n_paths - 1);
        est.mean = mean;
        est.std_error = std::sqrt(var / n_paths);
        out.push_back(est);
    }
    return out;
}

OdeResult ode_viability(const std::function<Vec(const Vec&)>& field, const SetOracle& d,
                        const Vec& x0, double h, double T) {
    if (h <= 0.0 || T < h) throw std::invalid_argument("ode_viability: bad step/horizon");
    OdeResult res;
    Vec y = x0;
    res.max_distance = d.distance(y);
    const int n_steps = static_cast<int>(std::llround(T / h));
    for (int k = 0; k < n_steps; ++k) {
        const Vec k1 = field(y);
        const Vec k2 = field(axpy(0.5 * h, k1, y));
        const Vec k3 = field(axpy(0.5 * h, k2, y));
        const Vec k4 = field(axpy(h, k3, y));
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!all_finite(y)) {
            res.aborted = true;
            break;
        }
        res.max_distance = std::max(res.max_distance, d.distance(y));
    }
    res.final_distance = res.aborted ? std::numeric_limits<double>::quiet_NaN() : d.distance(y);
    return res;
}

}  // namespace sdeinv
