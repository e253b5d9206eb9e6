#include "sdeinv/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "sdeinv/expr.hpp"
#include "sdeinv/geometry.hpp"
#include "sdeinv/invariance.hpp"
#include "sdeinv/linop.hpp"
#include "sdeinv/rng.hpp"
#include "sdeinv/simulate.hpp"

namespace sdeinv {

using json = nlohmann::ordered_json;

std::string tool_version() { return "0.1.0"; }

namespace {

// ------------------------------------------------------------ small utils

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open output file: " + tmp);
        f << content;
    }
    std::filesystem::rename(tmp, path);
}

const json& need(const json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key)) throw ConfigError("missing field '" + key + "' in " + context);
    return j.at(key);
}

Vec to_vec(const json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError("field is not an array in " + context);
    Vec v;
    for (const auto& e : j) v.push_back(e.get<double>());
    return v;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

// ------------------------------------------------------------- tolerances

struct ToleranceInfo {
    ToleranceSet set;
    std::string source_eq = "default";
    std::string source_ineq = "default";
    std::string source_fd = "default";
    std::string source_rank = "default";

    json to_json() const {
        json t;
        t["tol_eq"] = {{"value", set.tol_eq}, {"source", source_eq}};
        t["tol_ineq"] = {{"value", set.tol_ineq}, {"source", source_ineq}};
        t["fd_step"] = {{"value", set.fd_step}, {"source", source_fd}};
        t["rank_tol"] = {{"value", set.rank_tol}, {"source", source_rank}};
        return t;
    }
};

ToleranceInfo parse_tolerances(const json& cfg, const CliOverrides& ov) {
    ToleranceInfo info;
    if (cfg.contains("tolerances")) {
        const json& t = cfg.at("tolerances");
        if (t.contains("tol_eq")) { info.set.tol_eq = t.at("tol_eq").get<double>(); info.source_eq = "config"; }
        if (t.contains("tol_ineq")) { info.set.tol_ineq = t.at("tol_ineq").get<double>(); info.source_ineq = "config"; }
        if (t.contains("fd_step")) { info.set.fd_step = t.at("fd_step").get<double>(); info.source_fd = "config"; }
        if (t.contains("rank_tol")) { info.set.rank_tol = t.at("rank_tol").get<double>(); info.source_rank = "config"; }
    }
    if (ov.tol_eq) { info.set.tol_eq = *ov.tol_eq; info.source_eq = "override"; }
    if (ov.tol_ineq) { info.set.tol_ineq = *ov.tol_ineq; info.source_ineq = "override"; }
    return info;
}

// ------------------------------------------------------------------ model

std::function<Vec(const Vec&)> drift_from_expressions(std::vector<Expression> exprs) {
    return [exprs = std::move(exprs)](const Vec& x) {
        Vec b;
        b.reserve(exprs.size());
        for (const Expression& e : exprs) b.push_back(e.eval(x));
        return b;
    };
}

std::function<Matrix(const Vec&)> matrix_from_expressions(std::vector<std::vector<Expression>> rows) {
    return [rows = std::move(rows)](const Vec& x) {
        Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.size()));
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j)
                m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(x);
        return m;
    };
}

ModelSpec parse_model(const json& cfg) {
    const json& mj = need(cfg, "model", "config");
    if (mj.contains("builtin")) {
        const json& b = mj.at("builtin");
        const std::string name = need(b, "name", "model.builtin").get<std::string>();
        if (name == "cir")
            return ModelSpec::cir(need(b, "a", "model.builtin").get<double>(),
                                  b.value("b", 0.0), need(b, "sigma0", "model.builtin").get<double>());
        if (name == "ou")
            return ModelSpec::ou(need(b, "theta", "model.builtin").get<double>(),
                                 need(b, "mu", "model.builtin").get<double>(),
                                 need(b, "sigma0", "model.builtin").get<double>());
        if (name == "linear_sigma") return ModelSpec::linear_sigma();
        if (name == "orthant_diag")
            return ModelSpec::orthant_diag(to_vec(need(b, "rates", "model.builtin"), "model.builtin.rates"),
                                           to_vec(need(b, "drift", "model.builtin"), "model.builtin.drift"));
        throw ConfigError("unknown builtin model '" + name + "'");
    }

    ModelSpec m;
    m.dim = need(mj, "dim", "model").get<int>();
    if (m.dim < 1) throw ConfigError("model.dim must be positive");
    if (mj.contains("q_eigs")) {
        m.q_eigs = to_vec(mj.at("q_eigs"), "model.q_eigs");
        if (static_cast<int>(m.q_eigs.size()) != m.dim)
            throw ConfigError("model.q_eigs length must equal model.dim");
        for (double l : m.q_eigs)
            if (l <= 0.0) throw ConfigError("model.q_eigs entries must be positive");
    } else {
        m.q_eigs.assign(static_cast<std::size_t>(m.dim), 1.0);
    }

    const json& dj = need(mj, "drift", "model");
    std::vector<Expression> drift_exprs;
    for (const auto& s : dj) {
        try {
            drift_exprs.push_back(parse_expression(s.get<std::string>(), m.dim));
        } catch (const ParseError& e) {
            throw ConfigError(std::string("model.drift: ") + e.what());
        }
    }
    if (static_cast<int>(drift_exprs.size()) != m.dim)
        throw ConfigError("model.drift must list one expression per dimension");
    m.drift = drift_from_expressions(std::move(drift_exprs));

    const bool has_sigma = mj.contains("sigma");
    const bool has_c = mj.contains("c");
    if (has_sigma == has_c) throw ConfigError("model must define exactly one of 'sigma' or 'c'");
    const json& field = has_sigma ? mj.at("sigma") : mj.at("c");
    std::vector<std::vector<Expression>> rows;
    for (const auto& row : field) {
        std::vector<Expression> r;
        for (const auto& s : row) {
            try {
                r.push_back(parse_expression(s.get<std::string>(), m.dim));
            } catch (const ParseError& e) {
                throw ConfigError(std::string(has_sigma ? "model.sigma: " : "model.c: ") + e.what());
            }
        }
        if (static_cast<int>(r.size()) != m.dim)
            throw ConfigError("model diffusion field rows must have model.dim entries");
        rows.push_back(std::move(r));
    }
    if (static_cast<int>(rows.size()) != m.dim)
        throw ConfigError("model diffusion field must have model.dim rows");
    if (has_sigma) m.sigma_field = matrix_from_expressions(std::move(rows));
    else m.c_field = matrix_from_expressions(std::move(rows));
    m.clip_negative = mj.value("clip_negative", false);
    m.id = mj.value("id", std::string("custom"));
    return m;
}

SetOracle parse_set(const json& cfg, int dim) {
    const json& sj = need(cfg, "set", "config");
    const std::string kind = need(sj, "kind", "set").get<std::string>();
    if (kind == "orthant") return SetOracle::orthant(sj.value("dim", dim));
    if (kind == "half_space")
        return SetOracle::half_space(to_vec(need(sj, "a", "set"), "set.a"),
                                     need(sj, "c", "set").get<double>());
    if (kind == "ball")
        return SetOracle::ball(to_vec(need(sj, "center", "set"), "set.center"),
                               need(sj, "radius", "set").get<double>());
    if (kind == "sphere")
        return SetOracle::sphere(to_vec(need(sj, "center", "set"), "set.center"),
                                 need(sj, "radius", "set").get<double>());
    if (kind == "polyhedral_cone") {
        std::vector<Vec> facets;
        for (const auto& f : need(sj, "facets", "set")) facets.push_back(to_vec(f, "set.facets"));
        return SetOracle::polyhedral_cone(sj.value("dim", dim), std::move(facets));
    }
    if (kind == "power_graph") return SetOracle::power_graph(need(sj, "p", "set").get<double>());
    if (kind == "whole_space") return SetOracle::whole_space(sj.value("dim", dim));
    throw ConfigError("unknown set kind '" + kind + "'");
}

// ------------------------------------------------------------ check logic

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Verdict worse(Verdict a, Verdict b) {
    if (a == Verdict::Fail || b == Verdict::Fail) return Verdict::Fail;
    if (a == Verdict::Inconclusive || b == Verdict::Inconclusive) return Verdict::Inconclusive;
    return Verdict::Pass;
}

struct CheckOutcome {
    Verdict verdict = Verdict::Pass;
    json details;
};

CheckOutcome do_check_set(const ModelSpec& m, const SetOracle& d, const json& spec,
                          std::uint64_t seed, const ToleranceInfo& tols) {
    const int n_boundary = spec.value("n_boundary", 50);
    const double radius = spec.value("radius", 2.0);
    const CheckReport report = check_set(m, d, n_boundary, seed, tols.set, true, radius);

    CheckOutcome out;
    out.verdict = report.aggregate;
    json& dj = out.details;
    dj["model"] = report.model_id;
    dj["set"] = report.set_id;
    dj["points_checked"] = static_cast<int>(report.points.size());
    dj["aggregate"] = verdict_name(report.aggregate);
    json ranks = json::object();
    for (const auto& [rank, count] : report.rank_profile) ranks[std::to_string(rank)] = count;
    dj["rank_profile"] = ranks;
    dj["fd_step"] = report.fd_step;
    dj["q_tail_fraction"] = report.q_tail_fraction;
    dj["sigma_tail_fraction"] = report.sigma_tail_fraction;
    dj["model_audit"] = {{"max_growth_ratio", report.audit.max_growth_ratio},
                         {"sigma_asymmetry", report.audit.worst_sigma_asymmetry},
                         {"sigma_negative_part", report.audit.worst_sigma_negative},
                         {"c_consistency_gap", report.audit.worst_c_mismatch}};
    if (!report.warnings.empty()) dj["warnings"] = report.warnings;

    json offenders = json::array();
    double worst_kernel = 0.0, worst_drift = -1e300;
    for (const PointVerdict& pv : report.points) {
        for (const NormalCheck& nc : pv.normals) {
            worst_kernel = std::max(worst_kernel, nc.kernel_residual);
            worst_drift = std::max(worst_drift, nc.drift_c);
        }
        if (pv.verdict == Verdict::Fail) {
            json o;
            o["x"] = vec_json(pv.x);
            json normals = json::array();
            for (const NormalCheck& nc : pv.normals) {
                json nj;
                nj["u"] = vec_json(nc.u);
                nj["kernel_residual"] = nc.kernel_residual;
                nj["drift_c"] = nc.drift_c;
                if (nc.drift_sigma) nj["drift_sigma"] = *nc.drift_sigma;
                nj["pass_kernel"] = nc.pass_kernel;
                nj["pass_drift"] = nc.pass_drift;
                normals.push_back(nj);
            }
            o["normals"] = normals;
            offenders.push_back(o);
        }
    }
    dj["worst_kernel_residual"] = worst_kernel;
    dj["worst_drift_value"] = worst_drift == -1e300 ? 0.0 : worst_drift;
    if (!offenders.empty()) dj["offending_points"] = offenders;
    dj["tolerances"] = tols.to_json();
    return out;
}

CheckOutcome do_series_equality(const ModelSpec& m, const SetOracle& d, const json& spec,
                                std::uint64_t seed, const ToleranceInfo& tols) {
    const double tol = spec.value("tol", 5e-5);
    std::vector<Vec> points;
    if (spec.contains("points"))
        for (const auto& p : spec.at("points")) points.push_back(to_vec(p, "series_equality.points"));
    else
        points = d.boundary_samples(spec.value("n_points", 20), seed, spec.value("radius", 2.0));
    if (points.empty()) throw ConfigError("series_equality: no probe points");

    std::optional<Vec> fixed_u;
    if (spec.contains("u")) fixed_u = to_vec(spec.at("u"), "series_equality.u");

    CheckOutcome out;
    json probes = json::array();
    bool all_ok = true;
    double worst = 0.0;
    int kernel_count = 0;
    for (const Vec& x : points) {
        std::vector<Vec> us;
        if (fixed_u) us.push_back(*fixed_u);
        else us = normal_cone_samples(d, x, 2 * m.dim + 2, seed);
        for (const Vec& u : us) {
            const SeriesEqualityResult r = series_equality_check(m, x, u, tols.set);
            json pj;
            pj["x"] = vec_json(x);
            pj["u"] = vec_json(u);
            pj["lhs"] = r.lhs;
            pj["rhs"] = r.rhs;
            pj["residual"] = r.residual;
            pj["u_in_kernel"] = r.u_in_kernel;
            probes.push_back(pj);
            if (r.u_in_kernel) {
                ++kernel_count;
                worst = std::max(worst, r.residual);
                if (r.residual > tol) all_ok = false;
            }
        }
    }
    out.verdict = all_ok ? Verdict::Pass : Verdict::Fail;
    out.details["probes"] = probes;
    out.details["kernel_probes"] = kernel_count;
    out.details["worst_kernel_residual"] = worst;
    out.details["tol"] = {{"value", tol}, {"source", spec.contains("tol") ? "config" : "default"}};
    return out;
}

CheckOutcome do_pmp(const ModelSpec& m, const SetOracle& d, const json& spec, std::uint64_t seed,
                    const ToleranceInfo& tols) {
    TestFunction phi;
    try {
        phi = TestFunction::from_expression(
            parse_expression(need(spec, "phi", "pmp_probe").get<std::string>(), m.dim));
    } catch (const ParseError& e) {
        throw ConfigError(std::string("pmp_probe.phi: ") + e.what());
    }
    PmpConfig cfg;
    cfg.n_samples = spec.value("n_samples", 400);
    cfg.radius = spec.value("radius", 3.0);
    cfg.seed = seed;
    const PmpVerdict v = pmp_probe(m, d, phi, cfg, tols.set);

    CheckOutcome out;
    out.verdict = v.violation ? Verdict::Fail : Verdict::Pass;
    out.details["probed"] = v.probed;
    out.details["phi_max"] = v.phi_max;
    out.details["argmax"] = vec_json(v.argmax);
    if (v.probed) out.details["generator_value"] = v.generator_value;
    out.details["violation"] = v.violation;
    out.details["tol_ineq"] = {{"value", tols.set.tol_ineq}, {"source", tols.source_ineq}};
    return out;
}

void export_trajectories(const PathEnsemble& e, const std::string& path) {
    std::ostringstream os;
    os << "t,path";
    for (int i = 1; i <= e.dim; ++i) os << ",x" << i;
    os << "\n";
    for (int p = 0; p < e.n_paths; ++p)
        for (int k = 0; k < e.n_stored(); ++k) {
            os << format_double(e.time_grid[static_cast<std::size_t>(k)]) << ',' << p;
            const Vec x = e.state(p, k);
            for (double v : x) os << ',' << format_double(v);
            os << "\n";
        }
    atomic_write(path, os.str());
}

CheckOutcome do_simulate(const ModelSpec& m, const SetOracle& d, const json& spec,
                         std::uint64_t seed, const std::string& trajectory_path) {
    SimConfig cfg;
    cfg.h = spec.value("h", 1e-3);
    cfg.T = spec.value("T", 1.0);
    cfg.n_paths = spec.value("n_paths", 1000);
    cfg.store_stride = spec.value("store_stride", 1);
    cfg.band_c = spec.value("band_c", 5.0);
    cfg.seed = seed;
    const Vec x0 = to_vec(need(spec, "x0", "simulate"), "simulate.x0");
    if (static_cast<int>(x0.size()) != m.dim)
        throw ConfigError("simulate.x0 must have model.dim entries");

    const PathEnsemble e = simulate(m, x0, cfg);
    const InvarianceStats stats = invariance_stats(e, d, cfg);

    CheckOutcome out;
    json& dj = out.details;
    dj["h"] = cfg.h;
    dj["T"] = cfg.T;
    dj["n_paths"] = cfg.n_paths;
    dj["band"] = stats.band;
    dj["median_max_violation"] = stats.median_max_violation;
    dj["max_max_violation"] = stats.max_max_violation;
    dj["exceed_frequency"] = stats.exceed_frequency;
    std::int64_t clips = 0, aborted = 0;
    for (std::int64_t c : e.clip_events) clips += c;
    for (std::uint8_t a : e.aborted) aborted += a;
    dj["clip_events"] = clips;
    dj["aborted_paths"] = aborted;

    out.verdict = aborted > 0 ? Verdict::Inconclusive : Verdict::Pass;
    if (spec.contains("assert_exceed_frequency_max")) {
        const double lim = spec.at("assert_exceed_frequency_max").get<double>();
        dj["assert_exceed_frequency_max"] = {{"value", lim}, {"source", "config"}};
        if (stats.exceed_frequency > lim) out.verdict = Verdict::Fail;
    }
    if (spec.contains("assert_violation_threshold")) {
        const double thr = spec.at("assert_violation_threshold").get<double>();
        const double frac_min = spec.value("assert_violation_fraction_min", 1.0);
        int hit = 0;
        for (int p = 0; p < e.n_paths; ++p) {
            double worst = 0.0;
            for (int k = 0; k < e.n_stored(); ++k) worst = std::max(worst, d.distance(e.state(p, k)));
            if (worst >= thr) ++hit;
        }
        const double frac = static_cast<double>(hit) / e.n_paths;
        dj["violation_fraction"] = frac;
        dj["assert_violation_threshold"] = {{"value", thr}, {"source", "config"}};
        if (frac < frac_min) out.verdict = Verdict::Fail;
    }
    if (spec.value("export", false) && !trajectory_path.empty()) {
        export_trajectories(e, trajectory_path);
        dj["trajectories"] = trajectory_path;
    }
    return out;
}

CheckOutcome do_double_integral(const json& spec, std::uint64_t seed) {
    const json& gj = need(spec, "gamma", "double_integral");
    Matrix gamma(static_cast<int>(gj.size()), static_cast<int>(gj.size()));
    for (int i = 0; i < gamma.rows(); ++i) {
        const Vec row = to_vec(gj.at(static_cast<std::size_t>(i)), "double_integral.gamma");
        if (static_cast<int>(row.size()) != gamma.cols())
            throw ConfigError("double_integral.gamma must be square");
        for (int j = 0; j < gamma.cols(); ++j) gamma(i, j) = row[static_cast<std::size_t>(j)];
    }
    const Vec t_list = to_vec(need(spec, "t_list", "double_integral"), "double_integral.t_list");
    const int n_paths = spec.value("n_paths", 20000);
    const double h = spec.value("h", 1e-3);
    const double sigma_level = spec.value("sigma_level", 4.0);

    const std::vector<MomentEstimate> est =
        double_integral_mc(gamma, std::vector<double>(t_list.begin(), t_list.end()), n_paths, h, seed);

    const double gamma_hs2 = gamma.frobenius() * gamma.frobenius();

    CheckOutcome out;
    json rows = json::array();
    bool ok = true;
    for (const MomentEstimate& e : est) {
        const double target = 0.5 * gamma_hs2 * e.t * e.t;
        const double dev = std::abs(e.mean - target);
        json r;
        r["t"] = e.t;
        r["mean_I2"] = e.mean;
        r["std_error"] = e.std_error;
        r["target"] = target;
        r["deviation_sigmas"] = e.std_error > 0.0 ? dev / e.std_error : 0.0;
        rows.push_back(r);
        if (dev > sigma_level * e.std_error) ok = false;
    }
    out.details["estimates"] = rows;
    out.details["sigma_level"] = {{"value", sigma_level},
                                  {"source", spec.contains("sigma_level") ? "config" : "default"}};

    if (spec.contains("delta")) {
        const double delta = spec.at("delta").get<double>();
        const double slope_tol = spec.value("slope_tol", 0.2);
        // least-squares slope of log mean(I^2) against log t
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const MomentEstimate& e : est) {
            const double lx = std::log(e.t), ly = std::log(e.mean);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const double n = static_cast<double>(est.size());
        const double slope_I2 = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double slope = slope_I2 - 2.0 * delta;  // slope of log E[(I_t/t^delta)^2]
        const double expected = 2.0 - 2.0 * delta;
        out.details["delta"] = delta;
        out.details["scaling_slope"] = slope;
        out.details["expected_slope"] = expected;
        out.details["slope_tol"] = {{"value", slope_tol},
                                    {"source", spec.contains("slope_tol") ? "config" : "default"}};
        if (std::abs(slope - expected) > slope_tol) ok = false;
    }
    out.verdict = ok ? Verdict::Pass : Verdict::Fail;
    return out;
}

CheckOutcome do_ode_viability(const SetOracle& d, const json& spec) {
    const json& fj = need(spec, "field", "ode_viability");
    std::vector<Expression> field_exprs;
    const int dim = static_cast<int>(fj.size());
    for (const auto& s : fj) {
        try {
            field_exprs.push_back(parse_expression(s.get<std::string>(), dim));
        } catch (const ParseError& e) {
            throw ConfigError(std::string("ode_viability.field: ") + e.what());
        }
    }
    const Vec x0 = to_vec(need(spec, "x0", "ode_viability"), "ode_viability.x0");
    if (x0.size() != field_exprs.size() || dim != d.dim())
        throw ConfigError("ode_viability: field, x0, and set dimensions must agree");
    const double h = spec.value("h", 1e-3);
    const double T = spec.value("T", 1.0);

    const auto field = [&field_exprs](const Vec& y) {
        Vec out;
        out.reserve(field_exprs.size());
        for (const Expression& e : field_exprs) out.push_back(e.eval(y));
        return out;
    };
    const OdeResult r = ode_viability(field, d, x0, h, T);

    CheckOutcome out;
    out.details["max_distance"] = r.max_distance;
    if (!r.aborted) out.details["final_distance"] = r.final_distance;
    out.details["aborted"] = r.aborted;
    out.verdict = r.aborted ? Verdict::Inconclusive : Verdict::Pass;
    if (spec.contains("assert_max_distance")) {
        const double lim = spec.at("assert_max_distance").get<double>();
        out.details["assert_max_distance"] = {{"value", lim}, {"source", "config"}};
        if (r.aborted || r.max_distance > lim) out.verdict = Verdict::Fail;
    }
    return out;
}

}  // namespace

int run_check(const std::string& config_path, const std::string& out_path,
              const CliOverrides& overrides, std::ostream& log) {
    std::string raw;
    {
        std::ifstream f(config_path, std::ios::binary);
        if (!f) {
            log << "error: cannot read config " << config_path << "\n";
            return kExitConfigError;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        raw = ss.str();
    }

    json cfg;
    Verdict overall = Verdict::Pass;
    json report;
    json timing = json::object();
    try {
        try {
            cfg = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (overrides.threads) omp_set_num_threads(*overrides.threads);

        std::uint64_t seed = cfg.value("seed", 1ull);
        std::string seed_source = cfg.contains("seed") ? "config" : "default";
        if (overrides.seed) {
            seed = *overrides.seed;
            seed_source = "override";
        }
        const ToleranceInfo tols = parse_tolerances(cfg, overrides);

        const ModelSpec model = parse_model(cfg);
        const SetOracle set = parse_set(cfg, model.dim);
        if (set.dim() != model.dim)
            throw ConfigError("set dimension " + std::to_string(set.dim()) +
                              " does not match model.dim " + std::to_string(model.dim));
        std::string trajectory_path;
        if (cfg.contains("output") && cfg.at("output").contains("trajectories"))
            trajectory_path = cfg.at("output").at("trajectories").get<std::string>();

        report["tool"] = {{"name", "sdeinv"}, {"version", tool_version()}};
        report["config_digest"] = "fnv1a:" + fnv1a_hex(raw);
        report["seed"] = {{"value", seed}, {"source", seed_source}};
        report["tolerances"] = tols.to_json();
        report["model"] = model.id;
        report["set"] = set.describe();

        const json& checks = need(cfg, "checks", "config");
        if (!checks.is_array() || checks.empty()) throw ConfigError("config.checks must be a non-empty array");

        json results = json::array();
        for (const auto& spec : checks) {
            const std::string type = need(spec, "type", "checks[]").get<std::string>();
            const auto t0 = std::chrono::steady_clock::now();
            CheckOutcome oc;
            if (type == "check_set") oc = do_check_set(model, set, spec, seed, tols);
            else if (type == "series_equality") oc = do_series_equality(model, set, spec, seed, tols);
            else if (type == "pmp_probe") oc = do_pmp(model, set, spec, seed, tols);
            else if (type == "simulate") oc = do_simulate(model, set, spec, seed, trajectory_path);
            else if (type == "double_integral") oc = do_double_integral(spec, seed);
            else if (type == "ode_viability") oc = do_ode_viability(set, spec);
            else throw ConfigError("unknown check type '" + type + "' in checks[]");
            const auto t1 = std::chrono::steady_clock::now();
            const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

            json entry;
            entry["type"] = type;
            entry["verdict"] = verdict_name(oc.verdict);
            entry["details"] = oc.details;
            results.push_back(entry);
            timing[type + "_" + std::to_string(results.size() - 1)] = ms;
            log << "check " << type << ": " << verdict_name(oc.verdict) << " (" << ms << " ms)\n";
            overall = worse(overall, oc.verdict);
        }
        report["checks"] = results;
        report["overall"] = verdict_name(overall);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitFail;
    }

    if (!out_path.empty()) atomic_write(out_path, report.dump(2) + "\n");
    if (!overrides.timing_out.empty()) atomic_write(overrides.timing_out, timing.dump(2) + "\n");

    switch (overall) {
        case Verdict::Pass: return kExitPass;
        case Verdict::Fail: return kExitFail;
        case Verdict::Inconclusive: return kExitInconclusive;
    }
    return kExitInconclusive;
}

// ------------------------------------------------------------ verify-ops

namespace {

Matrix random_orthogonal(int n, std::uint64_t seed, std::uint32_t tag) {
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = counter_normal(seed, RngStream::TestSuite, tag, static_cast<std::uint32_t>(i),
                                     static_cast<std::uint32_t>(j));
    // Gram-Schmidt on columns
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < j; ++k) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += g(i, j) * g(i, k);
            for (int i = 0; i < n; ++i) g(i, j) -= s * g(i, k);
        }
        double nrm = 0.0;
        for (int i = 0; i < n; ++i) nrm += g(i, j) * g(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) {
            g(j, j) += 1.0;
            nrm = 1.0;
        }
        for (int i = 0; i < n; ++i) g(i, j) /= nrm;
    }
    return g;
}

SymOperator random_psd(int n, int rank, std::uint64_t seed, std::uint32_t tag) {
    const Matrix q = random_orthogonal(n, seed, tag);
    Matrix m(n, n);
    for (int k = 0; k < rank; ++k) {
        const double lambda =
            0.05 + 2.0 * counter_uniform(seed, RngStream::TestSuite, tag + 1000u, static_cast<std::uint32_t>(k), 0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) += lambda * q(i, k) * q(j, k);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    return SymOperator(std::move(m));
}

SymOperator random_symmetric(int n, std::uint64_t seed, std::uint32_t tag) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = counter_normal(seed, RngStream::TestSuite, tag, static_cast<std::uint32_t>(i),
                                            static_cast<std::uint32_t>(j));
            m(i, j) = v;
            m(j, i) = v;
        }
    return SymOperator(std::move(m));
}

VerifySuiteResult suite_penrose(std::uint64_t seed, bool perturb) {
    VerifySuiteResult r;
    r.name = "penrose";
    r.tolerance = 1e-9;
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const int n = 2 + static_cast<int>(counter_uniform(seed, RngStream::TestSuite, 50000u + static_cast<std::uint32_t>(c), 0, 0) * 28);
        const int rank = static_cast<int>(counter_uniform(seed, RngStream::TestSuite, 51000u + static_cast<std::uint32_t>(c), 0, 0) * (n + 1));
        const SymOperator a = random_psd(n, rank, seed, 52000u + static_cast<std::uint32_t>(c) * 7u);
        const SymOperator x = pinv(a);
        double res = penrose_residual(a, x) / (1.0 + a.max_abs());
        if (perturb) res += 10.0 * r.tolerance;
        worst = std::max(worst, res);
        ++r.cases;
    }
    r.worst_residual = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

VerifySuiteResult suite_powers_stormer(std::uint64_t seed, bool perturb) {
    VerifySuiteResult r;
    r.name = "powers_stormer";
    r.tolerance = 1e-10;
    double worst = -1e300;
    for (int c = 0; c < 100; ++c) {
        const int n = 2 + static_cast<int>(counter_uniform(seed, RngStream::TestSuite, 60000u + static_cast<std::uint32_t>(c), 0, 0) * 14);
        const SymOperator t = random_psd(n, n, seed, 61000u + static_cast<std::uint32_t>(c) * 3u);
        const SymOperator s = random_psd(n, std::max(1, n / 2), seed, 62000u + static_cast<std::uint32_t>(c) * 3u);
        const SymOperator st = sqrt_abs(t);
        const SymOperator ss = sqrt_abs(s);
        Matrix diff_sqrt = st.matrix() - ss.matrix();
        const double lhs = diff_sqrt.frobenius() * diff_sqrt.frobenius();
        const SymOperator diff(t.matrix() - s.matrix());
        const double rhs = norms(diff).nuclear;
        double slack = lhs - rhs;
        if (perturb) slack += 10.0 * r.tolerance + 1.0;
        worst = std::max(worst, slack);
        ++r.cases;
    }
    r.worst_residual = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

// PSD pairs keep the |mu|-first ordering (equal to decreasing there); for
// indefinite pairs the Lipschitz bound holds for the decreasing arrangement.
VerifySuiteResult suite_eigenvalue_lipschitz(std::uint64_t seed, bool perturb) {
    VerifySuiteResult r;
    r.name = "eigenvalue_lipschitz";
    r.tolerance = 1e-10;
    double worst = -1e300;
    for (int c = 0; c < 100; ++c) {
        const int n = 2 + static_cast<int>(counter_uniform(seed, RngStream::TestSuite, 70000u + static_cast<std::uint32_t>(c), 0, 0) * 14);
        const bool psd = c % 2 == 0;
        const SymOperator t = psd ? random_psd(n, n, seed, 71000u + static_cast<std::uint32_t>(c) * 3u)
                                  : random_symmetric(n, seed, 71000u + static_cast<std::uint32_t>(c) * 3u);
        const SymOperator s = psd ? random_psd(n, std::max(1, n / 2), seed, 72000u + static_cast<std::uint32_t>(c) * 3u)
                                  : random_symmetric(n, seed, 72000u + static_cast<std::uint32_t>(c) * 3u);
        std::vector<double> et = spectral(t).eigenvalues;
        std::vector<double> es = spectral(s).eigenvalues;
        if (!psd) {
            std::sort(et.rbegin(), et.rend());
            std::sort(es.rbegin(), es.rend());
        }
        double lhs = 0.0;
        for (int k = 0; k < n; ++k)
            lhs += std::abs(et[static_cast<std::size_t>(k)] - es[static_cast<std::size_t>(k)]);
        const SymOperator diff(t.matrix() - s.matrix());
        const double rhs = norms(diff).nuclear;
        double slack = lhs - rhs;
        if (perturb) slack += 10.0 * r.tolerance + 1.0;
        worst = std::max(worst, slack);
        ++r.cases;
    }
    r.worst_residual = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

VerifySuiteResult suite_cone_formulas(std::uint64_t seed, bool perturb) {
    VerifySuiteResult r;
    r.name = "cone_formulas";
    r.tolerance = 1e-7;
    double worst = -1e300;
    for (int n : {2, 3, 4}) {
        const SetOracle d = SetOracle::orthant(n);
        ConeSpec spec;
        spec.dim = n;
        for (int i = 0; i < n; ++i) spec.facets.push_back(scaled(unit_vec(n, i), -1.0));
        const std::vector<Vec> pts = d.boundary_samples(8, seed ^ static_cast<std::uint64_t>(n), 2.0);
        for (const Vec& x : pts) {
            const PointCones pc = cone_cones(spec, x);
            const std::vector<Vec> sampled = normal_cone_samples(d, x, 2 * n);
            // sampled normals lie in the cone generated by the active facets
            for (const Vec& u : sampled) {
                double residual = norm2(u);
                Vec rest = u;
                for (const Vec& g : pc.normal.rays) {
                    const double s = dot(rest, g);
                    if (s > 0.0) rest = axpy(-s, g, rest);
                }
                residual = norm2(rest);
                worst = std::max(worst, residual - 1e-9);
                ++r.cases;
            }
            // polarity: <u, v> <= 0 for tangent directions v
            for (int probe = 0; probe < 25; ++probe) {
                Vec v(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    v[static_cast<std::size_t>(i)] =
                        counter_normal(seed, RngStream::TestSuite, 80000u + static_cast<std::uint64_t>(probe),
                                       static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(i));
                const bool in_tangent = pc.tangent.contains(v, 1e-12);
                const bool est = tangent_test(d, x, v);
                if (in_tangent != est) worst = std::max(worst, 1.0);
                if (in_tangent)
                    for (const Vec& u : sampled) worst = std::max(worst, dot(u, v));
                ++r.cases;
            }
        }
    }
    if (perturb) worst = std::max(worst, 10.0 * r.tolerance + 1.0);
    r.worst_residual = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

VerifySuiteResult suite_series_identities(std::uint64_t seed, bool perturb) {
    VerifySuiteResult r;
    r.name = "series_identities";
    r.tolerance = 1e-8;
    double worst = 0.0;
    const std::vector<ModelSpec> models = {ModelSpec::cir(0.3, 0.1, 0.8),
                                           ModelSpec::linear_sigma(),
                                           ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3})};
    for (const ModelSpec& m : models) {
        for (int c = 0; c < 20; ++c) {
            Vec x(static_cast<std::size_t>(m.dim));
            Vec u(static_cast<std::size_t>(m.dim));
            for (int i = 0; i < m.dim; ++i) {
                x[static_cast<std::size_t>(i)] = 0.2 + counter_uniform(seed, RngStream::TestSuite,
                                                                       90000u + static_cast<std::uint64_t>(c),
                                                                       1, static_cast<std::uint32_t>(i));
                u[static_cast<std::size_t>(i)] = counter_normal(seed, RngStream::TestSuite,
                                                                91000u + static_cast<std::uint64_t>(c), 2,
                                                                static_cast<std::uint32_t>(i));
            }
            const double direct = series_C_direct(m, x, u);
            const double trace = series_C_trace(m, x, u);
            double rel = std::abs(direct - trace) / (1.0 + std::abs(trace));
            if (perturb) rel += 10.0 * r.tolerance;
            worst = std::max(worst, rel);
            ++r.cases;
        }
    }
    r.worst_residual = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

}  // namespace

std::vector<VerifySuiteResult> run_verify_suites(const std::vector<std::string>& names,
                                                 const std::string& negative_control,
                                                 std::uint64_t seed) {
    std::vector<VerifySuiteResult> out;
    for (const std::string& name : names) {
        const bool perturb = name == negative_control;
        if (name == "penrose") out.push_back(suite_penrose(seed, perturb));
        else if (name == "powers_stormer") out.push_back(suite_powers_stormer(seed, perturb));
        else if (name == "eigenvalue_lipschitz") out.push_back(suite_eigenvalue_lipschitz(seed, perturb));
        else if (name == "cone_formulas") out.push_back(suite_cone_formulas(seed, perturb));
        else if (name == "series_identities") out.push_back(suite_series_identities(seed, perturb));
        else throw ConfigError("unknown verify suite '" + name + "'");
    }
    return out;
}

int run_verify_ops(const std::vector<std::string>& names, const std::string& negative_control,
                   const std::string& out_path, std::uint64_t seed, std::ostream& log) {
    std::vector<std::string> selected = names;
    if (selected.empty())
        selected = {"penrose", "powers_stormer", "eigenvalue_lipschitz", "cone_formulas",
                    "series_identities"};

    std::vector<VerifySuiteResult> results;
    try {
        results = run_verify_suites(selected, negative_control, seed);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (results.empty()) {
        log << "config error: empty suite selection\n";
        return kExitConfigError;
    }

    json report;
    report["tool"] = {{"name", "sdeinv"}, {"version", tool_version()}};
    report["seed"] = seed;
    json suites = json::array();
    bool all_pass = true;
    for (const VerifySuiteResult& r : results) {
        json s;
        s["name"] = r.name;
        s["pass"] = r.pass;
        s["cases"] = r.cases;
        s["worst_residual"] = r.worst_residual;
        s["tolerance"] = {{"value", r.tolerance}, {"source", "default"}};
        suites.push_back(s);
        all_pass = all_pass && r.pass;
        log << "suite " << r.name << ": " << (r.pass ? "pass" : "fail") << " (" << r.cases
            << " cases, worst residual " << r.worst_residual << ")\n";
    }
    report["suites"] = suites;
    report["overall"] = all_pass ? "pass" : "fail";
    if (!out_path.empty()) atomic_write(out_path, report.dump(2) + "\n");
    return all_pass ? kExitPass : kExitFail;
}

}  // namespace sdeinv
