#include "sdeinv/invariance.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdeinv/rng.hpp"

namespace sdeinv {

namespace {

Vec positive_part(const Vec& x) {
    Vec y = x;
    for (double& v : y) v = std::max(v, 0.0);
    return y;
}

double fd_scale(const Vec& x, const ToleranceSet& tols) { return tols.fd_step * (1.0 + norm2(x)); }

}  // namespace

Vec ModelSpec::drift_at(const Vec& x) const {
    Vec b = drift ? drift(x) : Vec(x.size(), 0.0);
    if (!all_finite(b)) throw std::runtime_error("drift evaluation produced non-finite values");
    return b;
}

Matrix ModelSpec::sigma_at(const Vec& x) const {
    const Vec& xe = clip_negative ? positive_part(x) : x;
    if (sigma_field) {
        Matrix s = sigma_field(clip_negative ? xe : x);
        if (!all_finite(s)) throw std::runtime_error("sigma evaluation produced non-finite values");
        return s;
    }
    if (c_field) return sqrt_abs(SymOperator(c_field(x))).matrix();
    throw std::logic_error("ModelSpec: no diffusion field configured");
}

Matrix ModelSpec::c_at(const Vec& x) const {
    if (c_field) {
        Matrix c = c_field(x);
        if (!all_finite(c)) throw std::runtime_error("dispersion evaluation produced non-finite values");
        return c;
    }
    if (sigma_field) {
        const Matrix s = sigma_at(x);
        Matrix c = s * s.transposed();
        for (int i = 0; i < c.rows(); ++i)  // kill roundoff asymmetry
            for (int j = i + 1; j < c.cols(); ++j) {
                const double v = 0.5 * (c(i, j) + c(j, i));
                c(i, j) = v;
                c(j, i) = v;
            }
        return c;
    }
    throw std::logic_error("ModelSpec: no diffusion field configured");
}

ModelSpec ModelSpec::cir(double a, double b, double sigma0) {
    ModelSpec m;
    m.dim = 1;
    m.q_eigs = {1.0};
    m.drift = [a, b](const Vec& x) { return Vec{a - b * x[0]}; };
    m.sigma_field = [sigma0](const Vec& x) {
        Matrix s(1, 1);
        s(0, 0) = sigma0 * std::sqrt(std::max(x[0], 0.0));
        return s;
    };
    // smooth dispersion extension: sigma0^2 * x, negative off the half line
    m.c_field = [sigma0](const Vec& x) {
        Matrix c(1, 1);
        c(0, 0) = sigma0 * sigma0 * x[0];
        return c;
    };
    m.clip_negative = true;
    m.id = "cir";
    return m;
}

ModelSpec ModelSpec::ou(double theta, double mu, double sigma0) {
    ModelSpec m;
    m.dim = 1;
    m.q_eigs = {1.0};
    m.drift = [theta, mu](const Vec& x) { return Vec{theta * (mu - x[0])}; };
    m.sigma_field = [sigma0](const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = sigma0;
        return s;
    };
    m.c_field = [sigma0](const Vec&) {
        Matrix c(1, 1);
        c(0, 0) = sigma0 * sigma0;
        return c;
    };
    m.id = "ou";
    return m;
}

ModelSpec ModelSpec::linear_sigma() {
    ModelSpec m;
    m.dim = 1;
    m.q_eigs = {1.0};
    m.drift = [](const Vec& x) { return Vec(x.size(), 0.0); };
    m.sigma_field = [](const Vec& x) {
        Matrix s(1, 1);
        s(0, 0) = x[0];
        return s;
    };
    m.c_field = [](const Vec& x) {
        Matrix c(1, 1);
        c(0, 0) = x[0] * x[0];
        return c;
    };
    m.id = "linear_sigma";
    return m;
}

ModelSpec ModelSpec::orthant_diag(Vec rates, Vec drift0) {
    if (rates.size() != drift0.size()) throw std::invalid_argument("orthant_diag: size mismatch");
    ModelSpec m;
    m.dim = static_cast<int>(rates.size());
    m.q_eigs.assign(rates.size(), 1.0);
    m.drift = [drift0](const Vec&) { return drift0; };
    m.sigma_field = [rates](const Vec& x) {
        Matrix s(static_cast<int>(rates.size()), static_cast<int>(rates.size()));
        for (int i = 0; i < s.rows(); ++i) s(i, i) = rates[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        return s;
    };
    m.c_field = [rates](const Vec& x) {
        Matrix c(static_cast<int>(rates.size()), static_cast<int>(rates.size()));
        for (int i = 0; i < c.rows(); ++i) {
            const double v = rates[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
            c(i, i) = v * v;
        }
        return c;
    };
    m.id = "orthant_diag";
    return m;
}

TestFunction TestFunction::from_expression(const Expression& e) {
    TestFunction f;
    f.value = [e](const Vec& x) { return e.eval(x); };
    return f;
}

SymOperator dispersion(const ModelSpec& m, const Vec& x) { return SymOperator(m.c_at(x)); }

ModelAudit audit_model(const ModelSpec& m, const std::vector<Vec>& points) {
    ModelAudit a;
    for (const Vec& x : points) {
        const Vec b = m.drift_at(x);
        const Matrix s = m.sigma_at(x);
        a.max_growth_ratio =
            std::max(a.max_growth_ratio, (norm2(b) + s.frobenius()) / (1.0 + norm2(x)));
        a.worst_sigma_asymmetry =
            std::max(a.worst_sigma_asymmetry, (s - s.transposed()).max_abs());
        Matrix sym = s;
        for (int i = 0; i < sym.rows(); ++i)
            for (int j = i + 1; j < sym.cols(); ++j) {
                const double v = 0.5 * (sym(i, j) + sym(j, i));
                sym(i, j) = v;
                sym(j, i) = v;
            }
        const SpectralDecomp d = spectral(SymOperator(std::move(sym)));
        for (double mu : d.eigenvalues)
            a.worst_sigma_negative = std::max(a.worst_sigma_negative, -mu);
        if (m.has_sigma() && m.has_c()) {
            const Matrix c = m.c_field(x);
            a.worst_c_mismatch = std::max(
                a.worst_c_mismatch, (s * s.transposed() - c).max_abs() / (1.0 + c.max_abs()));
        }
    }
    return a;
}

double generator_apply(const ModelSpec& m, const TestFunction& phi, const Vec& x,
                       const ToleranceSet& tols) {
    const int n = m.dim;
    const double h = fd_scale(x, tols);

    Vec grad;
    if (phi.gradient) {
        grad = phi.gradient(x);
    } else {
        grad.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            Vec xp = x, xm = x;
            xp[static_cast<std::size_t>(i)] += h;
            xm[static_cast<std::size_t>(i)] -= h;
            grad[static_cast<std::size_t>(i)] = (phi.value(xp) - phi.value(xm)) / (2.0 * h);
        }
    }

    Matrix hess(n, n);
    if (phi.hessian) {
        hess = phi.hessian(x);
    } else {
        const double f0 = phi.value(x);
        for (int i = 0; i < n; ++i) {
            Vec xp = x, xm = x;
            xp[static_cast<std::size_t>(i)] += h;
            xm[static_cast<std::size_t>(i)] -= h;
            hess(i, i) = (phi.value(xp) - 2.0 * f0 + phi.value(xm)) / (h * h);
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Vec xpp = x, xpm = x, xmp = x, xmm = x;
                xpp[static_cast<std::size_t>(i)] += h;
                xpp[static_cast<std::size_t>(j)] += h;
                xpm[static_cast<std::size_t>(i)] += h;
                xpm[static_cast<std::size_t>(j)] -= h;
                xmp[static_cast<std::size_t>(i)] -= h;
                xmp[static_cast<std::size_t>(j)] += h;
                xmm[static_cast<std::size_t>(i)] -= h;
                xmm[static_cast<std::size_t>(j)] -= h;
                const double v =
                    (phi.value(xpp) - phi.value(xpm) - phi.value(xmp) + phi.value(xmm)) / (4.0 * h * h);
                hess(i, j) = v;
                hess(j, i) = v;
            }
    }

    const Vec b = m.drift_at(x);
    const Matrix c = m.c_at(x);
    double trace = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) trace += hess(i, j) * c(j, i);
    const double value = dot(grad, b) + 0.5 * trace;
    if (!std::isfinite(value)) throw std::runtime_error("generator_apply: finite differences produced non-finite value");
    return value;
}

namespace {

// Jacobian of the vector field y -> C(y) u, by central differences.
Matrix jacobian_of_Cu(const ModelSpec& m, const Vec& x, const Vec& u, double h) {
    const int n = m.dim;
    Matrix j(n, n);
    for (int k = 0; k < n; ++k) {
        Vec xp = x, xm = x;
        xp[static_cast<std::size_t>(k)] += h;
        xm[static_cast<std::size_t>(k)] -= h;
        const Vec gp = m.c_at(xp).apply(u);
        const Vec gm = m.c_at(xm).apply(u);
        for (int i = 0; i < n; ++i)
            j(i, k) = (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) / (2.0 * h);
    }
    return j;
}

Matrix range_projector(const ModelSpec& m, const Vec& x, const ToleranceSet& tols) {
    const SymOperator c = dispersion(m, x);
    return (c.matrix() * pinv(c, tols.rank_tol).matrix());
}

}  // namespace

double series_C_trace_projected(const ModelSpec& m, const Vec& x, const Vec& u,
                                const Matrix& p, const ToleranceSet& tols) {
    if (norm2(u) == 0.0) return 0.0;
    if (p.max_abs() <= tols.rank_tol) return 0.0;  // projection vanishes: series is exactly zero
    const Matrix j = jacobian_of_Cu(m, x, u, fd_scale(x, tols));
    double trace = 0.0;
    for (int i = 0; i < m.dim; ++i)
        for (int k = 0; k < m.dim; ++k) trace += j(i, k) * p(k, i);
    return trace;
}

double series_C_trace(const ModelSpec& m, const Vec& x, const Vec& u, const ToleranceSet& tols) {
    if (norm2(u) == 0.0) return 0.0;
    return series_C_trace_projected(m, x, u, range_projector(m, x, tols), tols);
}

double series_C_direct(const ModelSpec& m, const Vec& x, const Vec& u, const ToleranceSet& tols) {
    if (norm2(u) == 0.0) return 0.0;
    const Matrix p = range_projector(m, x, tols);
    const int n = m.dim;
    double acc = 0.0;
    for (int jcol = 0; jcol < n; ++jcol) {
        const Vec pj = p.column(jcol);
        const double npj = norm2(pj);
        if (npj <= tols.rank_tol) continue;
        const double eps = fd_scale(x, tols) / std::max(1.0, npj);
        const Vec cp = m.c_at(axpy(eps, pj, x)).column(jcol);
        const Vec cm = m.c_at(axpy(-eps, pj, x)).column(jcol);
        for (int i = 0; i < n; ++i)
            acc += u[static_cast<std::size_t>(i)] *
                   (cp[static_cast<std::size_t>(i)] - cm[static_cast<std::size_t>(i)]) / (2.0 * eps);
    }
    return acc;
}

double series_sigma(const ModelSpec& m, const Vec& x, const Vec& u, const ToleranceSet& tols) {
    if (!m.has_sigma())
        throw std::logic_error("series_sigma: model has no sigma field");
    if (norm2(u) == 0.0) return 0.0;
    const Matrix s = m.sigma_at(x);
    const int n = m.dim;
    double acc = 0.0;
    for (int jcol = 0; jcol < n; ++jcol) {
        const Vec sj = s.column(jcol);
        const double nsj = norm2(sj);
        if (nsj == 0.0) continue;
        const double eps = fd_scale(x, tols) / std::max(1.0, nsj);
        const Vec sp = m.sigma_at(axpy(eps, sj, x)).column(jcol);
        const Vec sm = m.sigma_at(axpy(-eps, sj, x)).column(jcol);
        for (int i = 0; i < n; ++i)
            acc += u[static_cast<std::size_t>(i)] *
                   (sp[static_cast<std::size_t>(i)] - sm[static_cast<std::size_t>(i)]) / (2.0 * eps);
    }
    return acc;
}

double corrected_drift_C(const ModelSpec& m, const Vec& x, const Vec& u, const ToleranceSet& tols) {
    if (norm2(u) == 0.0) return 0.0;
    return dot(u, m.drift_at(x)) - 0.5 * series_C_trace(m, x, u, tols);
}

double corrected_drift_sigma(const ModelSpec& m, const Vec& x, const Vec& u,
                             const ToleranceSet& tols) {
    if (norm2(u) == 0.0) return 0.0;
    return dot(u, m.drift_at(x)) - 0.5 * series_sigma(m, x, u, tols);
}

SeriesEqualityResult series_equality_check(const ModelSpec& m, const Vec& x, const Vec& u,
                                           const ToleranceSet& tols) {
    SeriesEqualityResult r;
    r.lhs = series_C_trace(m, x, u, tols);
    r.rhs = series_sigma(m, x, u, tols);
    r.residual = std::abs(r.lhs - r.rhs);
    const Matrix st = m.sigma_at(x).transposed();
    const double kernel_norm = norm2(st.apply(u));
    r.u_in_kernel = kernel_norm <= tols.tol_eq * (1.0 + st.max_abs()) * std::max(norm2(u), 1.0);
    return r;
}

double second_order_check(const ModelSpec& m, const Vec& x, const NormalPair& pair) {
    const Matrix c = m.c_at(x);
    double trace = 0.0;
    for (int i = 0; i < m.dim; ++i)
        for (int j = 0; j < m.dim; ++j) trace += pair.v(i, j) * c(j, i);
    return dot(pair.u, m.drift_at(x)) + 0.5 * trace;
}

PmpVerdict pmp_probe(const ModelSpec& m, const SetOracle& d, const TestFunction& phi,
                     const PmpConfig& cfg, const ToleranceSet& tols) {
    PmpVerdict v;
    std::vector<Vec> pool = d.boundary_samples(cfg.n_samples / 2, cfg.seed ^ 0x7177u, cfg.radius);
    for (int i = 0; i < cfg.n_samples; ++i) {
        Vec g(static_cast<std::size_t>(d.dim()));
        for (int k = 0; k < d.dim(); ++k)
            g[static_cast<std::size_t>(k)] = counter_normal(cfg.seed, RngStream::PmpSearch,
                                                            static_cast<std::uint64_t>(i), 0,
                                                            static_cast<std::uint32_t>(k));
        try {
            pool.push_back(d.project(scaled(g, cfg.radius)));
        } catch (const std::runtime_error&) {
        }
    }
    if (pool.empty()) throw std::runtime_error("pmp_probe: no set points sampled");

    Vec best;
    double best_phi = -1e300;
    for (const Vec& y : pool) {
        const double p = phi.value(y);
        if (p > best_phi) {
            best_phi = p;
            best = y;
        }
    }
    // coordinate pattern refinement, projected back onto the set
    double step = 0.25 * (1.0 + norm2(best));
    for (int it = 0; it < cfg.refine_iters; ++it) {
        bool improved = false;
        for (int k = 0; k < d.dim(); ++k) {
            for (double s : {step, -step}) {
                Vec y = best;
                y[static_cast<std::size_t>(k)] += s;
                y = d.project(y);
                const double p = phi.value(y);
                if (p > best_phi + 1e-15) {
                    best_phi = p;
                    best = y;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
        if (step < 1e-10) break;
    }

    v.phi_max = best_phi;
    v.argmax = best;
    if (best_phi < 0.0) return v;  // vacuous: no nonnegative maximum found
    v.probed = true;
    v.generator_value = generator_apply(m, phi, best, tols);
    v.violation = v.generator_value > tols.tol_ineq;
    return v;
}

PointVerdict check_point(const ModelSpec& m, const SetOracle& d, const Vec& x,
                         const std::vector<Vec>* normals, const ToleranceSet& tols,
                         std::uint64_t seed) {
    PointVerdict pv;
    pv.x = x;

    const SymOperator c = dispersion(m, x);
    const SpectralDecomp spec = spectral(c);
    pv.rank_c = spec.rank(tols.rank_tol);
    double mx = 0.0;
    for (double mu : spec.eigenvalues) mx = std::max(mx, std::abs(mu));
    if (mx > 0.0) {
        const double cut = tols.rank_tol * mx;
        for (double mu : spec.eigenvalues) {
            const double a = std::abs(mu);
            if (a >= 0.2 * cut && a <= 5.0 * cut) pv.rank_ambiguous = true;
        }
    }

    std::vector<Vec> ns;
    if (normals) ns = *normals;
    else ns = normal_cone_samples(d, x, 2 * m.dim + 4, seed);

    if (ns.empty()) {
        pv.vacuous = true;
        pv.verdict = pv.rank_ambiguous ? Verdict::Inconclusive : Verdict::Pass;
        return pv;
    }

    const double c_norm = c.max_abs();
    bool all_pass = true;
    for (const Vec& u : ns) {
        NormalCheck nc;
        nc.u = u;
        nc.kernel_residual = norm2(c.apply(u));
        nc.pass_kernel = nc.kernel_residual <= tols.tol_eq * (1.0 + c_norm) * std::max(norm2(u), 1.0);
        nc.drift_c = corrected_drift_C(m, x, u, tols);
        nc.pass_drift = nc.drift_c <= tols.tol_ineq;
        if (m.has_sigma()) {
            nc.drift_sigma = corrected_drift_sigma(m, x, u, tols);
            if (*nc.drift_sigma > tols.tol_ineq) nc.pass_drift = false;
        }
        if (m.tangent_field && m.has_sigma()) {
            // curvature form of the drift condition through the configured
            // tangent field: each diffusion column is matched against tau
            const Vec tau = m.tangent_field(x);
            const double nt2 = dot(tau, tau);
            const Matrix s = m.sigma_at(x);
            double acc = dot(u, m.drift_at(x));
            if (nt2 > 0.0) {
                for (int j = 0; j < m.dim; ++j) {
                    const Vec sj = s.column(j);
                    const double align = dot(sj, tau) / nt2;
                    if (align == 0.0) continue;
                    acc += 0.5 * align * curvature(m.tangent_field, x, u, sj, tols.fd_step);
                }
            }
            nc.drift_curvature = acc;
        }
        all_pass = all_pass && nc.pass_kernel && nc.pass_drift;
        pv.normals.push_back(std::move(nc));
    }
    pv.verdict = !all_pass ? Verdict::Fail
                           : (pv.rank_ambiguous ? Verdict::Inconclusive : Verdict::Pass);
    return pv;
}

CheckReport check_set(const ModelSpec& m, const SetOracle& d, int n_boundary, std::uint64_t seed,
                      const ToleranceSet& tols, bool parallel, double sample_radius) {
    CheckReport report;
    report.model_id = m.id;
    report.set_id = d.describe();
    report.fd_step = tols.fd_step;

    double q_total = 0.0;
    for (double l : m.q_eigs) q_total += l;
    if (!m.q_eigs.empty() && q_total > 0.0) report.q_tail_fraction = m.q_eigs.back() / q_total;

    const std::vector<Vec> samples = d.boundary_samples(n_boundary, seed, sample_radius);
    if (samples.empty()) {
        report.aggregate = Verdict::Pass;
        report.warnings.push_back("no boundary samples: invariance conditions hold vacuously");
        return report;
    }

    const int count = static_cast<int>(samples.size());
    report.points.resize(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < count; ++i) {
        try {
            report.points[static_cast<std::size_t>(i)] =
                check_point(m, d, samples[static_cast<std::size_t>(i)], nullptr, tols, seed);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }

    // deterministic aggregation in sample order
    bool any_fail = false, any_inconclusive = false;
    double sigma_tail = 0.0;
    for (int i = 0; i < count; ++i) {
        const auto& err = errors[static_cast<std::size_t>(i)];
        PointVerdict& pv = report.points[static_cast<std::size_t>(i)];
        if (!err.empty()) {
            pv.verdict = Verdict::Inconclusive;
            report.warnings.push_back("point " + std::to_string(i) + ": " + err);
        }
        any_fail = any_fail || pv.verdict == Verdict::Fail;
        any_inconclusive = any_inconclusive || pv.verdict == Verdict::Inconclusive;
        ++report.rank_profile[pv.rank_c];
        if (m.has_sigma() && err.empty()) {
            const Matrix s = m.sigma_at(pv.x);
            double total = 0.0, top = 0.0;
            for (int j = 0; j < m.dim; ++j) {
                const double w = dot(s.column(j), s.column(j));
                total += w;
                if (j == m.dim - 1) top = w;
            }
            if (total > 0.0) sigma_tail = std::max(sigma_tail, top / total);
        }
    }
    report.sigma_tail_fraction = sigma_tail;
    try {
        report.audit = audit_model(m, samples);
    } catch (const std::exception& e) {
        report.warnings.push_back(std::string("model audit: ") + e.what());
    }
    report.aggregate = any_fail ? Verdict::Fail
                                : (any_inconclusive ? Verdict::Inconclusive : Verdict::Pass);
    return report;
}

}  // namespace sdeinv
