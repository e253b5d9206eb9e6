#include "sdeinv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdeinv/rng.hpp"

namespace sdeinv {

namespace {

Vec gaussian_probe(int dim, std::uint64_t seed, std::uint64_t index, std::uint32_t step) {
    Vec g(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
        g[static_cast<std::size_t>(i)] =
            counter_normal(seed, RngStream::GeometryProbe, index, step, static_cast<std::uint32_t>(i));
    return g;
}

Vec orthonormal_residual(const Vec& v, const std::vector<Vec>& basis) {
    Vec r = v;
    for (const Vec& b : basis) r = axpy(-dot(r, b), b, r);
    return r;
}

}  // namespace

// ---------------------------------------------------------------- SetOracle

SetOracle SetOracle::orthant(int dim) {
    SetOracle s;
    s.kind_ = Kind::Orthant;
    s.dim_ = dim;
    s.describe_ = "orthant(" + std::to_string(dim) + ")";
    return s;
}

SetOracle SetOracle::half_space(Vec a, double c) {
    if (norm2(a) == 0.0) throw std::invalid_argument("half_space: zero normal");
    SetOracle s;
    s.kind_ = Kind::HalfSpace;
    s.dim_ = static_cast<int>(a.size());
    s.a_ = std::move(a);
    s.c_ = c;
    s.describe_ = "half_space";
    return s;
}

SetOracle SetOracle::ball(Vec center, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("ball: radius must be positive");
    SetOracle s;
    s.kind_ = Kind::Ball;
    s.dim_ = static_cast<int>(center.size());
    s.a_ = std::move(center);
    s.c_ = radius;
    s.describe_ = "ball";
    return s;
}

SetOracle SetOracle::sphere(Vec center, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("sphere: radius must be positive");
    SetOracle s;
    s.kind_ = Kind::Sphere;
    s.dim_ = static_cast<int>(center.size());
    s.a_ = std::move(center);
    s.c_ = radius;
    s.describe_ = "sphere";
    return s;
}

SetOracle SetOracle::polyhedral_cone(int dim, std::vector<Vec> facet_normals) {
    SetOracle s;
    s.kind_ = Kind::PolyhedralCone;
    s.dim_ = dim;
    s.facets_ = std::move(facet_normals);
    for (const Vec& n : s.facets_)
        if (static_cast<int>(n.size()) != dim || norm2(n) == 0.0)
            throw std::invalid_argument("polyhedral_cone: bad facet normal");
    s.describe_ = "polyhedral_cone(" + std::to_string(s.facets_.size()) + " facets)";
    return s;
}

SetOracle SetOracle::power_graph(double p) {
    if (p <= 1.0) throw std::invalid_argument("power_graph: exponent must exceed 1");
    SetOracle s;
    s.kind_ = Kind::PowerGraph;
    s.dim_ = 2;
    s.c_ = p;
    s.describe_ = "power_graph(" + std::to_string(p) + ")";
    return s;
}

SetOracle SetOracle::whole_space(int dim) {
    SetOracle s;
    s.kind_ = Kind::WholeSpace;
    s.dim_ = dim;
    s.describe_ = "whole_space(" + std::to_string(dim) + ")";
    return s;
}

SetOracle SetOracle::custom(int dim, MembershipFn member, DistanceFn dist, ProjectFn proj) {
    if (!member) throw std::invalid_argument("custom set: membership callback required");
    SetOracle s;
    s.kind_ = Kind::Custom;
    s.dim_ = dim;
    s.member_ = std::move(member);
    s.dist_ = std::move(dist);
    s.proj_ = std::move(proj);
    s.describe_ = "custom";
    return s;
}

bool SetOracle::contains(const Vec& x, double tol) const {
    if (kind_ == Kind::Custom && !dist_ && !proj_) return member_(x);
    return distance(x) <= tol;
}

double SetOracle::distance(const Vec& x) const {
    switch (kind_) {
        case Kind::Orthant: {
            double s = 0.0;
            for (double v : x) s += v < 0.0 ? v * v : 0.0;
            return std::sqrt(s);
        }
        case Kind::HalfSpace: {
            const double slack = c_ - dot(a_, x);
            return slack > 0.0 ? slack / norm2(a_) : 0.0;
        }
        case Kind::Ball: {
            const double r = norm2(axpy(-1.0, a_, x));
            return r > c_ ? r - c_ : 0.0;
        }
        case Kind::Sphere:
            return std::abs(norm2(axpy(-1.0, a_, x)) - c_);
        case Kind::WholeSpace:
            return 0.0;
        case Kind::PolyhedralCone:
        case Kind::PowerGraph:
        case Kind::Custom: {
            if (kind_ == Kind::Custom && dist_) return dist_(x);
            const Vec p = project(x);
            return norm2(axpy(-1.0, p, x));
        }
    }
    return 0.0;
}

Vec SetOracle::project(const Vec& x) const {
    switch (kind_) {
        case Kind::Orthant: {
            Vec p = x;
            for (double& v : p) v = std::max(v, 0.0);
            return p;
        }
        case Kind::HalfSpace: {
            const double slack = c_ - dot(a_, x);
            if (slack <= 0.0) return x;
            return axpy(slack / dot(a_, a_), a_, x);
        }
        case Kind::Ball: {
            Vec d = axpy(-1.0, a_, x);
            const double r = norm2(d);
            if (r <= c_) return x;
            return axpy(c_ / r, d, a_);
        }
        case Kind::Sphere: {
            Vec d = axpy(-1.0, a_, x);
            const double r = norm2(d);
            if (r == 0.0) {
                Vec p = a_;
                p[0] += c_;
                return p;
            }
            return axpy(c_ / r, d, a_);
        }
        case Kind::WholeSpace:
            return x;
        case Kind::PolyhedralCone:
            return project_polyhedral(x);
        case Kind::PowerGraph:
            return project_power_graph(x);
        case Kind::Custom:
            return project_custom(x);
    }
    return x;
}

// 1-D minimization of |(x1,x2)-(s,|s|^p)| per sign branch: grid scan, then
// golden-section refinement of the best cell to width 1e-10.
Vec SetOracle::project_power_graph(const Vec& x) const {
    const double p = c_;
    const auto cost = [&](double s) {
        const double g = std::pow(std::abs(s), p);
        const double dx = x[0] - s, dy = x[1] - g;
        return dx * dx + dy * dy;
    };
    const double bound = 2.0 + 2.0 * (std::abs(x[0]) + std::pow(std::abs(x[1]) + 1.0, 1.0 / p));

    double best_s = 0.0, best_f = cost(0.0);
    const int grid = 600;
    for (int side = -1; side <= 1; side += 2) {
        for (int i = 1; i <= grid; ++i) {
            const double s = side * bound * i / grid;
            const double f = cost(s);
            if (f < best_f) {
                best_f = f;
                best_s = s;
            }
        }
    }
    double lo = best_s - bound / grid, hi = best_s + bound / grid;
    // keep the cusp at 0 out of the bracket interior
    if (lo < 0.0 && hi > 0.0) (best_s >= 0.0 ? lo : hi) = 0.0;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = hi - invphi * (hi - lo), c2 = lo + invphi * (hi - lo);
    double f1 = cost(c1), f2 = cost(c2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - invphi * (hi - lo);
            f1 = cost(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + invphi * (hi - lo);
            f2 = cost(c2);
        }
    }
    double s = 0.5 * (lo + hi);
    if (cost(0.0) <= cost(s)) s = 0.0;
    return Vec{s, std::pow(std::abs(s), p)};
}

// Dykstra's alternating projections over the facet halfspaces.
Vec SetOracle::project_polyhedral(const Vec& x) const {
    const std::size_t m = facets_.size();
    Vec y = x;
    std::vector<Vec> corr(m, Vec(x.size(), 0.0));
    const double scale = 1.0 + norm2(x);
    for (int iter = 0; iter < 20000; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            Vec z = axpy(1.0, corr[i], y);
            const Vec& n = facets_[i];
            const double viol = dot(n, z);
            Vec pz = viol > 0.0 ? axpy(-viol / dot(n, n), n, z) : z;
            for (std::size_t k = 0; k < y.size(); ++k) {
                corr[i][k] = z[k] - pz[k];
                moved = std::max(moved, std::abs(pz[k] - y[k]));
                y[k] = pz[k];
            }
        }
        if (moved <= 1e-14 * scale) break;
    }
    return y;
}

// Feasible-point descent: shrinking random probes around the current best.
Vec SetOracle::project_custom(const Vec& x) const {
    if (proj_) return proj_(x);
    if (member_(x)) return x;
    const int n = dim_;
    Vec best;
    double best_d = 0.0;
    bool found = false;
    double radius = 1.0 + norm2(x);
    // find any feasible point
    for (int round = 0; round < 8 && !found; ++round) {
        for (int i = 0; i < 256; ++i) {
            Vec z = axpy(radius, gaussian_probe(n, 0x9E37u, static_cast<std::uint64_t>(i), static_cast<std::uint32_t>(round)), x);
            if (member_(z)) {
                best = z;
                best_d = norm2(axpy(-1.0, x, z));
                found = true;
                break;
            }
        }
        radius *= 2.0;
    }
    if (!found)
        throw std::runtime_error("custom set projection: no feasible point found near query");
    double step = best_d;
    std::uint64_t k = 0;
    while (step > 1e-9 * (1.0 + best_d)) {
        bool improved = false;
        for (int i = 0; i < 64; ++i) {
            Vec z = axpy(step, gaussian_probe(n, 0xA5A5u, k++, 0), best);
            if (!member_(z)) continue;
            const double dz = norm2(axpy(-1.0, x, z));
            if (dz < best_d) {
                best = z;
                best_d = dz;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    return best;
}

bool SetOracle::has_analytic_normals() const { return kind_ != Kind::Custom; }

std::vector<Vec> SetOracle::analytic_normal_generators(const Vec& x, double active_tol) const {
    const double scale = 1.0 + norm2(x);
    std::vector<Vec> out;
    switch (kind_) {
        case Kind::Orthant: {
            for (int i = 0; i < dim_; ++i)
                if (std::abs(x[static_cast<std::size_t>(i)]) <= active_tol * scale)
                    out.push_back(scaled(unit_vec(dim_, i), -1.0));
            return out;
        }
        case Kind::HalfSpace: {
            if (std::abs(dot(a_, x) - c_) <= active_tol * scale * norm2(a_))
                out.push_back(scaled(a_, -1.0 / norm2(a_)));
            return out;
        }
        case Kind::Ball: {
            Vec d = axpy(-1.0, a_, x);
            const double r = norm2(d);
            if (std::abs(r - c_) <= active_tol * scale && r > 0.0) out.push_back(scaled(d, 1.0 / r));
            return out;
        }
        case Kind::Sphere: {
            Vec d = axpy(-1.0, a_, x);
            const double r = norm2(d);
            if (r > 0.0) {
                out.push_back(scaled(d, 1.0 / r));
                out.push_back(scaled(d, -1.0 / r));
            }
            return out;
        }
        case Kind::PolyhedralCone: {
            for (const Vec& n : facets_)
                if (std::abs(dot(n, x)) <= active_tol * scale * norm2(n))
                    out.push_back(scaled(n, 1.0 / norm2(n)));
            return out;
        }
        case Kind::PowerGraph: {
            const double p = c_;
            const double s = x[0];
            if (std::abs(s) <= active_tol) {
                out.push_back(Vec{0.0, -1.0});  // the cusp admits only the downward normal
            } else {
                const double slope = p * std::pow(std::abs(s), p - 1.0) * (s < 0.0 ? -1.0 : 1.0);
                const double nrm = std::sqrt(1.0 + slope * slope);
                out.push_back(Vec{-slope / nrm, 1.0 / nrm});
                out.push_back(Vec{slope / nrm, -1.0 / nrm});
            }
            return out;
        }
        case Kind::WholeSpace:
            return out;
        case Kind::Custom:
            throw std::logic_error("analytic_normal_generators: custom set has no analytic cones");
    }
    return out;
}

double SetOracle::prox_probe_scale() const {
    switch (kind_) {
        case Kind::Ball:
        case Kind::Sphere:
            return std::min(0.1, 0.25 * c_);
        case Kind::PowerGraph:
            return 0.1;  // rejection gap below the cusp is O(t^3); do not probe smaller
        default:
            return 0.1;
    }
}

std::vector<Vec> SetOracle::boundary_samples(int count, std::uint64_t seed, double radius) const {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    const int n = dim_;
    for (int s = 0; s < count; ++s) {
        const auto idx = static_cast<std::uint64_t>(s);
        switch (kind_) {
            case Kind::Orthant: {
                Vec x(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    x[static_cast<std::size_t>(i)] = radius * counter_uniform(seed, RngStream::GeometryProbe, idx, 100, static_cast<std::uint32_t>(i));
                x[static_cast<std::size_t>(s % n)] = 0.0;
                if (s % (2 * n) == 0 && s > 0) std::fill(x.begin(), x.end(), 0.0);  // include the corner
                out.push_back(std::move(x));
                break;
            }
            case Kind::HalfSpace: {
                Vec g = gaussian_probe(n, seed, idx, 101);
                g = orthonormal_residual(g, {scaled(a_, 1.0 / norm2(a_))});
                Vec base = scaled(a_, c_ / dot(a_, a_));
                out.push_back(axpy(radius, g, base));
                break;
            }
            case Kind::Ball:
            case Kind::Sphere: {
                Vec g = gaussian_probe(n, seed, idx, 102);
                const double r = norm2(g);
                out.push_back(r > 0.0 ? axpy(c_ / r, g, a_) : axpy(0.0, g, a_));
                break;
            }
            case Kind::PolyhedralCone: {
                Vec g = gaussian_probe(n, seed, idx, 103);
                Vec x = project_polyhedral(scaled(g, radius));
                // push onto one facet hyperplane, keep if still in the cone
                const Vec& f = facets_[static_cast<std::size_t>(s) % facets_.size()];
                Vec y = axpy(-dot(f, x) / dot(f, f), f, x);
                out.push_back(contains(y, 1e-9) ? y : x);
                break;
            }
            case Kind::PowerGraph: {
                const double t = counter_uniform(seed, RngStream::GeometryProbe, idx, 104, 0, -radius, radius);
                const double sv = (s == 0) ? 0.0 : t;  // always include the cusp
                out.push_back(Vec{sv, std::pow(std::abs(sv), c_)});
                break;
            }
            case Kind::WholeSpace:
                return {};  // no boundary
            case Kind::Custom: {
                Vec g = gaussian_probe(n, seed, idx, 105);
                try {
                    out.push_back(project(scaled(g, radius)));
                } catch (const std::runtime_error&) {
                    // probe failed; skip
                }
                break;
            }
        }
    }
    return out;
}

// ------------------------------------------------------------ cone queries

bool prox_normal_test(const SetOracle& d, const Vec& x, const Vec& u, double t,
                      const GeometryOptions& opts) {
    if (t <= 0.0) throw std::invalid_argument("prox_normal_test: t must be positive");
    if (d.distance(x) > opts.membership_tol * (1.0 + norm2(x)))
        throw std::invalid_argument("prox_normal_test: base point not in the set");
    const double nu = norm2(u);
    if (nu == 0.0) return true;
    const double dist = d.distance(axpy(t, u, x));
    return std::abs(dist - t * nu) <= opts.prox_tol * (1.0 + t * nu);
}

ProxInequalityResult prox_inequality_test(const SetOracle& d, const Vec& x, const Vec& u, double t,
                                          double radius, int n_samples, std::uint64_t seed,
                                          const GeometryOptions& opts) {
    if (t <= 0.0) throw std::invalid_argument("prox_inequality_test: t must be positive");
    ProxInequalityResult res;
    res.worst_slack = -1e300;
    const int n = d.dim();
    std::vector<Vec> candidates = d.boundary_samples(n_samples / 2, seed ^ 0x51u, radius);
    for (int i = 0; i < n_samples; ++i) {
        Vec z = axpy(radius * counter_uniform(seed, RngStream::GeometryProbe, static_cast<std::uint64_t>(i), 7, 0),
                     gaussian_probe(n, seed, static_cast<std::uint64_t>(i), 8), x);
        try {
            candidates.push_back(d.project(z));
        } catch (const std::runtime_error&) {
        }
    }
    for (const Vec& y : candidates) {
        if (norm2(axpy(-1.0, x, y)) > radius) continue;
        if (d.distance(y) > opts.membership_tol * (1.0 + norm2(y))) continue;
        const Vec diff = axpy(-1.0, x, y);
        const double lhs = dot(u, diff);
        const double rhs = dot(diff, diff) / (2.0 * t);
        res.worst_slack = std::max(res.worst_slack, lhs - rhs);
        ++res.samples_in_set;
    }
    if (res.samples_in_set == 0)
        throw std::runtime_error("prox_inequality_test: sampler produced no set points");
    res.holds = res.worst_slack <= opts.prox_tol;
    return res;
}

namespace {

// Scaling lemma: proximal at t implies proximal at every smaller t, so a
// candidate must pass a short decreasing grid.
bool validate_prox(const SetOracle& d, const Vec& x, const Vec& u, const GeometryOptions& opts) {
    const double t0 = d.prox_probe_scale();
    for (double t : {t0, 0.5 * t0, 0.25 * t0})
        if (!prox_normal_test(d, x, u, t, opts)) return false;
    return true;
}

}  // namespace

std::vector<Vec> normal_cone_samples(const SetOracle& d, const Vec& x, int k, std::uint64_t seed,
                                     const GeometryOptions& opts) {
    std::vector<Vec> validated;
    const auto push_unique = [&](const Vec& u) {
        for (const Vec& v : validated)
            if (dot(u, v) > 1.0 - 1e-9) return;
        validated.push_back(u);
    };

    if (d.has_analytic_normals()) {
        for (const Vec& u : d.analytic_normal_generators(x, opts.active_tol)) {
            if (static_cast<int>(validated.size()) >= k) break;
            if (validate_prox(d, x, u, opts)) push_unique(u);
        }
        return validated;
    }

    const int n = d.dim();
    const double scale = 0.25 * (1.0 + norm2(x));
    for (int i = 0; i < 48 * k && static_cast<int>(validated.size()) < k; ++i) {
        const double rho = scale * std::pow(0.5, i % 4);
        Vec u = gaussian_probe(n, seed, static_cast<std::uint64_t>(i), 9);
        const double nu = norm2(u);
        if (nu == 0.0) continue;
        u = scaled(u, 1.0 / nu);
        // fixed-point refinement: push x out along u, project back, and take
        // the recovered offset as the next direction; contracts onto a true
        // proximal direction at x when one exists nearby
        bool alive = true;
        for (int it = 0; it < 40 && alive; ++it) {
            Vec z = axpy(rho, u, x);
            Vec p;
            try {
                p = d.project(z);
            } catch (const std::runtime_error&) {
                alive = false;
                break;
            }
            Vec w = axpy(-1.0, p, z);
            const double nw = norm2(w);
            if (nw <= opts.membership_tol) {
                alive = false;  // the probe fell inside the set
                break;
            }
            Vec next = scaled(w, 1.0 / nw);
            const double drift = norm2(axpy(-1.0, u, next));
            u = next;
            if (drift < 1e-14) break;
        }
        if (!alive) continue;
        if (validate_prox(d, x, u, opts)) push_unique(u);
    }
    return validated;
}

bool tangent_test(const SetOracle& d, const Vec& x, const Vec& v, const GeometryOptions& opts) {
    const double nv = norm2(v);
    if (nv == 0.0) return true;
    double t = opts.tangent_t0;
    double best = 1e300;
    for (int i = 0; i <= opts.tangent_imax; ++i) {
        best = std::min(best, d.distance(axpy(t, v, x)) / (t * nv));
        if (best < opts.tangent_tol) return true;
        t *= 0.5;
    }
    return false;
}

// ------------------------------------------------- double description

namespace {

void dedupe_rays(std::vector<Vec>& rays) {
    std::vector<Vec> out;
    for (Vec& r : rays) {
        const double n = norm2(r);
        if (n <= 1e-12) continue;
        Vec u = scaled(r, 1.0 / n);
        bool dup = false;
        for (const Vec& o : out)
            if (dot(u, o) > 1.0 - 1e-9) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(std::move(u));
    }
    rays = std::move(out);
}

}  // namespace

ConeDecomp cone_from_halfspaces(int dim, const std::vector<Vec>& normals, double tol) {
    ConeDecomp c;
    for (int i = 0; i < dim; ++i) c.lineality.push_back(unit_vec(dim, i));

    for (const Vec& raw : normals) {
        const double nn = norm2(raw);
        if (nn <= tol) continue;
        const Vec a = scaled(raw, 1.0 / nn);
        c.facets.push_back(a);

        // pick the lineality direction most exposed to a, if any
        int pivot = -1;
        double best = tol;
        for (std::size_t i = 0; i < c.lineality.size(); ++i) {
            const double s = std::abs(dot(a, c.lineality[i]));
            if (s > best) {
                best = s;
                pivot = static_cast<int>(i);
            }
        }
        if (pivot >= 0) {
            Vec w = c.lineality[static_cast<std::size_t>(pivot)];
            if (dot(a, w) > 0.0) w = scaled(w, -1.0);
            const double aw = dot(a, w);
            std::vector<Vec> new_lin;
            for (std::size_t i = 0; i < c.lineality.size(); ++i) {
                if (static_cast<int>(i) == pivot) continue;
                new_lin.push_back(axpy(-dot(a, c.lineality[i]) / aw, w, c.lineality[i]));
            }
            for (Vec& r : c.rays) r = axpy(-dot(a, r) / aw, w, r);
            c.rays.push_back(w);
            c.lineality = std::move(new_lin);
        } else {
            std::vector<Vec> keep, plus, minus;
            for (Vec& r : c.rays) {
                const double s = dot(a, r);
                if (s > tol) plus.push_back(std::move(r));
                else if (s < -tol) minus.push_back(std::move(r));
                else keep.push_back(std::move(r));
            }
            for (const Vec& rp : plus)
                for (const Vec& rm : minus) {
                    const double sp = dot(a, rp), sm = dot(a, rm);
                    keep.push_back(axpy(-sm / sp, rp, rm));  // sp*rm - sm*rp up to scale
                }
            c.rays = std::move(keep);
            for (const Vec& rm : minus) c.rays.push_back(rm);
        }
        // re-orthonormalize lineality
        std::vector<Vec> ortho;
        for (Vec& l : c.lineality) {
            Vec r = orthonormal_residual(l, ortho);
            const double n = norm2(r);
            if (n > 1e-10) ortho.push_back(scaled(r, 1.0 / n));
        }
        c.lineality = std::move(ortho);
        dedupe_rays(c.rays);
    }
    // rays inside the lineality span are redundant
    std::vector<Vec> pruned;
    for (const Vec& r : c.rays) {
        if (norm2(orthonormal_residual(r, c.lineality)) > 1e-10) pruned.push_back(r);
    }
    c.rays = std::move(pruned);
    dedupe_rays(c.rays);
    return c;
}

bool ConeDecomp::contains(const Vec& v, double tol) const {
    if (!facets.empty()) {
        for (const Vec& n : facets)
            if (dot(n, v) > tol * (1.0 + norm2(v))) return false;
        return true;
    }
    // fall back to the generator description: residual after removing the
    // lineality component must lie in cone(rays); test by projected descent
    Vec r = orthonormal_residual(v, lineality);
    for (int iter = 0; iter < 200; ++iter) {
        double moved = 0.0;
        for (const Vec& ray : rays) {
            const double s = dot(r, ray);
            if (s > 0.0) {
                r = axpy(-s, ray, r);
                moved += s;
            }
        }
        if (moved <= tol) break;
    }
    return norm2(r) <= std::sqrt(tol) * (1.0 + norm2(v));
}

PointCones cone_cones(const ConeSpec& spec, const Vec& x, double active_tol) {
    if (spec.facets.empty() && spec.generators.empty())
        throw std::invalid_argument("cone_cones: need facets or generators");
    const int n = spec.dim;

    std::vector<Vec> facets = spec.facets;
    if (facets.empty()) {
        // facets of cone{g} are the generators of its polar
        std::vector<Vec> polar_facets;
        for (const Vec& g : spec.generators) polar_facets.push_back(g);
        ConeDecomp polar = cone_from_halfspaces(n, polar_facets);
        facets = polar.rays;
        for (const Vec& l : polar.lineality) {
            facets.push_back(l);
            facets.push_back(scaled(l, -1.0));
        }
    }

    const double scale = 1.0 + norm2(x);
    for (const Vec& f : facets)
        if (dot(f, x) > active_tol * scale * norm2(f))
            throw std::invalid_argument("cone_cones: point outside the cone");

    std::vector<Vec> active;
    for (const Vec& f : facets)
        if (std::abs(dot(f, x)) <= active_tol * scale * norm2(f)) active.push_back(f);

    PointCones pc;
    pc.tangent = cone_from_halfspaces(n, active);
    pc.tangent.facets = active;
    pc.normal.rays = active;
    dedupe_rays(pc.normal.rays);
    // facets of the normal cone: polar of cone(active) = tangent cone
    pc.normal.facets.clear();
    for (const Vec& r : pc.tangent.rays) pc.normal.facets.push_back(r);
    for (const Vec& l : pc.tangent.lineality) {
        pc.normal.facets.push_back(l);
        pc.normal.facets.push_back(scaled(l, -1.0));
    }
    return pc;
}

// ---------------------------------------------------------- submanifolds

namespace {

Matrix fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& y, int out_dim,
                   double h) {
    Matrix j(out_dim, static_cast<int>(y.size()));
    for (int k = 0; k < static_cast<int>(y.size()); ++k) {
        Vec yp = y, ym = y;
        yp[static_cast<std::size_t>(k)] += h;
        ym[static_cast<std::size_t>(k)] -= h;
        const Vec fp = f(yp), fm = f(ym);
        for (int i = 0; i < out_dim; ++i)
            j(i, k) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
    }
    return j;
}

}  // namespace

ManifoldCones manifold_cones(const ManifoldChart& chart, const Vec& y, double fd_step,
                             double boundary_tol) {
    if (static_cast<int>(y.size()) != chart.param_dim)
        throw std::invalid_argument("manifold_cones: parameter point has wrong dimension");
    const int n = chart.ambient_dim;
    const int m = chart.param_dim;

    ManifoldCones mc;
    mc.x = chart.map(y);
    const Matrix j = chart.jacobian ? chart.jacobian(y) : fd_jacobian(chart.map, y, n, fd_step);

    // orthonormalize columns; rank deficiency is an error
    std::vector<Vec> basis;
    for (int k = 0; k < m; ++k) {
        Vec r = orthonormal_residual(j.column(k), basis);
        const double nr = norm2(r);
        if (nr <= 1e-8 * (1.0 + j.max_abs()))
            throw std::invalid_argument("manifold_cones: jacobian rank-deficient at parameter point");
        basis.push_back(scaled(r, 1.0 / nr));
    }
    mc.tangent_basis = Matrix(n, m);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < n; ++i) mc.tangent_basis(i, k) = basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];

    // orthonormal complement via residuals of the coordinate basis
    std::vector<Vec> complement;
    for (int i = 0; i < n && static_cast<int>(complement.size()) < n - m; ++i) {
        Vec r = orthonormal_residual(unit_vec(n, i), basis);
        Vec r2 = orthonormal_residual(r, complement);
        const double nr = norm2(r2);
        if (nr > 1e-10) complement.push_back(scaled(r2, 1.0 / nr));
    }
    for (const Vec& p : complement) {
        mc.normal_generators.push_back(p);
        mc.normal_generators.push_back(scaled(p, -1.0));
    }

    mc.at_boundary = chart.has_boundary && std::abs(y[0]) <= boundary_tol;
    if (mc.at_boundary) {
        // boundary tangent space is spanned by the non-first parameter directions
        std::vector<Vec> boundary_basis;
        for (int k = 1; k < m; ++k) {
            Vec r = orthonormal_residual(j.column(k), boundary_basis);
            const double nr = norm2(r);
            if (nr > 1e-10) boundary_basis.push_back(scaled(r, 1.0 / nr));
        }
        Vec w = orthonormal_residual(j.column(0), boundary_basis);
        const double nw = norm2(w);
        if (nw <= 1e-12)
            throw std::invalid_argument("manifold_cones: degenerate boundary direction");
        // sign fixed by <n_x, Dphi e1> = kappa < 0
        mc.outward_normal = scaled(w, -1.0 / nw);
        mc.normal_generators.push_back(mc.outward_normal);
    }
    return mc;
}

bool ManifoldCones::contains_tangent(const Vec& v, double tol) const {
    Vec r = v;
    for (int k = 0; k < tangent_basis.cols(); ++k) {
        const Vec b = tangent_basis.column(k);
        r = axpy(-dot(r, b), b, r);
    }
    if (norm2(r) > tol * (1.0 + norm2(v))) return false;
    if (at_boundary && dot(v, outward_normal) > tol * (1.0 + norm2(v))) return false;
    return true;
}

double curvature(const std::function<Vec(const Vec&)>& tau, const Vec& x, const Vec& u,
                 const Vec& v, double fd_step) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    const double h = fd_step * (1.0 + norm2(x)) / nv;
    const Vec tp = tau(axpy(h, v, x));
    const Vec tm = tau(axpy(-h, v, x));
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * (tp[i] - tm[i]) / (2.0 * h);
    return -acc;
}

}  // namespace sdeinv
