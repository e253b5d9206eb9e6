#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdeinv/matrix.hpp"

namespace sdeinv {

struct GeometryOptions {
    double prox_tol = 1e-7;        // absolute + relative slack in proximal tests
    double membership_tol = 1e-9;  // |distance| counted as "in the set"
    double tangent_tol = 1e-4;     // liminf threshold for the tangent-cone test
    double tangent_t0 = 1e-2;
    int tangent_imax = 20;
    double active_tol = 1e-9;  // facet/coordinate activity threshold
};

/// A closed set exposed through membership/distance/projection plus analytic
/// cone formulas for the built-in catalogue. Immutable after construction;
/// custom callbacks must be pure.
///
/// Conventions: half_space is {x : <a,x> >= c} (so -a/|a| is the outward
/// proximal normal on the boundary); polyhedral_cone is {x : <n_i,x> <= 0}.
/// In finite dimension the weak and strong contingent cones coincide, so only
/// the strong tangent test is exposed.
class SetOracle {
public:
    enum class Kind { Orthant, HalfSpace, Ball, Sphere, PolyhedralCone, PowerGraph, WholeSpace, Custom };

    using MembershipFn = std::function<bool(const Vec&)>;
    using DistanceFn = std::function<double(const Vec&)>;
    using ProjectFn = std::function<Vec(const Vec&)>;

    static SetOracle orthant(int dim);
    static SetOracle half_space(Vec a, double c);
    static SetOracle ball(Vec center, double radius);
    static SetOracle sphere(Vec center, double radius);
    static SetOracle polyhedral_cone(int dim, std::vector<Vec> facet_normals);
    static SetOracle power_graph(double p);
    static SetOracle whole_space(int dim);
    static SetOracle custom(int dim, MembershipFn member, DistanceFn dist = nullptr,
                            ProjectFn proj = nullptr);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    const std::string& describe() const { return describe_; }

    bool contains(const Vec& x, double tol = 1e-9) const;
    double distance(const Vec& x) const;
    Vec project(const Vec& x) const;

    bool has_analytic_normals() const;
    /// Exact generators of the proximal normal cone for built-in kinds
    /// (empty in the interior). Throws for Custom.
    std::vector<Vec> analytic_normal_generators(const Vec& x, double active_tol = 1e-9) const;

    /// Deterministic boundary sample points (empty for whole_space).
    std::vector<Vec> boundary_samples(int count, std::uint64_t seed, double radius = 2.0) const;

    /// Scale hint for proximal validation probes (reach-limited sets shrink it).
    double prox_probe_scale() const;

    // built-in parameters (used by cone helpers and the CLI)
    const Vec& param_a() const { return a_; }
    double param_c() const { return c_; }
    const Vec& center() const { return a_; }
    double radius() const { return c_; }
    double power() const { return c_; }
    const std::vector<Vec>& facets() const { return facets_; }

private:
    SetOracle() = default;

    Kind kind_ = Kind::Custom;
    int dim_ = 0;
    std::string describe_;
    Vec a_;          // half-space normal / center
    double c_ = 0.0; // half-space offset / radius / graph power
    std::vector<Vec> facets_;
    MembershipFn member_;
    DistanceFn dist_;
    ProjectFn proj_;

    Vec project_power_graph(const Vec& x) const;
    Vec project_polyhedral(const Vec& x) const;
    Vec project_custom(const Vec& x) const;
};

/// d(x + t u) == t|u| within prox_tol(1 + t|u|). Throws if x is not in D.
bool prox_normal_test(const SetOracle& d, const Vec& x, const Vec& u, double t,
                      const GeometryOptions& opts = {});

struct ProxInequalityResult {
    bool holds = false;
    int samples_in_set = 0;
    double worst_slack = 0.0;  // max of <u,y-x> - |y-x|^2/(2t)
};

/// <u, y-x> <= |y-x|^2 / (2t) over sampled y in D within radius of x.
/// Throws if the sampler produced no set points.
ProxInequalityResult prox_inequality_test(const SetOracle& d, const Vec& x, const Vec& u, double t,
                                          double radius, int n_samples, std::uint64_t seed = 1,
                                          const GeometryOptions& opts = {});

/// Validated unit proximal normals at x: exact generators for built-in kinds,
/// projection-based candidates from ambient probes otherwise. At most k
/// vectors; empty in the interior.
std::vector<Vec> normal_cone_samples(const SetOracle& d, const Vec& x, int k,
                                     std::uint64_t seed = 1, const GeometryOptions& opts = {});

/// liminf_{t->0+} d(x+tv)/t estimated over a dyadic grid.
bool tangent_test(const SetOracle& d, const Vec& x, const Vec& v, const GeometryOptions& opts = {});

// -------- polyhedral cones --------

/// Either representation may be given; the other is derived.
struct ConeSpec {
    int dim = 0;
    std::vector<Vec> facets;      // {x : <n_i,x> <= 0}
    std::vector<Vec> generators;  // cone{g_k}
};

struct ConeDecomp {
    std::vector<Vec> lineality;  // orthonormal
    std::vector<Vec> rays;       // unit
    std::vector<Vec> facets;     // defining halfspaces (for membership)

    bool contains(const Vec& v, double tol = 1e-9) const;
};

struct PointCones {
    ConeDecomp tangent;
    ConeDecomp normal;
};

/// Generator description of {v : <n_i,v> <= 0} via double description.
ConeDecomp cone_from_halfspaces(int dim, const std::vector<Vec>& normals, double tol = 1e-10);

/// Exact tangent/normal cones of a polyhedral cone at x. Throws if x is
/// outside the cone.
PointCones cone_cones(const ConeSpec& spec, const Vec& x, double active_tol = 1e-9);

// -------- submanifolds with boundary --------

/// Local parametrization phi : V ⊂ R^m_+ -> R^n; the boundary convention is
/// y1 = 0 and phi must evaluate on a slightly larger open set (its defining
/// C^1 extension) so central differences make sense at the boundary.
struct ManifoldChart {
    int param_dim = 0;
    int ambient_dim = 0;
    std::function<Vec(const Vec&)> map;
    std::function<Matrix(const Vec&)> jacobian;  // optional; finite differences otherwise
    bool has_boundary = false;
};

struct ManifoldCones {
    Vec x;
    Matrix tangent_basis;  // n x m, orthonormal columns
    bool at_boundary = false;
    Vec outward_normal;                  // valid when at_boundary
    std::vector<Vec> normal_generators;  // ± complement basis (+ outward normal at boundary)

    /// Membership in the contingent cone: T_xM, or its inward half at the boundary.
    bool contains_tangent(const Vec& v, double tol = 1e-7) const;
};

ManifoldCones manifold_cones(const ManifoldChart& chart, const Vec& param_point,
                             double fd_step = 1e-6, double boundary_tol = 1e-12);

/// Contingent curvature -<u, Dtau(x) v> with the Jacobian applied to v by a
/// central difference through the tangent field tau.
double curvature(const std::function<Vec(const Vec&)>& tau, const Vec& x, const Vec& u,
                 const Vec& v, double fd_step = 1e-5);

}  // namespace sdeinv
