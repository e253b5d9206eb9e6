#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdeinv/expr.hpp"
#include "sdeinv/geometry.hpp"
#include "sdeinv/linop.hpp"
#include "sdeinv/matrix.hpp"

namespace sdeinv {

struct ToleranceSet {
    double tol_eq = 1e-8;    // relative tolerance of the dispersion-kernel condition
    double tol_ineq = 1e-7;  // absolute tolerance of the drift inequalities
    double fd_step = 1e-5;   // central-difference step, scaled by (1 + |x|)
    double rank_tol = 1e-10;
};

/// Truncated model: drift b, Q eigenvalues, and the diffusion given either as
/// a Sigma-field (sigma(x) Q^{1/2} in the e-basis, so column j is the j-th
/// diffusion direction) or as the dispersion field C. Built-in models carry
/// both representations, consistent on the state set.
struct ModelSpec {
    int dim = 0;
    std::vector<double> q_eigs;
    std::function<Vec(const Vec&)> drift;
    std::function<Matrix(const Vec&)> sigma_field;
    std::function<Matrix(const Vec&)> c_field;
    bool clip_negative = false;  // evaluate fields at the componentwise positive part
    std::function<Vec(const Vec&)> tangent_field;  // optional, for the curvature form
    std::string id = "model";

    bool has_sigma() const { return static_cast<bool>(sigma_field); }
    bool has_c() const { return static_cast<bool>(c_field); }

    Vec drift_at(const Vec& x) const;
    Matrix sigma_at(const Vec& x) const;  // derived via |C|^{1/2} when only C is given
    Matrix c_at(const Vec& x) const;      // Sigma Sigma^T when only Sigma is given

    // Cox-Ingersoll-Ross on the half line: dX = (a - b X) dt + sigma0 sqrt(X+) dW
    static ModelSpec cir(double a, double b, double sigma0);
    // Ornstein-Uhlenbeck: dX = theta (mu - X) dt + sigma0 dW
    static ModelSpec ou(double theta, double mu, double sigma0);
    // Sigma(x) = x in one dimension, zero drift
    static ModelSpec linear_sigma();
    // Sigma = diag(rates_i x_i), constant drift
    static ModelSpec orthant_diag(Vec rates, Vec drift0);
};

/// Scalar test function with optional analytic derivatives; finite
/// differences are used where callbacks are absent.
struct TestFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Matrix(const Vec&)> hessian;

    static TestFunction from_expression(const Expression& e);
};

/// C(x) = Sigma(x) Sigma(x)^T, or the supplied dispersion field directly.
SymOperator dispersion(const ModelSpec& m, const Vec& x);

/// Sampled sanity audit of the model hypotheses on set points: linear growth
/// of (b, Sigma), self-adjointness and nonnegativity of Sigma, and the
/// consistency Sigma^2 = C when both fields are configured. Report-only; the
/// checks never reject a model.
struct ModelAudit {
    double max_growth_ratio = 0.0;       // (|b| + |Sigma|_HS) / (1 + |x|)
    double worst_sigma_asymmetry = 0.0;  // max |Sigma - Sigma^T| entry
    double worst_sigma_negative = 0.0;   // most negative eigenvalue of sym(Sigma)
    double worst_c_mismatch = 0.0;       // max |Sigma Sigma^T - C| / (1 + |C|)
};

ModelAudit audit_model(const ModelSpec& m, const std::vector<Vec>& points);

/// Generator value <Dphi, b> + 1/2 Tr(D^2 phi C).
double generator_apply(const ModelSpec& m, const TestFunction& phi, const Vec& x,
                       const ToleranceSet& tols = {});

/// Truncated drift-correction series, three algebraic routes:
///  - direct column series  sum_j <u, DC^j(x) (C C^+)^j(x)>
///  - trace route           Tr(J_{Cu}(x) P_C(x)) with J_{Cu} the Jacobian of y -> C(y)u
///  - Stratonovich series   sum_j <u, Dsigma^j(x) sigma^j(x)>
double series_C_direct(const ModelSpec& m, const Vec& x, const Vec& u,
                       const ToleranceSet& tols = {});
double series_C_trace(const ModelSpec& m, const Vec& x, const Vec& u,
                      const ToleranceSet& tols = {});
/// Trace route with an explicit range projector (lets callers swap the
/// C C^+ product for range_proj and compare).
double series_C_trace_projected(const ModelSpec& m, const Vec& x, const Vec& u,
                                const Matrix& projector, const ToleranceSet& tols = {});
double series_sigma(const ModelSpec& m, const Vec& x, const Vec& u,
                    const ToleranceSet& tols = {});

/// <u, b(x)> - 1/2 * (trace-route series). Exact (no differencing) when the
/// range projection vanishes.
double corrected_drift_C(const ModelSpec& m, const Vec& x, const Vec& u,
                         const ToleranceSet& tols = {});

/// <u, b(x)> - 1/2 * (Stratonovich series); requires a Sigma field.
double corrected_drift_sigma(const ModelSpec& m, const Vec& x, const Vec& u,
                             const ToleranceSet& tols = {});

struct SeriesEqualityResult {
    double lhs = 0.0;  // trace route
    double rhs = 0.0;  // Stratonovich series
    double residual = 0.0;
    bool u_in_kernel = false;  // |Sigma(x)^T u| below tolerance
};

/// The two series agree on ker(Sigma^*); off the kernel both values are
/// reported without any pass/fail semantics.
SeriesEqualityResult series_equality_check(const ModelSpec& m, const Vec& x, const Vec& u,
                                           const ToleranceSet& tols = {});

struct NormalPair {
    Vec u;
    SymOperator v;
};

/// <u, b(x)> + 1/2 Tr(v C(x)) — the second-order normal probe.
double second_order_check(const ModelSpec& m, const Vec& x, const NormalPair& pair);

struct PmpConfig {
    int n_samples = 400;
    double radius = 3.0;
    std::uint64_t seed = 1;
    int refine_iters = 60;
};

struct PmpVerdict {
    bool probed = false;  // false when the sampled maximum stayed negative
    Vec argmax;
    double phi_max = 0.0;
    double generator_value = 0.0;
    bool violation = false;
};

/// Approximately maximizes phi over D; when the maximum is nonnegative,
/// evaluates the generator there and flags values above tol_ineq.
PmpVerdict pmp_probe(const ModelSpec& m, const SetOracle& d, const TestFunction& phi,
                     const PmpConfig& cfg = {}, const ToleranceSet& tols = {});

enum class Verdict { Pass, Fail, Inconclusive };

struct NormalCheck {
    Vec u;
    double kernel_residual = 0.0;
    double drift_c = 0.0;
    std::optional<double> drift_sigma;
    std::optional<double> drift_curvature;
    bool pass_kernel = false;
    bool pass_drift = false;
};

struct PointVerdict {
    Vec x;
    std::vector<NormalCheck> normals;
    int rank_c = 0;
    bool rank_ambiguous = false;  // spectrum straddles the rank cut at x
    bool vacuous = false;         // no normals (interior point)
    Verdict verdict = Verdict::Pass;
};

PointVerdict check_point(const ModelSpec& m, const SetOracle& d, const Vec& x,
                         const std::vector<Vec>* normals = nullptr,
                         const ToleranceSet& tols = {}, std::uint64_t seed = 1);

struct CheckReport {
    std::string model_id;
    std::string set_id;
    std::vector<PointVerdict> points;
    Verdict aggregate = Verdict::Pass;
    std::map<int, int> rank_profile;   // rank of C -> sample count
    double fd_step = 0.0;
    double q_tail_fraction = 0.0;      // trailing Q eigenvalue mass
    double sigma_tail_fraction = 0.0;  // worst top-mode HS share of Sigma over samples
    ModelAudit audit;
    std::vector<std::string> warnings;
};

/// Samples boundary points, runs check_point on each (optionally in
/// parallel), and aggregates deterministically in sample order.
CheckReport check_set(const ModelSpec& m, const SetOracle& d, int n_boundary = 50,
                      std::uint64_t seed = 1, const ToleranceSet& tols = {},
                      bool parallel = true, double sample_radius = 2.0);

}  // namespace sdeinv
