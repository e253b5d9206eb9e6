#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sdeinv/expr.hpp"
#include "sdeinv/invariance.hpp"

using namespace sdeinv;

namespace {

// Sigma(x) = diag(1 + x1^2/2, 0): smooth, rank deficient everywhere.
ModelSpec rank_deficient_2d() {
    ModelSpec m;
    m.dim = 2;
    m.q_eigs = {1.0, 1.0};
    m.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    m.sigma_field = [](const Vec& x) {
        Matrix s(2, 2);
        s(0, 0) = 1.0 + 0.5 * x[0] * x[0];
        return s;
    };
    m.id = "rank_deficient_2d";
    return m;
}

// Non-diagonal dispersion field C(y) = [[1, y2],[y2, 1]] + shift for PSD.
ModelSpec offdiag_c_model() {
    ModelSpec m;
    m.dim = 2;
    m.q_eigs = {1.0, 1.0};
    m.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    m.c_field = [](const Vec& x) {
        Matrix c(2, 2);
        c(0, 0) = 2.0;
        c(0, 1) = x[1];
        c(1, 0) = x[1];
        c(1, 1) = 2.0 + 0.3 * x[0];
        return c;
    };
    m.id = "offdiag_c";
    return m;
}

}  // namespace

TEST_CASE("dispersion: cir, zero diffusion, direct c-field") {
    const ModelSpec cir = ModelSpec::cir(0.3, 0.0, 1.0);
    CHECK(dispersion(cir, {0.25})(0, 0) == doctest::Approx(0.25).epsilon(1e-14));

    ModelSpec zero;
    zero.dim = 2;
    zero.q_eigs = {1.0, 1.0};
    zero.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    zero.sigma_field = [](const Vec&) { return Matrix(2, 2); };
    CHECK(dispersion(zero, {1.0, 2.0}).max_abs() == 0.0);

    ModelSpec via_c;
    via_c.dim = 2;
    via_c.q_eigs = {1.0, 1.0};
    via_c.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    via_c.c_field = [](const Vec&) {
        Matrix c(2, 2);
        c(0, 0) = 4.0;
        c(1, 1) = 1.0;
        return c;
    };
    CHECK(dispersion(via_c, {0.0, 0.0})(0, 0) == doctest::Approx(4.0));
    const Matrix s = via_c.sigma_at({0.0, 0.0});  // derived square root
    CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(s(1, 1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("generator_apply: linear, quadratic, constant test functions") {
    const ModelSpec cir = ModelSpec::cir(0.4, 0.2, 0.9);
    const Vec x{0.7};

    TestFunction linear;
    linear.value = [](const Vec& y) { return 3.0 * y[0]; };
    linear.gradient = [](const Vec&) { return Vec{3.0}; };
    linear.hessian = [](const Vec&) { return Matrix(1, 1); };
    const double b0 = cir.drift_at(x)[0];
    CHECK(generator_apply(cir, linear, x) == doctest::Approx(3.0 * b0).epsilon(1e-14));

    // |y|^2 has gradient 2x and hessian 2I: value 2<x,b> + Tr C
    TestFunction quad;
    quad.value = [](const Vec& y) { return dot(y, y); };
    const double expect = 2.0 * x[0] * b0 + dispersion(cir, x)(0, 0);
    CHECK(generator_apply(cir, quad, x) == doctest::Approx(expect).epsilon(1e-5));

    TestFunction constant;
    constant.value = [](const Vec&) { return 42.0; };
    CHECK(generator_apply(cir, constant, x) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("corrected_drift_C: hand values") {
    // P_C(0) = 0 kills the correction, so the value is exactly -a
    for (double a : {-0.5, 0.0, 0.3, 1.0}) {
        const ModelSpec cir = ModelSpec::cir(a, 0.0, 1.0);
        CHECK(corrected_drift_C(cir, {0.0}, {-1.0}) == -a);
    }
    // Sigma(x)=x: C = x^2, derivative 2x, projector 1 away from 0
    const ModelSpec lin = ModelSpec::linear_sigma();
    CHECK(corrected_drift_C(lin, {1.0}, {1.0}) == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(corrected_drift_C(lin, {1.0}, {0.0}) == 0.0);
}

TEST_CASE("corrected_drift_sigma: hand values and the sigma/C contrast") {
    const ModelSpec lin = ModelSpec::linear_sigma();
    // D sigma^1 sigma^1 = 1 at x=1, so the value is -1/2; off-kernel it
    // intentionally differs from the C-form (-1)
    CHECK(corrected_drift_sigma(lin, {1.0}, {1.0}) == doctest::Approx(-0.5).epsilon(1e-8));
    CHECK(corrected_drift_sigma(lin, {1.0}, {0.0}) == 0.0);

    // where Sigma vanishes the correction drops out entirely
    const ModelSpec cir = ModelSpec::cir(0.7, 0.0, 1.0);
    CHECK(corrected_drift_sigma(cir, {0.0}, {-1.0}) == doctest::Approx(-0.7));
}

TEST_CASE("series routes agree: direct sum vs trace identity") {
    std::mt19937 gen(9);
    std::uniform_real_distribution<double> coord(0.2, 1.5);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::vector<ModelSpec> models{ModelSpec::cir(0.3, 0.1, 0.8), ModelSpec::linear_sigma(),
                                        ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3}),
                                        offdiag_c_model()};
    for (const ModelSpec& m : models) {
        for (int trial = 0; trial < 20; ++trial) {
            Vec x(static_cast<std::size_t>(m.dim)), u(static_cast<std::size_t>(m.dim));
            for (int i = 0; i < m.dim; ++i) {
                x[static_cast<std::size_t>(i)] = coord(gen);
                u[static_cast<std::size_t>(i)] = normal(gen);
            }
            const double direct = series_C_direct(m, x, u);
            const double trace = series_C_trace(m, x, u);
            CHECK(std::abs(direct - trace) <= 1e-8 * (1.0 + std::abs(trace)));
        }
    }
}

TEST_CASE("projection-form equivalence: pinv route vs range_proj route") {
    std::mt19937 gen(21);
    std::uniform_real_distribution<double> coord(0.3, 1.2);
    const std::vector<ModelSpec> models{ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3}),
                                        offdiag_c_model()};
    for (const ModelSpec& m : models) {
        for (int trial = 0; trial < 10; ++trial) {
            Vec x(static_cast<std::size_t>(m.dim)), u(static_cast<std::size_t>(m.dim));
            for (int i = 0; i < m.dim; ++i) {
                x[static_cast<std::size_t>(i)] = coord(gen);
                u[static_cast<std::size_t>(i)] = coord(gen);
            }
            const double via_pinv = series_C_trace(m, x, u);
            const double via_range_proj = series_C_trace_projected(
                m, x, u, range_proj(dispersion(m, x)).matrix(), ToleranceSet{});
            CHECK(std::abs(via_pinv - via_range_proj) <= 1e-10 * (1.0 + std::abs(via_pinv)));
        }
    }
}

TEST_CASE("series_equality_check on and off the kernel") {
    const ModelSpec lin = ModelSpec::linear_sigma();
    const SeriesEqualityResult at0 = series_equality_check(lin, {0.0}, {1.0});
    CHECK(at0.u_in_kernel);
    CHECK(at0.lhs == doctest::Approx(0.0));
    CHECK(at0.rhs == doctest::Approx(0.0));

    const SeriesEqualityResult at1 = series_equality_check(lin, {1.0}, {1.0});
    CHECK_FALSE(at1.u_in_kernel);
    CHECK(at1.lhs == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(at1.rhs == doctest::Approx(1.0).epsilon(1e-7));

    const ModelSpec rd = rank_deficient_2d();
    for (double x1 : {-1.0, -0.2, 0.0, 0.4, 1.3}) {
        const SeriesEqualityResult r = series_equality_check(rd, {x1, 0.0}, {0.0, 1.0});
        CHECK(r.u_in_kernel);
        CHECK(r.residual <= 5e-5);
    }
}

TEST_CASE("kernel symmetry: C(x)u = 0 iff Sigma(x)^T u = 0") {
    const ModelSpec m = ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3});
    const Vec x{0.0, 1.0, 2.0};
    const SymOperator c = dispersion(m, x);
    const Matrix st = m.sigma_at(x).transposed();
    std::mt19937 gen(31);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec u{normal(gen), normal(gen), normal(gen)};
        const bool ker_c = norm2(c.apply(u)) <= 1e-10 * (1.0 + c.max_abs());
        const bool ker_s = norm2(st.apply(u)) <= 1e-8 * (1.0 + st.max_abs());
        CHECK(ker_c == ker_s);
    }
    CHECK(norm2(c.apply({1.0, 0.0, 0.0})) == 0.0);
    CHECK(norm2(st.apply({1.0, 0.0, 0.0})) == 0.0);
}

TEST_CASE("second_order_check hand cases") {
    const ModelSpec cir = ModelSpec::cir(0.6, 0.0, 1.0);
    CHECK(second_order_check(cir, {0.5}, {Vec{0.0}, SymOperator::zero(1)}) == 0.0);
    CHECK(second_order_check(cir, {0.0}, {Vec{-1.0}, SymOperator::zero(1)}) ==
          doctest::Approx(-0.6));

    ModelSpec diag3;
    diag3.dim = 3;
    diag3.q_eigs = {1, 1, 1};
    diag3.drift = [](const Vec&) { return Vec{0, 0, 0}; };
    diag3.c_field = [](const Vec&) {
        Matrix c(3, 3);
        c(0, 0) = 1.0;
        c(1, 1) = 2.0;
        c(2, 2) = 3.0;
        return c;
    };
    const SymOperator neg_id(Matrix::identity(3) * -1.0);
    CHECK(second_order_check(diag3, {0, 0, 0}, {Vec{0, 0, 0}, neg_id}) == doctest::Approx(-3.0));
}

TEST_CASE("pmp_probe: vacuous, passing, violating") {
    const SetOracle half_line = SetOracle::orthant(1);

    TestFunction neg_one;
    neg_one.value = [](const Vec&) { return -1.0; };
    const ModelSpec cir = ModelSpec::cir(0.3, 0.0, 1.0);
    const PmpVerdict vac = pmp_probe(cir, half_line, neg_one);
    CHECK_FALSE(vac.probed);
    CHECK_FALSE(vac.violation);

    TestFunction minus_y;
    minus_y.value = [](const Vec& y) { return -y[0]; };
    minus_y.gradient = [](const Vec&) { return Vec{-1.0}; };
    minus_y.hessian = [](const Vec&) { return Matrix(1, 1); };
    const PmpVerdict ok = pmp_probe(cir, half_line, minus_y);
    CHECK(ok.probed);
    CHECK(std::abs(ok.argmax[0]) <= 1e-9);
    CHECK(ok.generator_value == doctest::Approx(-0.3).epsilon(1e-9));
    CHECK_FALSE(ok.violation);

    ModelSpec bad;
    bad.dim = 1;
    bad.q_eigs = {1.0};
    bad.drift = [](const Vec&) { return Vec{-1.0}; };
    bad.sigma_field = [](const Vec&) { return Matrix(1, 1); };
    const PmpVerdict viol = pmp_probe(bad, half_line, minus_y);
    CHECK(viol.probed);
    CHECK(viol.generator_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(viol.violation);
}

TEST_CASE("check_point: cir verdicts and interior vacuity") {
    const SetOracle half_line = SetOracle::orthant(1);

    const PointVerdict pass = check_point(ModelSpec::cir(0.3, 0.0, 1.0), half_line, {0.0});
    CHECK(pass.verdict == Verdict::Pass);
    REQUIRE(pass.normals.size() == 1);
    CHECK(pass.normals[0].kernel_residual == 0.0);
    CHECK(pass.normals[0].drift_c == doctest::Approx(-0.3));

    const PointVerdict fail = check_point(ModelSpec::cir(-0.5, 0.0, 1.0), half_line, {0.0});
    CHECK(fail.verdict == Verdict::Fail);
    CHECK(fail.normals[0].drift_c == doctest::Approx(0.5));

    const PointVerdict interior = check_point(ModelSpec::cir(0.3, 0.0, 1.0), half_line, {1.0});
    CHECK(interior.vacuous);
    CHECK(interior.verdict == Verdict::Pass);
}

TEST_CASE("check_point: borderline spectrum downgrades to inconclusive") {
    ModelSpec m;
    m.dim = 2;
    m.q_eigs = {1.0, 1.0};
    m.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    m.c_field = [](const Vec&) {
        Matrix c(2, 2);
        c(0, 0) = 1.0;
        c(1, 1) = 3e-10;  // straddles the default rank cut
        return c;
    };
    const PointVerdict pv = check_point(m, SetOracle::whole_space(2), {0.0, 0.0});
    CHECK(pv.rank_ambiguous);
    CHECK(pv.verdict == Verdict::Inconclusive);
}

TEST_CASE("check_set: orthant model, inward vs violating face drift") {
    const SetOracle o3 = SetOracle::orthant(3);
    const ModelSpec good = ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3});
    const CheckReport ok = check_set(good, o3, 50, 3);
    CHECK(ok.aggregate == Verdict::Pass);
    CHECK(ok.points.size() == 50);

    const ModelSpec bad = ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, -0.4, 0.3});
    const CheckReport ko = check_set(bad, o3, 50, 3);
    CHECK(ko.aggregate == Verdict::Fail);
    bool listed = false;
    for (const PointVerdict& pv : ko.points)
        if (pv.verdict == Verdict::Fail)
            for (const NormalCheck& nc : pv.normals)
                if (!nc.pass_drift && nc.drift_c == doctest::Approx(0.4)) listed = true;
    CHECK(listed);

    const CheckReport vac = check_set(good, SetOracle::whole_space(3), 50, 3);
    CHECK(vac.aggregate == Verdict::Pass);
    CHECK(vac.points.empty());
    REQUIRE(!vac.warnings.empty());
}

TEST_CASE("convex cone reduction: the correction vanishes on orthant faces") {
    const SetOracle o3 = SetOracle::orthant(3);
    const ModelSpec m = ModelSpec::orthant_diag({0.5, 1.0, 1.5}, {0.1, 0.2, 0.3});
    const auto samples = o3.boundary_samples(50, 17, 2.0);
    for (const Vec& x : samples) {
        for (const Vec& u : normal_cone_samples(o3, x, 6)) {
            const double drift = corrected_drift_C(m, x, u);
            CHECK(std::abs(drift - dot(u, m.drift_at(x))) <= 1e-8);
        }
    }
}

TEST_CASE("curvature form agrees with the Stratonovich form on the circle") {
    ModelSpec rot;
    rot.dim = 2;
    rot.q_eigs = {1.0, 1.0};
    rot.drift = [](const Vec& y) { return Vec{-0.5 * y[0], -0.5 * y[1]}; };
    rot.sigma_field = [](const Vec& y) {
        Matrix s(2, 2);
        s(0, 0) = -y[1];
        s(1, 0) = y[0];
        return s;
    };
    rot.tangent_field = [](const Vec& y) { return Vec{-y[1], y[0]}; };
    rot.id = "circle_rotation";

    const SetOracle s1 = SetOracle::sphere({0.0, 0.0}, 1.0);
    const PointVerdict pv = check_point(rot, s1, {1.0, 0.0});
    REQUIRE(!pv.normals.empty());
    for (const NormalCheck& nc : pv.normals) {
        REQUIRE(nc.drift_sigma.has_value());
        REQUIRE(nc.drift_curvature.has_value());
        CHECK(*nc.drift_curvature == doctest::Approx(*nc.drift_sigma).epsilon(1e-5));
    }
    // the rotation with drift -y/2 keeps the unit circle invariant
    CHECK(pv.verdict == Verdict::Pass);
}

TEST_CASE("pmp_probe never flags models whose set check passes") {
    // concave quadratics with analytic derivatives probed over the built-ins
    std::mt19937 gen(71);
    std::uniform_real_distribution<double> alpha(0.1, 1.5);
    std::uniform_real_distribution<double> shift(-1.0, 1.0);

    struct Case {
        ModelSpec model;
        SetOracle set;
    };
    std::vector<Case> cases;
    cases.push_back({ModelSpec::cir(0.3, 0.0, 1.0), SetOracle::orthant(1)});
    cases.push_back({ModelSpec::orthant_diag({0.5, 1.0}, {0.1, 0.2}), SetOracle::orthant(2)});

    for (Case& c : cases) {
        REQUIRE(check_set(c.model, c.set, 30, 5).aggregate == Verdict::Pass);
        for (int trial = 0; trial < 12; ++trial) {
            const double a = alpha(gen);
            Vec m0(static_cast<std::size_t>(c.model.dim));
            for (double& v : m0) v = shift(gen);
            const double lift = std::abs(shift(gen));
            TestFunction phi;
            phi.value = [a, m0, lift](const Vec& y) {
                double q = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) q += (y[i] - m0[i]) * (y[i] - m0[i]);
                return -a * q + lift;
            };
            phi.gradient = [a, m0](const Vec& y) {
                Vec g(y.size());
                for (std::size_t i = 0; i < y.size(); ++i) g[i] = -2.0 * a * (y[i] - m0[i]);
                return g;
            };
            phi.hessian = [a](const Vec& y) {
                Matrix h(static_cast<int>(y.size()), static_cast<int>(y.size()));
                for (int i = 0; i < h.rows(); ++i) h(i, i) = -2.0 * a;
                return h;
            };
            const PmpVerdict v = pmp_probe(c.model, c.set, phi);
            CHECK_FALSE(v.violation);
        }
    }
}

TEST_CASE("model audit: growth, symmetry, and the C = Sigma^2 consistency") {
    const ModelSpec cir = ModelSpec::cir(0.3, 0.1, 1.0);
    const std::vector<Vec> pts{{0.0}, {0.5}, {2.0}, {10.0}};
    const ModelAudit a = audit_model(cir, pts);
    CHECK(a.worst_sigma_asymmetry == 0.0);
    CHECK(a.worst_sigma_negative <= 0.0 + 1e-15);
    CHECK(a.worst_c_mismatch <= 1e-8);  // sigma0^2 x vs (sigma0 sqrt(x))^2 on the set
    // |b| + |Sigma|_HS = |0.3 - 0.1 x| + sqrt(x): bounded relative to 1 + |x|
    CHECK(a.max_growth_ratio <= 1.5);

    // asymmetric diffusion field is reported, not rejected
    ModelSpec rot;
    rot.dim = 2;
    rot.q_eigs = {1.0, 1.0};
    rot.drift = [](const Vec&) { return Vec{0.0, 0.0}; };
    rot.sigma_field = [](const Vec&) {
        Matrix s(2, 2);
        s(0, 1) = 1.0;
        s(1, 0) = -1.0;
        return s;
    };
    const ModelAudit ar = audit_model(rot, {{0.3, 0.4}});
    CHECK(ar.worst_sigma_asymmetry == doctest::Approx(2.0));
}

TEST_CASE("check_set aggregates rank profile and tail diagnostics") {
    const ModelSpec m = ModelSpec::orthant_diag({0.5, 1.0}, {0.1, 0.2});
    const CheckReport r = check_set(m, SetOracle::orthant(2), 30, 5);
    int total = 0;
    for (const auto& [rank, count] : r.rank_profile) total += count;
    CHECK(total == static_cast<int>(r.points.size()));
    CHECK(r.q_tail_fraction == doctest::Approx(0.5));
    CHECK(r.fd_step == doctest::Approx(1e-5));
}
