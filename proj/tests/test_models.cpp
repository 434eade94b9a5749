#include "qrf/errors.hpp"
#include "qrf/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace qrf;
using namespace qrf::models;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::ConfigError;
}

int kernel_dim(const Model& m) { return static_cast<int>(m.project(Vec::Ones(m.space.dim())).cwiseAbs().sum() + 0.5); }

}  // namespace

TEST(Models, NParticleDimensionAndConstraint) {
    const Model m = build_model(default_spec(ModelKind::nparticle));
    EXPECT_EQ(m.space.dim(), 512);
    EXPECT_EQ(m.frames.size(), 3u);
    // Σp = 0 with p ∈ {-4, …, 3}: pairs (p_A, p_B) with −p_A − p_B on the lattice.
    int expected = 0;
    for (int a = -4; a < 4; ++a)
        for (int b = -4; b < 4; ++b)
            if (-a - b >= -4 && -a - b < 4) ++expected;
    EXPECT_EQ(kernel_dim(m), expected);
    EXPECT_EQ(m.C_alg, m.g("p_A") + m.g("p_B") + m.g("p_C"));
}

TEST(Models, Su2SystemIsThreeDimensional) {
    ModelSpec spec = default_spec(ModelKind::su2);
    spec.j = 1;
    const Model m = build_model(spec);
    EXPECT_EQ(m.space.factor(2).N, 3);
    EXPECT_EQ(m.space.dim(), 16 * 16 * 3);
    EXPECT_EQ(m.gens->size(), 7);
}

TEST(Models, DegenerateHasTwoNonemptySectors) {
    const Model m = build_model(default_spec(ModelKind::degenerate));
    const auto [Pp, Pm] = sector_projectors(m.space, 0);
    const Vec mask = m.project(Vec::Ones(m.space.dim()));
    EXPECT_NEAR((Pp.matrix * mask).squaredNorm(), 2.0, 1e-12);
    EXPECT_NEAR((Pm.matrix * mask).squaredNorm(), 2.0, 1e-12);
}

TEST(Models, EveryDeclaredFrameVerifies) {
    for (auto k : {ModelKind::newtonian, ModelKind::nparticle, ModelKind::su2, ModelKind::degenerate}) {
        const Model m = build_model(default_spec(k));
        ASSERT_FALSE(m.frame_checks.empty()) << kind_name(k);
        for (const auto& r : m.frame_checks) EXPECT_TRUE(r.all_passed()) << kind_name(k);
    }
}

TEST(Models, IncommensurableParametersAreRejected) {
    ModelSpec su2 = default_spec(ModelKind::su2);
    su2.beta = Rational(1, 3);
    try {
        build_model(su2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IncommensurableSpectrum);
        EXPECT_NE(std::string(e.what()).find("integer multiple of 1"), std::string::npos) << e.what();
    }
    ModelSpec half = default_spec(ModelKind::su2);
    half.j = Rational(1, 2);
    EXPECT_EQ(kind_of([&] { build_model(half); }), ErrorKind::IncommensurableSpectrum);
    half.beta = 2;
    EXPECT_NO_THROW(build_model(half));

    ModelSpec newton = default_spec(ModelKind::newtonian);
    newton.dp = Rational(1, 3);
    EXPECT_EQ(kind_of([&] { build_model(newton); }), ErrorKind::IncommensurableSpectrum);
    ModelSpec deg = default_spec(ModelKind::degenerate);
    deg.mass = Rational(1, 2);
    EXPECT_EQ(kind_of([&] { build_model(deg); }), ErrorKind::IncommensurableSpectrum);
    deg.mass = 8;
    EXPECT_EQ(kind_of([&] { build_model(deg); }), ErrorKind::IncommensurableSpectrum);
    EXPECT_EQ(kind_of([] { parse_kind("relativistic"); }), ErrorKind::ConfigError);
}

TEST(Models, SpinMatrices) {
    for (const Rational j : {Rational(1, 2), Rational(1), Rational(3, 2)}) {
        const double hbar = 0.7, jj = to_double(j);
        const auto J = spin_matrices(j, hbar);
        const cplx I(0, 1);
        EXPECT_LT((J.x * J.y - J.y * J.x - I * hbar * J.z).norm(), 1e-12);
        EXPECT_LT((J.y * J.z - J.z * J.y - I * hbar * J.x).norm(), 1e-12);
        const Mat cas = J.x * J.x + J.y * J.y + J.z * J.z;
        EXPECT_LT((cas - hbar * hbar * jj * (jj + 1) * Mat::Identity(cas.rows(), cas.cols())).norm(), 1e-12);
        // Spin-coherent expectation points along (θ, φ).
        const double th = 1.1, ph = 0.5;
        const Vec v = spin_coherent(j, th, ph);
        EXPECT_NEAR(v.norm(), 1.0, 1e-12);
        EXPECT_NEAR(v.dot(J.x * v).real(), hbar * jj * std::sin(th) * std::cos(ph), 1e-12);
        EXPECT_NEAR(v.dot(J.y * v).real(), hbar * jj * std::sin(th) * std::sin(ph), 1e-12);
        EXPECT_NEAR(v.dot(J.z * v).real(), hbar * jj * std::cos(th), 1e-12);
    }
}

TEST(Models, InitialStateIsPhysicalAndLocalized) {
    for (auto k : {ModelKind::newtonian, ModelKind::nparticle, ModelKind::su2, ModelKind::degenerate}) {
        const Model m = build_model(default_spec(k));
        const Vec psi = m.initial_state();
        EXPECT_NEAR(psi.norm(), 1.0, 1e-12);
        EXPECT_LT((m.C.diag.cast<cplx>().cwiseProduct(psi)).norm(), 1e-12) << kind_name(k);
    }
    StateRecipe r = default_spec(ModelKind::nparticle).state;
    r.shear = 0.1;
    const Model m = build_model(default_spec(ModelKind::nparticle));
    EXPECT_GT((m.initial_state(r) - m.initial_state()).norm(), 1e-3);
}

TEST(Models, ReducedAssignment) {
    const Model m = build_model(default_spec(ModelKind::nparticle));
    const auto ra = reduced_assignment(m, 1);
    ASSERT_EQ(ra.size(), m.assignment.size());
    EXPECT_EQ(ra[static_cast<size_t>(m.generator("q_B"))].local.norm(), 0.0);
    EXPECT_EQ(ra[static_cast<size_t>(m.generator("q_C"))].factor, 1);
    EXPECT_EQ(ra[static_cast<size_t>(m.generator("q_A"))].factor, 0);
}

TEST(Models, ReportGating) {
    Report r{"s", "m", {}};
    r.rows.push_back({"a", "x", 0.0, 1e-12, std::nullopt, true});
    r.rows.push_back({"b", "x", 0.0, 1.0, std::nullopt, false});
    EXPECT_TRUE(r.passed(1e-10));
    r.rows.push_back({"c", "x", 0.0, 0.1, 0.2, true});
    EXPECT_TRUE(r.passed(1e-10));
    EXPECT_DOUBLE_EQ(r.worst(1e-10), 0.5);
    r.rows.push_back({"d", "x", 0.0, NAN, std::nullopt, true});
    EXPECT_FALSE(r.passed(1e-10));
}

TEST(Models, LogLogSlope) {
    std::vector<double> h{1, 0.5, 0.25, 0.125}, d;
    for (double x : h) d.push_back(3.0 * std::pow(x, 1.5));
    EXPECT_NEAR(loglog_slope(h, d), 1.5, 1e-12);
}

TEST(Models, NewtonianEquivalenceChain) {
    const Model m = build_model(default_spec(ModelKind::newtonian));
    EquivalenceOptions opt;
    opt.states = 2;
    opt.observables = 4;
    const Report r = run_equivalence_suite(m, opt);
    EXPECT_TRUE(r.passed(1e-10)) << r.worst(1e-10);
    EXPECT_EQ(kind_of([] { run_equivalence_suite(build_model(default_spec(ModelKind::degenerate))); }),
              ErrorKind::UnsupportedForm);
}

TEST(Models, DegenerateSuiteAndBattery) {
    const Model m = build_model(default_spec(ModelKind::degenerate));
    const Report d = run_degenerate_suite(m);
    EXPECT_TRUE(d.passed(1e-10)) << d.worst(1e-10);
    const Report p = run_projector_battery(m);
    EXPECT_TRUE(p.passed(1e-10)) << p.worst(1e-10);
}

TEST(Models, NewtonianProjectorBattery) {
    const Report p = run_projector_battery(build_model(default_spec(ModelKind::newtonian)));
    EXPECT_TRUE(p.passed(1e-10)) << p.worst(1e-10);
    EXPECT_FALSE(p.rows.empty());
}

TEST(Models, ScalingLadderValidation) {
    ScalingOptions opt;
    opt.ladder = {Rational(1), Rational(3, 4)};
    EXPECT_EQ(kind_of([&] { run_scaling_experiment(default_spec(ModelKind::su2), opt); }), ErrorKind::ConfigError);
    opt.ladder = {Rational(1)};
    EXPECT_EQ(kind_of([&] { run_scaling_experiment(default_spec(ModelKind::su2), opt); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([] { run_scaling_experiment(default_spec(ModelKind::nparticle)); }), ErrorKind::UnsupportedForm);
}
