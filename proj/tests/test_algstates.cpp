#include "qrf/algstates.hpp"
#include "qrf/errors.hpp"
#include "support.hpp"
#include "three_particles.hpp"

#include <gtest/gtest.h>

using namespace qrf;
using namespace qrf::testing;

TEST(AlgebraicState, FrameConditionsOnPhysicalKet) {
    std::mt19937_64 rng(31);
    Three t(8);
    Mat Pi = group_average(t.s, t.C).matrix;
    Vec psi = Pi * random_vec(t.s.dim(), rng);
    for (int j : {-2, 0, 3}) {
        const double rho = t.frames[0].rho(j);
        auto w = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], rho, psi, 4);
        EXPECT_NEAR(std::abs(w.evaluate(AlgebraElement::one(t.gens)) - 1.0), 0.0, 1e-14);
        EXPECT_LT(check_frame_gauge(w, t.gens->index("q_A"), rho, 4), 1e-10);
        EXPECT_LT(check_constraint_surface(w, t.Calg, 4), 1e-10);
        // Tested at another reading, the a = 1 term alone gives |ρ - ρ'|.
        const double other = rho + t.frames[0].drho;
        EXPECT_GE(check_frame_gauge(w, t.gens->index("q_A"), other, 4), t.frames[0].drho - 1e-10);
    }
}

TEST(AlgebraicState, NotPhysical) {
    std::mt19937_64 rng(37);
    Three t(8);
    try {
        AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], 0.0, random_vec(t.s.dim(), rng));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotPhysical);
    }
}

TEST(AlgebraicState, KinematicalStateIsOffSurface) {
    std::mt19937_64 rng(41);
    Three t(8);
    Vec v = random_vec(t.s.dim(), rng);
    auto w = AlgebraicState::from_hilbert(t.gens, t.s, t.assign, v, v, 4);
    EXPECT_GT(check_constraint_surface(w, t.Calg, 4), 1e-2);
}

TEST(AlgebraicState, CanonicalRelationAndDegree) {
    std::mt19937_64 rng(43);
    Three t(8, 0.5);
    Vec v = random_vec(t.s.dim(), rng);
    auto w = AlgebraicState::from_hilbert(t.gens, t.s, t.assign, v, v, 3);
    const cplx d = w.evaluate(t.g("q_B") * t.g("p_B")) - w.evaluate(t.g("p_B") * t.g("q_B"));
    EXPECT_LT(std::abs(d - cplx(0, 0.5)), 1e-12);
    try {
        w.evaluate(t.g("q_A") * t.g("q_A") * t.g("p_S") * t.g("p_S"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegreeExceeded);
    }
}

TEST(AlgebraicState, MatchesDenseMatrixElement) {
    std::mt19937_64 rng(47);
    Three t(4);
    Vec a = random_vec(t.s.dim(), rng), b = random_vec(t.s.dim(), rng);
    auto w = AlgebraicState::from_hilbert(t.gens, t.s, t.assign, a, b, 5);
    auto dense = dense_assignment(t.s, t.assign);
    for (int k = 0; k < 10; ++k) {
        AlgebraElement x = random_element(t.gens, rng, 3, 4);
        const cplx want = a.dot(ncalg::represent(x, t.s.hbar(), dense) * b) / a.dot(b);
        EXPECT_LT(std::abs(w.evaluate(x) - want), 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST(AlgebraicState, RelationalObservableValue) {
    std::mt19937_64 rng(53);
    Three t(4);
    Mat Pi = group_average(t.s, t.C).matrix;
    Vec psi = Pi * random_vec(t.s.dim(), rng);
    const double rho = t.frames[0].rho(1);
    auto w = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], rho, psi, 4);
    for (int k = 0; k < 5; ++k) {
        Mat local = random_hermitian(4, rng);
        auto fS = make_operator(t.s.embed(2, local), {2});
        Mat O = relational_observable(t.s, t.C, t.frames[0], rho, fS, RelForm::kinematical).matrix;
        EXPECT_LT(std::abs(w.evaluate_operator(O) - w.evaluate_operator(fS.matrix)), 1e-10);
    }
}

TEST(AlgebraicState, TableBackingAndSerialization) {
    auto g = canonical_pairs({"R"});
    std::map<Exponents, cplx> tab{{{0, 0}, 1.0}, {{1, 0}, 2.0}, {{0, 1}, cplx(0, 3)}};
    auto w = AlgebraicState::from_table(g, tab, 1.0, 2);
    EXPECT_EQ(w.evaluate(AlgebraElement::generator(g, 0)), cplx(2.0));
    EXPECT_EQ(w.evaluate(AlgebraElement::generator(g, 0) * AlgebraElement::generator(g, 0)), cplx(0.0));
    const std::string csv = serialize_table(g, w.value_table(1));
    EXPECT_NE(csv.find("q_R,2,0"), std::string::npos);
    EXPECT_NE(csv.find("p_R,0,3"), std::string::npos);
    auto zero = AlgebraicState::from_table(g, {}, 1.0, 2);
    EXPECT_FALSE(check_almost_positive(zero, std::vector<int>{0, 1}, 2).normalized);
}

TEST(VerifyReferenceFrame, IdealPairPasses) {
    auto g = canonical_pairs({"R", "S"});
    auto q = [&](const std::string& n) { return AlgebraElement::generator(g, n); };
    AlgebraElement C = q("p_R") + QQi(Rational(1, 2)) * (q("p_S") * q("p_S"));
    auto rep = verify_reference_frame(q("q_R"), C, 6);
    EXPECT_EQ(rep.degree_bound, 6);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(VerifyReferenceFrame, MomentumIsNotAFrame) {
    auto g = canonical_pairs({"R", "S"});
    auto q = [&](const std::string& n) { return AlgebraElement::generator(g, n); };
    AlgebraElement C = q("p_R") + q("p_S");
    auto rep = verify_reference_frame(q("p_R"), C, 4);
    EXPECT_FALSE(rep.check("conjugate").passed);
}

TEST(VerifyReferenceFrame, DegenerateFactorPasses) {
    // H plays the role of √G_S: a hermitian generator commuting with everything else.
    auto g = ncalg::GeneratorSet::create({"q_R", "p_R", "H"}, {{0, 1, QQi(1), {}}});
    auto q = [&](const std::string& n) { return AlgebraElement::generator(g, n); };
    AlgebraElement full = q("p_R") * q("p_R") - q("H") * q("H");
    AlgebraElement minus = q("p_R") - q("H");
    EXPECT_FALSE(verify_reference_frame(q("q_R"), full, 5).check("conjugate").passed);
    auto rep = verify_reference_frame(q("q_R"), minus, 5);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(AlmostPositive, SystemPositiveFullAlgebraNot) {
    std::mt19937_64 rng(59);
    Three t(24);
    Vec psi = t.physical({12, 12, 12}, 1.2);
    auto w = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], 0.0, psi, 4);
    auto sys = check_almost_positive(w, std::vector<int>{t.gens->index("q_S"), t.gens->index("p_S")}, 4);
    // Normal ordering uses the canonical relation, which the lattice meets only up to wraparound tails.
    EXPECT_TRUE(sys.positive(1e-6)) << sys.min_eigenvalue << " " << sys.hermiticity_defect;
    // Symmetrized q_R p_R has expectation with imaginary part -ℏ/2.
    const cplx sym = 0.5 * (w.evaluate(t.g("p_A") * t.g("q_A")) + w.evaluate(t.g("q_A") * t.g("p_A")));
    EXPECT_NEAR(sym.imag(), -0.5, 1e-10);
    auto full = check_almost_positive(w, std::vector<int>{}, 2);
    EXPECT_FALSE(full.positive());
}

TEST(TransformFrame, MomentumLawIsExact) {
    Three t(12);
    Vec psi = t.physical({6, 6.5, 5.5}, 1.1);
    const double rA = t.frames[0].rho(1), rB = t.frames[1].rho(-1);
    auto wA = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], rA, psi, 4);
    auto wB = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[1], rB, psi, 4);
    FramePair fp{t.gens->index("q_A"), t.gens->index("p_A"), t.gens->index("q_B"), t.gens->index("p_B"), t.g("p_S"), rA, rB};
    EXPECT_LT(std::abs(transform_frame(wB, fp, t.g("p_B")) - wA.evaluate(t.g("p_B"))), 1e-10);
    EXPECT_LT(std::abs(transform_frame(wB, fp, t.g("p_B") * t.g("p_B")) - wA.evaluate(t.g("p_B") * t.g("p_B"))), 1e-10);
    // p_S commutes with G_S = p_S.
    EXPECT_LT(std::abs(transform_frame(wB, fp, t.g("p_S")) - wA.evaluate(t.g("p_S"))), 1e-10);
    EXPECT_LT(std::abs(transform_frame(wB, fp, t.g("p_S")) - wB.evaluate(t.g("p_S"))), 1e-10);
}

TEST(TransformFrame, PositionLawOnLocalizedStates) {
    Three t(24);
    Vec psi = t.physical({12, 12, 12}, 1.2);
    const double rA = 0.0, rB = t.frames[1].rho(1);
    auto wA = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[0], rA, psi, 4);
    auto wB = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[1], rB, psi, 4);
    FramePair fp{t.gens->index("q_A"), t.gens->index("p_A"), t.gens->index("q_B"), t.gens->index("p_B"), t.g("p_S"), rA, rB};
    const cplx lhs = wA.evaluate(t.g("q_B"));
    EXPECT_LT(std::abs(lhs - (rA + rB - wB.evaluate(t.g("q_A")))), 1e-8);
    EXPECT_LT(std::abs(transform_frame(wB, fp, t.g("q_B")) - lhs), 1e-8);
    const AlgebraElement qs = t.g("q_S");
    EXPECT_LT(std::abs(transform_frame(wB, fp, qs) - wA.evaluate(qs)), 1e-8);
    const AlgebraElement mixed = t.g("q_B") * t.g("p_B") * t.g("q_S");
    // Higher moments weight the wraparound tails more.
    EXPECT_LT(std::abs(transform_frame(wB, fp, mixed) - wA.evaluate(mixed)), 1e-7);
}

TEST(TransformFrame, OrderingAndSupportErrors) {
    Three t(4);
    Mat Pi = group_average(t.s, t.C).matrix;
    Vec psi = Pi * Vec::Ones(t.s.dim());
    auto wB = AlgebraicState::frame_state(t.gens, t.s, t.assign, t.C, t.frames[1], 0.0, psi, 4);
    FramePair bad{0, 1, 3, 2, t.g("p_S"), 0.0, 0.0};
    try {
        transform_frame(wB, bad, t.g("p_B"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OrderingViolation);
    }
    FramePair fp{0, 1, 2, 3, t.g("p_S"), 0.0, 0.0};
    EXPECT_THROW(transform_frame(wB, fp, t.g("q_A")), Error);
}

TEST(RelationalSeries, NewtonianPosition) {
    auto g = canonical_pairs({"C", "S"});
    auto q = [&](const std::string& n) { return AlgebraElement::generator(g, n); };
    FramePair fp{0, 1, -1, -1, QQi(Rational(1, 2)) * (q("p_S") * q("p_S")), 0.0, 0.0};
    auto series = ideal_relational_series(fp, q("q_S"));
    AlgebraElement sum(g);
    for (const auto& [wgt, el] : series) {
        ASSERT_EQ(wgt.imag(), 0.0);
        sum += QQi(static_cast<long>(wgt.real())) * el;
    }
    EXPECT_EQ(sum, q("q_S") - q("q_C") * q("p_S"));
}
