#include "qrf/errors.hpp"
#include "qrf/ncalg.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace qrf;
using namespace qrf::ncalg;
using qrf::testing::canonical_pairs;
using qrf::testing::pair_and_su2;
using qrf::testing::random_element;

namespace {

const QQi I = QQi::i();

AlgebraElement gen(const GenPtr& g, const char* n) { return AlgebraElement::generator(g, n); }

}  // namespace

TEST(Ncalg, CanonicalCommutator) {
    auto g = canonical_pairs({"A"});
    auto q = gen(g, "q_A"), p = gen(g, "p_A");
    EXPECT_EQ(q * p - p * q, AlgebraElement::scalar(g, I, 2));
    EXPECT_EQ((p * q).str(), "1*q_A*p_A + -1i*hbar^1");
}

TEST(Ncalg, Su2Commutator) {
    auto g = pair_and_su2();
    auto jx = gen(g, "Jx"), jy = gen(g, "Jy"), jz = gen(g, "Jz");
    EXPECT_EQ(commutator(jx, jy), I * jz.times_hbar(2));
    EXPECT_EQ(commutator(jy, jz), I * jx.times_hbar(2));
    EXPECT_EQ(commutator(jz, jx), I * jy.times_hbar(2));
    EXPECT_TRUE(commutator(gen(g, "q"), jx).is_zero());
}

TEST(Ncalg, IdentityIsUnit) {
    auto g = pair_and_su2();
    std::mt19937_64 rng(1);
    auto a = random_element(g, rng);
    EXPECT_EQ(a * AlgebraElement::one(g), a);
    EXPECT_EQ(AlgebraElement::one(g) * a, a);
}

TEST(Ncalg, FrameConditionCommutator) {
    // [q_A, p_A + p_B + G_S] with G_S built from an su(2) generator.
    std::vector<std::string> names{"q_A", "p_A", "q_B", "p_B", "Jx", "Jy", "Jz"};
    std::vector<Relation> rel{{0, 1, QQi(1), {}}, {2, 3, QQi(1), {}},
                              {4, 5, QQi(0), {{6, QQi(1)}}}, {5, 6, QQi(0), {{4, QQi(1)}}},
                              {6, 4, QQi(0), {{5, QQi(1)}}}};
    auto g = GeneratorSet::create(names, rel);
    auto C = gen(g, "p_A") + gen(g, "p_B") - QQi(3) * gen(g, "Jz");
    EXPECT_EQ(commutator(gen(g, "q_A"), C), AlgebraElement::scalar(g, I, 2));
}

TEST(Ncalg, WeylTwoOrderings) {
    auto g = canonical_pairs({"R"});
    auto w = weyl_symmetrize(g, {1, 1});
    auto q = gen(g, "q_R"), p = gen(g, "p_R");
    EXPECT_EQ(w, q * p - AlgebraElement::scalar(g, I * QQi(Rational(1, 2)), 2));
    EXPECT_EQ(weyl_symmetrize(g, {2, 0}), q * q);
}

TEST(Ncalg, WeylMatchesBruteForcePermutations) {
    auto g = pair_and_su2();
    for (Exponents e : {Exponents{2, 1, 0, 0, 0}, Exponents{1, 2, 0, 0, 0}, Exponents{0, 0, 1, 1, 1},
                        Exponents{0, 0, 2, 1, 0}, Exponents{1, 1, 1, 0, 1}}) {
        std::vector<int> word;
        for (int i = 0; i < g->size(); ++i)
            for (int r = 0; r < e[static_cast<size_t>(i)]; ++r) word.push_back(i);
        // Every permutation (with repetitions) weighted equally equals the distinct-ordering average.
        std::vector<int> idx(word.size());
        std::iota(idx.begin(), idx.end(), 0);
        AlgebraElement sum(g);
        long count = 0;
        do {
            AlgebraElement prod = AlgebraElement::one(g);
            for (int k : idx) prod = prod * AlgebraElement::generator(g, word[static_cast<size_t>(k)]);
            sum += prod;
            ++count;
        } while (std::next_permutation(idx.begin(), idx.end()));
        EXPECT_EQ(weyl_symmetrize(g, e), QQi(Rational(1, count)) * sum) << sum.str();
    }
}

TEST(Ncalg, AdjointBasics) {
    auto g = canonical_pairs({"R"});
    auto q = gen(g, "q_R"), p = gen(g, "p_R");
    EXPECT_EQ(adjoint(q * p), p * q);
    EXPECT_EQ(adjoint(q * p), q * p - AlgebraElement::scalar(g, I, 2));
    EXPECT_EQ(adjoint(q), q);
}

TEST(Ncalg, AdjointReversesProducts) {
    auto g = pair_and_su2();
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        auto a = random_element(g, rng), b = random_element(g, rng);
        EXPECT_EQ(adjoint(a * b), adjoint(b) * adjoint(a));
        EXPECT_EQ(adjoint(adjoint(a)), a);
    }
}

TEST(Ncalg, JacobiRandomTriples) {
    auto g = pair_and_su2();
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        auto a = random_element(g, rng), b = random_element(g, rng), c = random_element(g, rng);
        auto jac = commutator(commutator(a, b), c) + commutator(commutator(b, c), a) + commutator(commutator(c, a), b);
        EXPECT_TRUE(jac.is_zero()) << jac.str();
    }
}

TEST(Ncalg, AssociativityAndDegreeBounds) {
    auto g = pair_and_su2();
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        auto a = random_element(g, rng), b = random_element(g, rng), c = random_element(g, rng);
        EXPECT_TRUE(associativity_holds(a, b, c));
        EXPECT_LE((a * b).degree(), a.degree() + b.degree());
        auto cm = commutator(a, b);
        if (!cm.is_zero()) EXPECT_LE(cm.degree(), a.degree() + b.degree() - 1);
    }
    auto cp = canonical_pairs({"A", "B"});
    for (int t = 0; t < 20; ++t) {
        auto a = random_element(cp, rng), b = random_element(cp, rng);
        auto cm = commutator(a, b);
        if (!cm.is_zero()) EXPECT_LE(cm.degree(), a.degree() + b.degree() - 2);
    }
}

TEST(Ncalg, HbarCountsRewrites) {
    // Each rewrite of p·q contributes one iℏ; p^n·q^n has terms ℏ^k·q^{n-k}p^{n-k}.
    auto g = canonical_pairs({"R"});
    auto q = gen(g, "q_R"), p = gen(g, "p_R");
    AlgebraElement pn = AlgebraElement::one(g), qn = AlgebraElement::one(g);
    for (int k = 0; k < 3; ++k) {
        pn = pn * p;
        qn = qn * q;
    }
    auto prod = pn * qn;
    EXPECT_EQ(prod.terms().size(), 4u);
    for (const auto& [k, c] : prod.terms()) EXPECT_EQ(k.hgrade, 2 * (3 - k.exps[0]));
}

TEST(Ncalg, DegreeCap) {
    auto g = GeneratorSet::create({"q", "p"}, {{0, 1, QQi(1), {}}}, 4);
    auto q = gen(g, "q");
    auto q3 = q * q * q;
    try {
        (void)(q3 * q3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegreeExceeded);
    }
}

TEST(Ncalg, JacobiCheckedAtConstruction) {
    // [x,y]=iℏz, [y,z]=iℏx, [z,x]=iℏz breaks Jacobi.
    try {
        GeneratorSet::create({"x", "y", "z"}, {{0, 1, QQi(0), {{2, QQi(1)}}}, {1, 2, QQi(0), {{0, QQi(1)}}},
                                               {2, 0, QQi(0), {{2, QQi(1)}}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RelationViolation);
    }
}

TEST(Ncalg, ToWeylBasisRoundTrip) {
    auto g = pair_and_su2();
    std::mt19937_64 rng(17);
    for (int t = 0; t < 10; ++t) {
        auto a = random_element(g, rng);
        AlgebraElement back(g);
        for (const auto& [k, c] : to_weyl_basis(a)) back += c * weyl_symmetrize(g, k.exps).times_hbar(k.hgrade);
        EXPECT_EQ(back, a);
    }
}

TEST(Ncalg, RepresentSpinOne) {
    auto g = pair_and_su2();
    const double h = 0.5;
    const double s = h / std::sqrt(2.0);
    Eigen::MatrixXcd jx(3, 3), jy(3, 3), jz = Eigen::MatrixXcd::Zero(3, 3);
    jx << 0, s, 0, s, 0, s, 0, s, 0;
    const cplx i(0, 1);
    jy << 0, -i * s, 0, i * s, 0, -i * s, 0, i * s, 0;
    jz(0, 0) = h;
    jz(2, 2) = -h;
    // q and p act trivially here; only the su(2) block is exercised.
    Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(3, 3);
    std::vector<Eigen::MatrixXcd> asg{zero, zero, jx, jy, jz};
    auto rep = check_representation(g, h, asg);
    EXPECT_LT(rep.lie_residual, 1e-14);
    auto jx_ = gen(g, "Jx"), jy_ = gen(g, "Jy");
    Eigen::MatrixXcd lhs = represent(jx_ * jy_, h, asg);
    EXPECT_LT((lhs - jx * jy).norm(), 1e-14);
    EXPECT_LT((represent(AlgebraElement::one(g), h, asg) - Eigen::MatrixXcd::Identity(3, 3)).norm(), 0.0 + 1e-15);
    asg[2] = 2.0 * jx;
    EXPECT_THROW(check_representation(g, h, asg), Error);
}
