#pragma once

#include "qrf/ncalg.hpp"

#include <random>

namespace qrf::testing {

using ncalg::AlgebraElement;
using ncalg::GenPtr;
using ncalg::Relation;

/// Canonical pairs (q_i, p_i) listed in order q_0, p_0, q_1, p_1, ...
inline GenPtr canonical_pairs(const std::vector<std::string>& labels) {
    std::vector<std::string> names;
    std::vector<Relation> rel;
    for (size_t i = 0; i < labels.size(); ++i) {
        names.push_back("q_" + labels[i]);
        names.push_back("p_" + labels[i]);
        rel.push_back({static_cast<int>(2 * i), static_cast<int>(2 * i + 1), QQi(1), {}});
    }
    return ncalg::GeneratorSet::create(names, rel);
}

/// q, p pair followed by an su(2) triple.
inline GenPtr pair_and_su2() {
    std::vector<std::string> names{"q", "p", "Jx", "Jy", "Jz"};
    std::vector<Relation> rel{{0, 1, QQi(1), {}},
                              {2, 3, QQi(0), {{4, QQi(1)}}},
                              {3, 4, QQi(0), {{2, QQi(1)}}},
                              {4, 2, QQi(0), {{3, QQi(1)}}}};
    return ncalg::GeneratorSet::create(names, rel);
}

inline QQi random_qqi(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-5, 5), den(1, 4), coin(0, 2);
    Rational re(num(rng), den(rng));
    Rational im = coin(rng) == 0 ? Rational(num(rng), den(rng)) : Rational(0);
    return QQi(re, im);
}

inline AlgebraElement random_element(const GenPtr& g, std::mt19937_64& rng, int max_deg = 3, int max_terms = 4) {
    std::uniform_int_distribution<int> nterms(1, max_terms), gen(0, g->size() - 1), deg(0, max_deg);
    AlgebraElement out(g);
    int t = nterms(rng);
    for (int k = 0; k < t; ++k) {
        ncalg::Exponents e(static_cast<size_t>(g->size()), 0);
        int d = deg(rng);
        for (int r = 0; r < d; ++r) ++e[static_cast<size_t>(gen(rng))];
        out += AlgebraElement::monomial(g, e, random_qqi(rng));
    }
    return out;
}

}  // namespace qrf::testing

#include "qrf/kinspace.hpp"

#include <Eigen/Eigenvalues>

namespace qrf::testing {

inline Vec random_vec(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    return v;
}

inline Mat random_hermitian(int n, std::mt19937_64& rng) {
    Mat a(n, n);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    return (a + a.adjoint()) / 2.0;
}

/// e^{i t H} for hermitian H through its eigendecomposition.
inline Mat expi_hermitian(const Mat& H, double t) {
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    Vec ph(H.rows());
    for (Eigen::Index i = 0; i < H.rows(); ++i) ph(i) = std::polar(1.0, t * es.eigenvalues()(i));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Discretized Gaussian on a lattice factor, indexed like the momentum basis.
inline Vec gaussian(int n, double center, double width, double kick = 0.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) {
        const double x = i - center;
        v(i) = std::exp(-x * x / (4 * width * width)) * std::polar(1.0, kick * i);
    }
    return v.normalized();
}

}  // namespace qrf::testing
