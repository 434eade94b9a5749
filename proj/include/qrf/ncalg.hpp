#pragma once

#include "qrf/exact.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace qrf::ncalg {

using Exponents = std::vector<int>;

/**
 * @brief [y_i, y_j] = iℏ·(identity·1 + Σ_k lie[k]·y_k).
 *
 * A relation with an empty lie part and nonzero identity marks a canonical pair.
 * Pairs that are not listed commute.
 */
struct Relation {
    int i = 0;
    int j = 0;
    QQi identity;
    std::vector<std::pair<int, QQi>> lie;
};

/// Normal-ordered monomial together with its power of ℏ^{1/2}.
struct TermKey {
    Exponents exps;
    int hgrade = 0;

    friend bool operator<(const TermKey& a, const TermKey& b) {
        if (a.exps != b.exps) return a.exps < b.exps;
        return a.hgrade < b.hgrade;
    }
    friend bool operator==(const TermKey& a, const TermKey& b) {
        return a.exps == b.exps && a.hgrade == b.hgrade;
    }
};

using TermMap = std::map<TermKey, QQi>;

int degree(const Exponents& e);

/**
 * @brief Ordered list of hermitian generators with their commutation table.
 *
 * The generator order is the normal order; list q before p for each canonical pair.
 * Construction checks antisymmetry and the Jacobi identity of the table.
 */
class GeneratorSet {
public:
    static std::shared_ptr<const GeneratorSet> create(std::vector<std::string> names,
                                                      const std::vector<Relation>& relations,
                                                      int degree_cap = 12);

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int i) const { return names_.at(static_cast<size_t>(i)); }
    const std::vector<std::string>& names() const { return names_; }
    /// Index of a generator by name, -1 if absent.
    int index(const std::string& name) const;
    int degree_cap() const { return cap_; }

    /// Identity part of [y_i, y_j]/(iℏ).
    const QQi& identity_part(int i, int j) const { return alpha0_[idx(i, j)]; }
    /// Coefficient of y_k in [y_i, y_j]/(iℏ).
    const QQi& lie_part(int i, int j, int k) const { return alpha_[idx(i, j) * names_.size() + static_cast<size_t>(k)]; }
    bool commute(int i, int j) const { return trivial_[idx(i, j)]; }
    bool is_canonical_pair(int i, int j) const;
    /// True when every relation involving i is canonical or trivial.
    bool has_only_canonical(int i) const;

    Exponents unit(int i) const;

    // Memoized rewriting kernels shared by all elements over this set.
    TermMap right_multiply(const Exponents& m, int g) const;
    TermMap monomial_product(const Exponents& a, const Exponents& b) const;
    TermMap weyl(const Exponents& m) const;

private:
    GeneratorSet() = default;
    size_t idx(int i, int j) const { return static_cast<size_t>(i) * names_.size() + static_cast<size_t>(j); }
    TermMap right_multiply_unlocked(const Exponents& m, int g) const;
    TermMap monomial_product_unlocked(const Exponents& a, const Exponents& b) const;

    std::vector<std::string> names_;
    std::vector<QQi> alpha0_;
    std::vector<QQi> alpha_;
    std::vector<char> trivial_;
    int cap_ = 12;

    mutable std::recursive_mutex mu_;
    mutable std::map<std::pair<Exponents, int>, TermMap> rmul_cache_;
    mutable std::map<std::pair<Exponents, Exponents>, TermMap> prod_cache_;
    mutable std::map<Exponents, TermMap> weyl_cache_;
};

using GenPtr = std::shared_ptr<const GeneratorSet>;

/**
 * @brief Polynomial in the generators, stored in normal order with exact coefficients.
 */
class AlgebraElement {
public:
    AlgebraElement() = default;
    explicit AlgebraElement(GenPtr gens) : gens_(std::move(gens)) {}
    AlgebraElement(GenPtr gens, TermMap terms);

    static AlgebraElement one(const GenPtr& gens) { return scalar(gens, QQi(1)); }
    static AlgebraElement scalar(const GenPtr& gens, const QQi& c, int hgrade = 0);
    static AlgebraElement generator(const GenPtr& gens, int i);
    static AlgebraElement generator(const GenPtr& gens, const std::string& name);
    static AlgebraElement monomial(const GenPtr& gens, const Exponents& e, const QQi& c = QQi(1), int hgrade = 0);

    const GenPtr& gens() const { return gens_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    /// Highest monomial degree, -1 for zero.
    int degree() const;
    /// Coefficient of ℏ^{hgrade/2}·m.
    QQi coefficient(const Exponents& m, int hgrade = 0) const;

    AlgebraElement& operator+=(const AlgebraElement& o);
    AlgebraElement& operator-=(const AlgebraElement& o);
    friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
    friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
    AlgebraElement operator-() const;
    friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b);
    friend AlgebraElement operator*(const QQi& c, AlgebraElement a);
    /// Multiply by ℏ^{k/2}.
    AlgebraElement times_hbar(int k) const;

    friend bool operator==(const AlgebraElement& a, const AlgebraElement& b) { return a.terms_ == b.terms_; }
    friend bool operator!=(const AlgebraElement& a, const AlgebraElement& b) { return !(a == b); }

    /// Sorted terms with exact literals, e.g. "1*q*p + (-1/2i)*hbar".
    std::string str() const;

private:
    void add_term(const TermKey& k, const QQi& c);
    friend void add_into(TermMap& t, const TermKey& k, const QQi& c);

    GenPtr gens_;
    TermMap terms_;
};

void add_into(TermMap& t, const TermKey& k, const QQi& c);

AlgebraElement multiply(const AlgebraElement& a, const AlgebraElement& b);
AlgebraElement commutator(const AlgebraElement& a, const AlgebraElement& b);
/// Average over all distinct orderings of the generator multiset, in normal order.
AlgebraElement weyl_symmetrize(const GenPtr& gens, const Exponents& m);
AlgebraElement adjoint(const AlgebraElement& a);
/// a/(iℏ); every term must carry at least one power of ℏ.
AlgebraElement divide_ihbar(const AlgebraElement& a);
/// All exponent vectors of total degree ≤ max_degree over the listed generators, degree-ascending.
std::vector<Exponents> monomial_basis(const GenPtr& gens, int max_degree, const std::vector<int>& among = {});
/// Coefficients c such that a = Σ c·ℏ^{g/2}·Weyl(m).
TermMap to_weyl_basis(const AlgebraElement& a);

/// Number of commutator rewrites is path independent: compare (a·b)·c with a·(b·c).
bool associativity_holds(const AlgebraElement& a, const AlgebraElement& b, const AlgebraElement& c);

struct RepresentationReport {
    double lie_residual = 0.0;        ///< max over non-canonical relations, full operator norm
    double canonical_residual = 0.0;  ///< max over canonical relations on the declared test states
};

/**
 * @brief Checks the commutation table on matrices.
 *
 * Throws RelationViolation if a Lie-type (non-canonical) relation misses by more than 1e-10.
 */
RepresentationReport check_representation(const GenPtr& gens, double hbar,
                                          const std::vector<Eigen::MatrixXcd>& assignment,
                                          const std::vector<Eigen::VectorXcd>& test_states = {});

/// Numerical image of a under generator → matrix.
Eigen::MatrixXcd represent(const AlgebraElement& a, double hbar,
                           const std::vector<Eigen::MatrixXcd>& assignment);

}  // namespace qrf::ncalg
