#pragma once

#include "qrf/kinspace.hpp"
#include "qrf/ncalg.hpp"
#include "qrf/relobs.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace qrf {

using ncalg::AlgebraElement;
using ncalg::Exponents;
using ncalg::GenPtr;

/**
 * @brief Image of one generator on the lattice.
 *
 * Either a local matrix on one factor (factor ≥ 0) or a full-space matrix (factor = -1).
 */
struct GeneratorImage {
    int factor = -1;
    Mat local;

    static GeneratorImage on(int factor, Mat m) { return {factor, std::move(m)}; }
    static GeneratorImage full(Mat m) { return {-1, std::move(m)}; }
};

using GeneratorAssignment = std::vector<GeneratorImage>;

/// Dense full-space matrices of an assignment, for ncalg::represent and small checks.
std::vector<Mat> dense_assignment(const LatticeSpace& s, const GeneratorAssignment& a);
/// v ↦ image·v without forming full matrices for local images.
Vec apply_generator(const LatticeSpace& s, const GeneratorImage& g, const Vec& v);

/**
 * @brief Normalized linear functional on the algebra, up to degree D.
 *
 * Hilbert backing: ω(a) = ⟨bra|π(a)|ket⟩ / ⟨bra|ket⟩ with π the normal-ordered representation.
 * Table backing: values of normal-ordered monomials.
 */
class AlgebraicState {
public:
    static constexpr int default_degree = 8;

    static AlgebraicState from_hilbert(GenPtr gens, const LatticeSpace& space, GeneratorAssignment assignment, Vec bra,
                                       Vec ket, int D = default_degree);
    /// bra = Θ(ρ)ket on the given frame, i.e. ω(a) = ⟨ψ|Θ(ρ) a|ψ⟩ / ⟨ψ|Θ(ρ)|ψ⟩. Raises NotPhysical.
    static AlgebraicState frame_state(GenPtr gens, const LatticeSpace& space, GeneratorAssignment assignment,
                                      const Constraint& C, const OrientationFrame& frame, double rho, Vec ket,
                                      int D = default_degree);
    static AlgebraicState from_table(GenPtr gens, std::map<Exponents, cplx> table, double hbar,
                                     int D = default_degree);

    cplx evaluate(const AlgebraElement& a) const;
    cplx evaluate_monomial(const Exponents& m) const;
    /// ⟨bra|M|ket⟩/⟨bra|ket⟩ for a full-space operator; Hilbert backing only.
    cplx evaluate_operator(const Mat& M) const;

    bool hilbert_backed() const { return space_.has_value(); }
    const GenPtr& gens() const { return gens_; }
    int degree_bound() const { return D_; }
    double hbar() const { return hbar_; }
    const Vec& bra() const { return bra_; }
    const Vec& ket() const { return ket_; }
    const LatticeSpace& space() const { return *space_; }
    const GeneratorAssignment& assignment() const { return assignment_; }

    /// Same ket and assignment with a new bra (renormalized).
    AlgebraicState with_bra(Vec bra) const;
    /// Monomial → value over the basis up to degree D, for serialization.
    std::map<Exponents, cplx> value_table(int D) const;

private:
    AlgebraicState() = default;
    Vec apply_monomial(const Exponents& m) const;

    GenPtr gens_;
    int D_ = default_degree;
    double hbar_ = 1.0;
    std::optional<LatticeSpace> space_;
    GeneratorAssignment assignment_;
    Vec bra_, ket_;
    cplx norm_ = 1.0;
    std::map<Exponents, cplx> table_;

    struct Cache {
        std::mutex mu;
        std::map<Exponents, cplx> values;
        std::map<Exponents, Vec> vectors;
    };
    std::shared_ptr<Cache> cache_;
};

/// Writes "exponents,re,im" lines sorted by monomial.
std::string serialize_table(const GenPtr& gens, const std::map<Exponents, cplx>& table);

/// max over monomials a with deg ≤ D − deg(C) of |ω(a·C)|.
double check_constraint_surface(const AlgebraicState& w, const AlgebraElement& C, int D);
/// max over monomials a with deg ≤ D − 1 of |ω((Z − ρ)·a)|.
double check_frame_gauge(const AlgebraicState& w, int Z, double rho, int D);

struct FrameCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct FrameReport {
    int degree_bound = 0;
    std::vector<FrameCheck> checks;
    bool all_passed() const;
    const FrameCheck& check(const std::string& name) const;
};

/**
 * @brief Bounded-degree checks that (Z, C) is an algebraic reference frame.
 *
 * Checks: "Z hermitian", "conjugate", "C hermitian", "no zero divisor",
 * "commutant meets ideal trivially", "generates". Failures are reported, not thrown.
 */
FrameReport verify_reference_frame(const AlgebraElement& Z, const AlgebraElement& C, int D = AlgebraicState::default_degree);

struct PositivityReport {
    double min_eigenvalue = 0.0;
    /// Max |M − M†| of the Gram form; nonzero means some ω(a*a) is not real.
    double hermiticity_defect = 0.0;
    bool normalized = false;
    bool positive(double tol = 1e-10) const { return normalized && hermiticity_defect <= tol && min_eigenvalue >= -tol; }
};

/// Gram form M_ab = ω(a*·b) over the given basis elements.
PositivityReport check_almost_positive(const AlgebraicState& w, const std::vector<AlgebraElement>& basis);
/// Same over monomials of degree ≤ D/2 in the listed generators.
PositivityReport check_almost_positive(const AlgebraicState& w, const std::vector<int>& generators, int D);

/// Ideal-frame pair data for the algebraic frame change B → A.
struct FramePair {
    int qA = -1, pA = -1, qB = -1, pB = -1;
    /// Everything in C apart from p_A + p_B.
    AlgebraElement G_S;
    double rhoA = 0.0, rhoB = 0.0;
};

/// Σ_n (q_A − ρ_A)^n/n! · D^n(f_S), D = [G_S, ·]/(iℏ), returned as a list of numeric weights on
/// exact elements. Raises UnsupportedForm if the series does not terminate within max_order.
std::vector<std::pair<cplx, AlgebraElement>> ideal_relational_series(const FramePair& fp, const AlgebraElement& f_S,
                                                                    int max_order = 16);

/**
 * @brief ω_{A|ρ_A}(f) from a B-gauge state.
 *
 * Each monomial of f splits into q_B^a p_B^b times a system part; the B part becomes
 * (ρ_A + ρ_B − q_A)^a (−p_A − G_S)^b and multiplies the relational series of the system part
 * from the left. Raises OrderingViolation if q_B does not precede p_B in the normal order
 * or if f involves A's generators.
 */
cplx transform_frame(const AlgebraicState& wB, const FramePair& fp, const AlgebraElement& f);

}  // namespace qrf
