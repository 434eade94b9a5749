#pragma once

#include "qrf/algstates.hpp"
#include "qrf/ncalg.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace qrf::effective {

using ncalg::AlgebraElement;
using ncalg::Exponents;
using ncalg::GenPtr;
using ncalg::TermKey;

/// Truncation order meaning "keep everything".
constexpr int untruncated = 1 << 20;

class MomentFunction;

enum class AtomKind { expect, moment, sqrt_hbar, param, cos, sin, weyl };

/**
 * @brief One symbol of a moment function.
 *
 * expect: ⟨y_gen⟩. moment: Δ(y^exps), order ≥ 2. param: named constant with a declared
 * semiclassical order (use order 2 for C_class on the constraint surface). cos/sin: of an
 * order-zero argument. weyl: ⟨Weyl(y^exps)⟩, used internally for brackets.
 */
struct Atom {
    AtomKind kind = AtomKind::param;
    int gen = -1;
    Exponents exps;
    std::string name;
    int order = 0;
    std::shared_ptr<const MomentFunction> arg;

    int semiclassical_order() const;
};

bool operator<(const Atom& a, const Atom& b);
bool operator==(const Atom& a, const Atom& b);
inline bool operator!=(const Atom& a, const Atom& b) { return !(a == b); }

using Monomial = std::map<Atom, int>;

int order_of(const Monomial& m);

/**
 * @brief Polynomial in expectations, moments, ℏ^{1/2}, parameters and trig atoms.
 *
 * Coefficients are exact. sin² is rewritten as 1 − cos² of the same argument so that
 * equal functions compare equal.
 */
class MomentFunction {
public:
    MomentFunction() = default;
    explicit MomentFunction(GenPtr gens) : gens_(std::move(gens)) {}

    static MomentFunction constant(const GenPtr& gens, const QQi& c);
    static MomentFunction atom(const GenPtr& gens, const Atom& a, int power = 1);
    static MomentFunction expect(const GenPtr& gens, int i);
    static MomentFunction expect(const GenPtr& gens, const std::string& name);
    /// Δ(y^exps); 1 for order zero and 0 for order one.
    static MomentFunction moment(const GenPtr& gens, const Exponents& exps);
    /// Moment from generator names, e.g. {"q_A", "q_A", "p_B"}.
    static MomentFunction moment(const GenPtr& gens, const std::vector<std::string>& names);
    static MomentFunction param(const GenPtr& gens, const std::string& name, int order = 0);
    static MomentFunction hbar(const GenPtr& gens);
    static MomentFunction sqrt_hbar(const GenPtr& gens);
    static MomentFunction cos(const MomentFunction& arg);
    static MomentFunction sin(const MomentFunction& arg);

    const GenPtr& gens() const { return gens_; }
    const std::map<Monomial, QQi>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const;
    QQi constant_term() const;
    /// Lowest term order; `untruncated` for zero.
    int order() const;
    /// Atoms at top level (trig arguments are not entered).
    std::set<Atom> atoms() const;
    bool depends_on(const Atom& a) const;

    MomentFunction& operator+=(const MomentFunction& o);
    MomentFunction& operator-=(const MomentFunction& o);
    friend MomentFunction operator+(MomentFunction a, const MomentFunction& b) { return a += b; }
    friend MomentFunction operator-(MomentFunction a, const MomentFunction& b) { return a -= b; }
    MomentFunction operator-() const;
    friend MomentFunction operator*(const MomentFunction& a, const MomentFunction& b);
    friend MomentFunction operator*(const QQi& c, const MomentFunction& a);
    MomentFunction pow(int n) const;

    friend bool operator==(const MomentFunction& a, const MomentFunction& b) { return a.terms_ == b.terms_; }
    friend bool operator!=(const MomentFunction& a, const MomentFunction& b) { return !(a == b); }
    friend bool operator<(const MomentFunction& a, const MomentFunction& b);

    /// Sorted terms with exact coefficients; variances print as (Δy)^2.
    std::string str() const;

    /// Adds c·m, keeping the sin² rewriting.
    void add_term(const Monomial& m, const QQi& c);

private:

    GenPtr gens_;
    std::map<Monomial, QQi> terms_;
};

/// 𝒯_M: drops terms of order > M.
MomentFunction truncate(const MomentFunction& f, int M);
/// ∂f/∂a, with the chain rule through trig arguments.
MomentFunction derivative(const MomentFunction& f, const Atom& a);
/// Replaces atoms (also inside trig arguments).
MomentFunction substitute(const MomentFunction& f, const std::map<Atom, MomentFunction>& values);
/// f / m for a single-term m dividing every term of f. Raises UnsupportedForm otherwise.
MomentFunction divide_exact(const MomentFunction& f, const MomentFunction& m);

/**
 * @brief Operator with moment-function coefficients: Σ c(⟨·⟩)·ℏ^{g/2}·y^m in normal order.
 */
class OperatorExpr {
public:
    OperatorExpr() = default;
    explicit OperatorExpr(GenPtr gens) : gens_(std::move(gens)) {}

    static OperatorExpr from(const AlgebraElement& a);
    static OperatorExpr scalar(const MomentFunction& c);
    static OperatorExpr scalar(const GenPtr& gens, const QQi& c);
    static OperatorExpr generator(const GenPtr& gens, int i);
    static OperatorExpr generator(const GenPtr& gens, const std::string& name);

    const GenPtr& gens() const { return gens_; }
    const std::map<TermKey, MomentFunction>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    OperatorExpr& operator+=(const OperatorExpr& o);
    OperatorExpr& operator-=(const OperatorExpr& o);
    friend OperatorExpr operator+(OperatorExpr a, const OperatorExpr& b) { return a += b; }
    friend OperatorExpr operator-(OperatorExpr a, const OperatorExpr& b) { return a -= b; }
    OperatorExpr operator-() const;
    friend OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b);
    friend OperatorExpr operator*(const MomentFunction& c, const OperatorExpr& a);
    friend bool operator==(const OperatorExpr& a, const OperatorExpr& b) { return a.terms_ == b.terms_; }

    /// Generators with a nonzero exponent somewhere.
    std::set<int> support() const;
    std::string str() const;

private:
    void add_term(const TermKey& k, const MomentFunction& c);
    GenPtr gens_;
    std::map<TermKey, MomentFunction> terms_;
};

OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b);
/// a/(iℏ); every term must carry at least one power of ℏ.
OperatorExpr divide_ihbar(const OperatorExpr& a);
/// Average of all distinct orderings of Π_i X_i^{k_i}.
OperatorExpr weyl_product(const std::vector<OperatorExpr>& factors, const Exponents& k);

/// ⟨X⟩ in expectations and Weyl moments, truncated at M.
MomentFunction expect_expand_sym(const OperatorExpr& X, int M = untruncated);
MomentFunction expect_expand_sym(const AlgebraElement& P, int M = untruncated);

/// {f, g} from {⟨a⟩,⟨b⟩} = ⟨[a,b]⟩/(iℏ) with the Leibniz and chain rules. Not truncated.
MomentFunction poisson_bracket(const MomentFunction& f, const MomentFunction& g);

/**
 * @brief Numeric values of expectations and moments up to order M.
 *
 * Variances are stored under exponent vectors with a single 2.
 */
struct MomentState {
    GenPtr gens;
    int M = 2;
    double hbar = 1.0;
    std::map<int, cplx> expectations;
    std::map<Exponents, cplx> moments;
    std::map<std::string, cplx> params;

    /// Raises UnsupportedForm for a missing expectation, parameter or stored-order moment.
    cplx value(const Atom& a) const;
    cplx expect(const std::string& name) const;
    cplx moment(const std::vector<std::string>& names) const;
};

cplx evaluate(const MomentFunction& f, const MomentState& s);
/// 𝒯_M⟨P⟩ evaluated on s (M = s.M).
cplx expect_expand(const AlgebraElement& P, const MomentState& s);
cplx expect_expand(const OperatorExpr& P, const MomentState& s);

/// Moments from Weyl-symmetrized products, over the listed generators (all if empty).
MomentState moments_from_hilbert(const AlgebraicState& w, int M, const std::vector<int>& among = {});
/// Same for ω(a) = ⟨ψ|a|ψ⟩/⟨ψ|ψ⟩.
MomentState moments_from_hilbert(const GenPtr& gens, const LatticeSpace& space, const GeneratorAssignment& assignment,
                                 const Vec& ket, int M, const std::vector<int>& among = {});

struct TowerFunction {
    std::string label;
    int generator = -1;  ///< -1 for ⟨C⟩
    MomentFunction f;
};

/// ⟨C⟩ and ⟨(y_i − ⟨y_i⟩)C⟩ for every generator, truncated at M.
std::vector<TowerFunction> constraint_tower(const OperatorExpr& C, int M);
std::vector<TowerFunction> constraint_tower(const AlgebraElement& C, int M);

/// Atom values fixed or solved for.
struct GaugeSolution {
    int qR = -1, pR = -1, M = 2;
    std::map<Atom, MomentFunction> values;

    MomentFunction impose(const MomentFunction& f) const;
};

/**
 * @brief Frame gauge: q_R = ρ, Δ(q_R^{n} x…) = 0 without p_R, and the tower solved for
 * every p_R variable of order ≤ M.
 *
 * Solving proceeds in tower order, eliminating one variable per equation when it enters
 * linearly with a constant coefficient. Raises InsufficientTower when some p_R variable is left.
 */
GaugeSolution fix_frame_gauge(const std::vector<TowerFunction>& tower, int qR, int pR, const MomentFunction& rho, int M);
/// Values of every gauge-fixed or solved variable computed from the remaining ones in s.
MomentState apply_gauge(const GaugeSolution& g, const MomentState& s);

/**
 * @brief Frame pair for effective frame changes from B-gauge to A-gauge.
 *
 * G_S may carry parameters; rhoA/rhoB are usually parameters "rho_A", "rho_B".
 */
struct EffFramePair {
    int qA = -1, pA = -1, qB = -1, pB = -1;
    OperatorExpr G_S;
    MomentFunction rhoA, rhoB;
};

/// O_A^{ρ_A}(y) for a generator not belonging to A, with function series expanded to order M.
OperatorExpr relational_generator(const EffFramePair& fp, int generator, int M);
/// O_A^{ρ_A}(f) as the product of generator images. Raises UnsupportedForm if f involves A.
OperatorExpr relational_expr(const EffFramePair& fp, const OperatorExpr& f, int M);
/// B-gauge elimination: q_B on the left becomes ρ_B and p_B on the right becomes −p_A − G_S.
OperatorExpr eliminate_frame(const EffFramePair& fp, const OperatorExpr& X);

/// 𝒯_M⟨O_A(f)⟩_B in B-gauge variables.
MomentFunction transformed_expectation(const EffFramePair& fp, const OperatorExpr& f, int M);
/// 𝒯_M Δ(y^k)_A in B-gauge variables; k may involve p_A but not q_A.
MomentFunction transformed_moment(const EffFramePair& fp, const Exponents& k, int M);

/**
 * @brief The A-gauge state from a B-gauge state.
 *
 * Stores q_A = ρ_A, zero gauge moments of q_A, and every expectation and moment of order ≤ M
 * over the remaining generators. Moments mixing q_A with p_A are not stored.
 */
MomentState effective_frame_transform(const MomentState& sB, const EffFramePair& fp, int M);
/// 𝒯_M(Δf_S)²_A in B-gauge variables.
MomentFunction transform_uncertainty_sym(const EffFramePair& fp, const OperatorExpr& f_S, int M);
cplx transform_uncertainty(const OperatorExpr& f_S, const MomentState& sB, const EffFramePair& fp, int M);

/// One sign branch of the order-ℏ degenerate solution.
struct DegenerateBranch {
    int sign = 1;
    std::map<Atom, MomentFunction> values;  ///< p_R, (Δp_R)², Δ(p_R H)
    /// Residuals of the full-constraint tower after substitution (all zero when consistent).
    std::vector<MomentFunction> full_tower_residuals;
};

/**
 * @brief Both branches for C = p_R² − H² at M = 2, H a generator commuting with the frame.
 *
 * Branch s solves the factor tower of p_R − sH; the full-constraint tower is checked on it.
 */
std::pair<DegenerateBranch, DegenerateBranch> degenerate_solve(const GenPtr& gens, int qR, int pR, int H);

/// H = ⟨√G⟩ and (ΔH)² from ⟨G⟩ and (ΔG)² at order ℏ. Raises NearZeroEnergy if ⟨G⟩ < threshold.
std::pair<cplx, cplx> sqrt_expansion(cplx G, cplx varG, double threshold = 1e-6);

/**
 * @brief Fixed-step RK4 integration of dX/dλ = 𝒯_M{X, generator} for every stored variable.
 *
 * Raises StepTooLarge if a step-doubling estimate exceeds 1e-6 relative or values blow up.
 */
MomentState constraint_flow(const MomentState& s, const MomentFunction& generator, double lambda, int steps);

}  // namespace qrf::effective
