#include "qrf/algstates.hpp"

#include "qrf/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace qrf {

using ncalg::TermKey;
using ncalg::TermMap;

namespace {

constexpr int kVectorCacheDim = 1 << 14;

double hbar_power(double hbar, int hgrade) { return hgrade == 0 ? 1.0 : std::pow(hbar, 0.5 * hgrade); }

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

AlgebraElement power(const AlgebraElement& x, int n) {
    AlgebraElement r = AlgebraElement::one(x.gens());
    for (int i = 0; i < n; ++i) r = r * x;
    return r;
}

/// Row-echelon span over Q(i), pivoting on the largest term key.
class ExactSpan {
public:
    struct Row {
        TermMap img;
        std::map<int, QQi> tag;
    };

    /// Reduces the row against the span; returns true and stores it if independent.
    bool add(Row r) {
        reduce(r);
        if (r.img.empty()) {
            last_dependent_ = std::move(r.tag);
            return false;
        }
        const TermKey k = r.img.rbegin()->first;
        const QQi inv = QQi(1) / r.img.rbegin()->second;
        for (auto& [key, c] : r.img) c *= inv;
        for (auto& [key, c] : r.tag) c *= inv;
        pivots_.emplace(k, std::move(r));
        return true;
    }
    bool contains(TermMap img) const {
        Row r{std::move(img), {}};
        reduce(r);
        return r.img.empty();
    }
    size_t rank() const { return pivots_.size(); }
    /// Tag combination of the last row found dependent.
    const std::map<int, QQi>& last_dependency() const { return last_dependent_; }

private:
    void reduce(Row& r) const {
        while (!r.img.empty()) {
            const TermKey k = r.img.rbegin()->first;
            auto it = pivots_.find(k);
            if (it == pivots_.end()) return;
            const QQi f = r.img.rbegin()->second;
            for (const auto& [key, c] : it->second.img) ncalg::add_into(r.img, key, -(f * c));
            for (const auto& [t, c] : it->second.tag) {
                QQi& slot = r.tag[t];
                slot -= f * c;
                if (slot.is_zero()) r.tag.erase(t);
            }
        }
    }

    std::map<TermKey, Row> pivots_;
    std::map<int, QQi> last_dependent_;
};

/// Basis of {x : deg x ≤ D, [Z, x] = 0}.
std::vector<AlgebraElement> commutant(const AlgebraElement& Z, int D) {
    const GenPtr& g = Z.gens();
    auto basis = ncalg::monomial_basis(g, D);
    ExactSpan span;
    std::vector<AlgebraElement> out;
    for (size_t i = 0; i < basis.size(); ++i) {
        AlgebraElement m = AlgebraElement::monomial(g, basis[i]);
        ExactSpan::Row r{ncalg::commutator(Z, m).terms(), {{static_cast<int>(i), QQi(1)}}};
        if (!span.add(std::move(r))) {
            AlgebraElement x(g);
            for (const auto& [t, c] : span.last_dependency())
                x += AlgebraElement::monomial(g, basis[static_cast<size_t>(t)], c);
            if (!x.is_zero()) out.push_back(x);
        }
    }
    return out;
}

}  // namespace

std::vector<Mat> dense_assignment(const LatticeSpace& s, const GeneratorAssignment& a) {
    std::vector<Mat> out;
    for (const auto& g : a) out.push_back(g.factor < 0 ? g.local : s.embed(g.factor, g.local));
    return out;
}

Vec apply_generator(const LatticeSpace& s, const GeneratorImage& g, const Vec& v) {
    return g.factor < 0 ? Vec(g.local * v) : apply_local(s, g.factor, g.local, v);
}

AlgebraicState AlgebraicState::from_hilbert(GenPtr gens, const LatticeSpace& space, GeneratorAssignment assignment,
                                            Vec bra, Vec ket, int D) {
    if (static_cast<int>(assignment.size()) != gens->size())
        throw std::invalid_argument("assignment must cover every generator");
    AlgebraicState w;
    w.gens_ = std::move(gens);
    w.D_ = D;
    w.hbar_ = space.hbar();
    w.space_ = space;
    w.assignment_ = std::move(assignment);
    w.bra_ = std::move(bra);
    w.ket_ = std::move(ket);
    const cplx n = w.bra_.dot(w.ket_);
    w.norm_ = std::abs(n) < 1e-300 ? cplx(1.0) : n;
    w.cache_ = std::make_shared<Cache>();
    return w;
}

AlgebraicState AlgebraicState::frame_state(GenPtr gens, const LatticeSpace& space, GeneratorAssignment assignment,
                                           const Constraint& C, const OrientationFrame& frame, double rho, Vec ket,
                                           int D) {
    const double res = (C.diag.cast<cplx>().cwiseProduct(ket)).norm();
    if (res > 1e-9 * ket.norm())
        raise(ErrorKind::NotPhysical, "ket is not annihilated by the constraint (residual " + std::to_string(res) + ")");
    Vec r = orientation_vector(frame, rho);
    Mat theta = r * r.adjoint();
    Vec bra = apply_local(space, frame.factor, theta, ket);
    return from_hilbert(std::move(gens), space, std::move(assignment), std::move(bra), std::move(ket), D);
}

AlgebraicState AlgebraicState::from_table(GenPtr gens, std::map<Exponents, cplx> table, double hbar, int D) {
    AlgebraicState w;
    w.gens_ = std::move(gens);
    w.D_ = D;
    w.hbar_ = hbar;
    w.table_ = std::move(table);
    w.cache_ = std::make_shared<Cache>();
    return w;
}

AlgebraicState AlgebraicState::with_bra(Vec bra) const {
    return from_hilbert(gens_, *space_, assignment_, std::move(bra), ket_, D_);
}

Vec AlgebraicState::apply_monomial(const Exponents& m) const {
    const bool cache_vectors = space_->dim() <= kVectorCacheDim;
    if (cache_vectors) {
        std::lock_guard<std::mutex> lk(cache_->mu);
        auto it = cache_->vectors.find(m);
        if (it != cache_->vectors.end()) return it->second;
    }
    size_t first = 0;
    while (first < m.size() && m[first] == 0) ++first;
    Vec v;
    if (first == m.size()) {
        v = ket_;
    } else {
        Exponents rest = m;
        --rest[first];
        v = apply_generator(*space_, assignment_[first], apply_monomial(rest));
    }
    if (cache_vectors) {
        std::lock_guard<std::mutex> lk(cache_->mu);
        cache_->vectors.emplace(m, v);
    }
    return v;
}

cplx AlgebraicState::evaluate_monomial(const Exponents& m) const {
    if (ncalg::degree(m) > D_)
        raise(ErrorKind::DegreeExceeded, "monomial of degree " + std::to_string(ncalg::degree(m)) +
                                             " beyond the state's bound " + std::to_string(D_));
    if (!hilbert_backed()) {
        auto it = table_.find(m);
        if (it != table_.end()) return it->second;
        return 0.0;
    }
    {
        std::lock_guard<std::mutex> lk(cache_->mu);
        auto it = cache_->values.find(m);
        if (it != cache_->values.end()) return it->second;
    }
    const cplx v = bra_.dot(apply_monomial(m)) / norm_;
    std::lock_guard<std::mutex> lk(cache_->mu);
    cache_->values.emplace(m, v);
    return v;
}

cplx AlgebraicState::evaluate(const AlgebraElement& a) const {
    if (a.degree() > D_)
        raise(ErrorKind::DegreeExceeded,
              "element of degree " + std::to_string(a.degree()) + " beyond the state's bound " + std::to_string(D_));
    cplx sum = 0.0;
    for (const auto& [k, c] : a.terms()) sum += c.to_complex() * hbar_power(hbar_, k.hgrade) * evaluate_monomial(k.exps);
    return sum;
}

cplx AlgebraicState::evaluate_operator(const Mat& M) const {
    if (!hilbert_backed()) throw std::logic_error("evaluate_operator needs a Hilbert-backed state");
    return bra_.dot(M * ket_) / norm_;
}

std::map<Exponents, cplx> AlgebraicState::value_table(int D) const {
    std::map<Exponents, cplx> out;
    for (const auto& m : ncalg::monomial_basis(gens_, std::min(D, D_))) out[m] = evaluate_monomial(m);
    return out;
}

std::string serialize_table(const GenPtr& gens, const std::map<Exponents, cplx>& table) {
    std::ostringstream os;
    os.precision(17);
    os << "monomial,re,im\n";
    for (const auto& [m, v] : table) {
        std::string label;
        for (size_t i = 0; i < m.size(); ++i) {
            if (m[i] == 0) continue;
            if (!label.empty()) label += "*";
            label += gens->name(static_cast<int>(i));
            if (m[i] > 1) label += "^" + std::to_string(m[i]);
        }
        os << (label.empty() ? "1" : label) << "," << v.real() << "," << v.imag() << "\n";
    }
    return os.str();
}

double check_constraint_surface(const AlgebraicState& w, const AlgebraElement& C, int D) {
    double worst = 0.0;
    for (const auto& m : ncalg::monomial_basis(w.gens(), D - C.degree()))
        worst = std::max(worst, std::abs(w.evaluate(AlgebraElement::monomial(w.gens(), m) * C)));
    return worst;
}

double check_frame_gauge(const AlgebraicState& w, int Z, double rho, int D) {
    const AlgebraElement z = AlgebraElement::generator(w.gens(), Z);
    double worst = 0.0;
    for (const auto& m : ncalg::monomial_basis(w.gens(), D - 1)) {
        const AlgebraElement a = AlgebraElement::monomial(w.gens(), m);
        worst = std::max(worst, std::abs(w.evaluate(z * a) - rho * w.evaluate(a)));
    }
    return worst;
}

bool FrameReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

const FrameCheck& FrameReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no frame check named " + name);
}

FrameReport verify_reference_frame(const AlgebraElement& Z, const AlgebraElement& C, int D) {
    const GenPtr& g = Z.gens();
    FrameReport rep;
    rep.degree_bound = D;
    rep.checks.push_back({"Z hermitian", ncalg::adjoint(Z) == Z, "Z* = " + ncalg::adjoint(Z).str()});
    const AlgebraElement comm = ncalg::commutator(Z, C);
    const AlgebraElement ihbar = AlgebraElement::scalar(g, QQi::i(), 2);
    rep.checks.push_back({"conjugate", comm == ihbar, "[Z, C] = " + comm.str()});
    rep.checks.push_back({"C hermitian", ncalg::adjoint(C) == C, "C* = " + ncalg::adjoint(C).str()});

    // a ↦ a·C injective on degree ≤ D − deg C.
    ExactSpan ideal;
    size_t ideal_dim = 0;
    bool injective = true;
    std::string witness;
    for (const auto& m : ncalg::monomial_basis(g, D - C.degree())) {
        AlgebraElement img = AlgebraElement::monomial(g, m) * C;
        if (!ideal.add({img.terms(), {}})) {
            injective = false;
            if (witness.empty()) witness = "dependent image from " + AlgebraElement::monomial(g, m).str();
        } else {
            ++ideal_dim;
        }
    }
    rep.checks.push_back({"no zero divisor", injective, injective ? "images independent" : witness});

    std::vector<AlgebraElement> zc = commutant(Z, D);
    ExactSpan both = ideal;
    size_t zrank = 0;
    for (const auto& x : zc)
        if (both.add({x.terms(), {}})) ++zrank;
    const bool trivial = zrank == zc.size();
    rep.checks.push_back({"commutant meets ideal trivially", trivial,
                          std::to_string(zc.size()) + " commutant elements, " + std::to_string(ideal_dim) +
                              " ideal elements, " + std::to_string(zc.size() - zrank) + " shared directions"});

    ExactSpan zspan;
    for (const auto& x : zc) zspan.add({x.terms(), {}});
    zspan.add({C.terms(), {}});
    bool generates = true;
    std::string missing;
    for (int i = 0; i < g->size(); ++i)
        if (!zspan.contains(AlgebraElement::generator(g, i).terms())) {
            generates = false;
            missing += (missing.empty() ? "" : ", ") + g->name(i);
        }
    rep.checks.push_back({"generates", generates, generates ? "all generators reached" : "missing " + missing});
    return rep;
}

PositivityReport check_almost_positive(const AlgebraicState& w, const std::vector<AlgebraElement>& basis) {
    PositivityReport rep;
    rep.normalized = std::abs(w.evaluate(AlgebraElement::one(w.gens())) - 1.0) < 1e-10;
    const auto n = static_cast<Eigen::Index>(basis.size());
    Mat M(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            M(a, b) = w.evaluate(ncalg::adjoint(basis[static_cast<size_t>(a)]) * basis[static_cast<size_t>(b)]);
    rep.hermiticity_defect = n == 0 ? 0.0 : (M - M.adjoint()).cwiseAbs().maxCoeff();
    Mat H = (M + M.adjoint()) / 2.0;
    rep.min_eigenvalue = n == 0 ? 0.0 : Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().minCoeff();
    return rep;
}

PositivityReport check_almost_positive(const AlgebraicState& w, const std::vector<int>& generators, int D) {
    std::vector<AlgebraElement> basis;
    for (const auto& m : ncalg::monomial_basis(w.gens(), D / 2, generators))
        basis.push_back(AlgebraElement::monomial(w.gens(), m));
    return check_almost_positive(w, basis);
}

std::vector<std::pair<cplx, AlgebraElement>> ideal_relational_series(const FramePair& fp, const AlgebraElement& f_S,
                                                                    int max_order) {
    const GenPtr& g = f_S.gens();
    const AlgebraElement qA = AlgebraElement::generator(g, fp.qA);
    std::vector<std::pair<cplx, AlgebraElement>> out;
    AlgebraElement Dn = f_S;
    double fact = 1.0;
    for (int n = 0; !Dn.is_zero(); ++n) {
        if (n > max_order)
            raise(ErrorKind::UnsupportedForm, "relational series of " + f_S.str() + " does not terminate by order " +
                                                  std::to_string(max_order));
        if (n > 0) fact *= n;
        // (q_A − ρ_A)^n = Σ_k C(n,k) q_A^k (−ρ_A)^{n−k}
        for (int k = 0; k <= n; ++k) {
            const double wgt = binomial(n, k) * std::pow(-fp.rhoA, n - k) / fact;
            if (wgt == 0.0) continue;
            out.emplace_back(wgt, power(qA, k) * Dn);
        }
        Dn = ncalg::divide_ihbar(ncalg::commutator(fp.G_S, Dn));
    }
    return out;
}

cplx transform_frame(const AlgebraicState& wB, const FramePair& fp, const AlgebraElement& f) {
    const GenPtr& g = wB.gens();
    if (fp.qB > fp.pB) raise(ErrorKind::OrderingViolation, "normal order must place q_B before p_B");
    const AlgebraElement qA = AlgebraElement::generator(g, fp.qA);
    const AlgebraElement pA = AlgebraElement::generator(g, fp.pA);
    const AlgebraElement pB_image = -pA - fp.G_S;
    const double shift = fp.rhoA + fp.rhoB;
    cplx total = 0.0;
    for (const auto& [key, c] : f.terms()) {
        const auto& e = key.exps;
        if (e[static_cast<size_t>(fp.qA)] != 0 || e[static_cast<size_t>(fp.pA)] != 0)
            raise(ErrorKind::OrderingViolation, "f must not involve the target frame's generators");
        const int a = e[static_cast<size_t>(fp.qB)];
        const int b = e[static_cast<size_t>(fp.pB)];
        Exponents es = e;
        es[static_cast<size_t>(fp.qB)] = 0;
        es[static_cast<size_t>(fp.pB)] = 0;
        const auto series = ideal_relational_series(fp, AlgebraElement::monomial(g, es));
        const AlgebraElement pb = power(pB_image, b);
        cplx term = 0.0;
        for (int k = 0; k <= a; ++k) {
            // (ρ_A + ρ_B − q_A)^a = Σ_k C(a,k) shift^{a−k} (−q_A)^k
            const double wk = binomial(a, k) * std::pow(shift, a - k) * (k % 2 ? -1.0 : 1.0);
            const AlgebraElement left = power(qA, k) * pb;
            for (const auto& [ws, el] : series) term += wk * ws * wB.evaluate(left * el);
        }
        total += c.to_complex() * hbar_power(wB.hbar(), key.hgrade) * term;
    }
    return total;
}

}  // namespace qrf
