#include "qrf/ncalg.hpp"

#include "qrf/errors.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace qrf::ncalg {

int degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0); }

void add_into(TermMap& t, const TermKey& k, const QQi& c) {
    if (c.is_zero()) return;
    auto it = t.find(k);
    if (it == t.end()) {
        t.emplace(k, c);
        return;
    }
    it->second += c;
    if (it->second.is_zero()) t.erase(it);
}

namespace {

void add_shifted(TermMap& out, const TermMap& in, const QQi& c, int dh) {
    for (const auto& [k, v] : in) add_into(out, TermKey{k.exps, k.hgrade + dh}, c * v);
}

}  // namespace

// ---------------------------------------------------------------------------
// GeneratorSet

std::shared_ptr<const GeneratorSet> GeneratorSet::create(std::vector<std::string> names,
                                                         const std::vector<Relation>& relations,
                                                         int degree_cap) {
    std::shared_ptr<GeneratorSet> g(new GeneratorSet());
    const size_t n = names.size();
    g->names_ = std::move(names);
    g->cap_ = degree_cap;
    g->alpha0_.assign(n * n, QQi(0));
    g->alpha_.assign(n * n * n, QQi(0));
    g->trivial_.assign(n * n, 1);
    std::vector<char> seen(n * n, 0);

    auto in_range = [n](int i) { return i >= 0 && static_cast<size_t>(i) < n; };
    for (const auto& r : relations) {
        if (!in_range(r.i) || !in_range(r.j) || r.i == r.j)
            raise(ErrorKind::RelationViolation, "relation on invalid generator pair");
        for (const auto& [k, c] : r.lie)
            if (!in_range(k)) raise(ErrorKind::RelationViolation, "relation references unknown generator");
        // Build this relation's row, then compare with anything already implied by antisymmetry.
        QQi a0 = r.identity;
        std::vector<QQi> a(n, QQi(0));
        for (const auto& [k, c] : r.lie) a[static_cast<size_t>(k)] += c;
        const size_t ij = g->idx(r.i, r.j);
        const size_t ji = g->idx(r.j, r.i);
        if (seen[ij]) {
            bool same = g->alpha0_[ij] == a0;
            for (size_t k = 0; k < n; ++k) same = same && g->alpha_[ij * n + k] == a[k];
            if (!same) raise(ErrorKind::RelationViolation, "antisymmetry violated for (" + g->names_[static_cast<size_t>(r.i)] +
                                                               ", " + g->names_[static_cast<size_t>(r.j)] + ")");
            continue;
        }
        bool trivial = a0.is_zero();
        g->alpha0_[ij] = a0;
        g->alpha0_[ji] = -a0;
        for (size_t k = 0; k < n; ++k) {
            g->alpha_[ij * n + k] = a[k];
            g->alpha_[ji * n + k] = -a[k];
            trivial = trivial && a[k].is_zero();
        }
        g->trivial_[ij] = g->trivial_[ji] = trivial ? 1 : 0;
        seen[ij] = seen[ji] = 1;
    }

    // Jacobi: Σ_l α_ij^l α_lk^m + cyclic = 0 for every m, identity component included.
    for (int i = 0; i < static_cast<int>(n); ++i)
        for (int j = i + 1; j < static_cast<int>(n); ++j)
            for (int k = j + 1; k < static_cast<int>(n); ++k) {
                const int trip[3][3] = {{i, j, k}, {j, k, i}, {k, i, j}};
                for (int m = -1; m < static_cast<int>(n); ++m) {
                    QQi sum(0);
                    for (const auto& t : trip)
                        for (int l = 0; l < static_cast<int>(n); ++l) {
                            const QQi& c1 = g->lie_part(t[0], t[1], l);
                            if (c1.is_zero()) continue;
                            sum += c1 * (m < 0 ? g->identity_part(l, t[2]) : g->lie_part(l, t[2], m));
                        }
                    if (!sum.is_zero())
                        raise(ErrorKind::RelationViolation, "Jacobi identity fails for (" + g->names_[static_cast<size_t>(i)] +
                                                                ", " + g->names_[static_cast<size_t>(j)] + ", " +
                                                                g->names_[static_cast<size_t>(k)] + ")");
                }
            }
    return g;
}

int GeneratorSet::index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

bool GeneratorSet::is_canonical_pair(int i, int j) const {
    if (alpha0_[idx(i, j)].is_zero()) return false;
    for (int k = 0; k < size(); ++k)
        if (!lie_part(i, j, k).is_zero()) return false;
    return true;
}

bool GeneratorSet::has_only_canonical(int i) const {
    for (int j = 0; j < size(); ++j)
        if (j != i && !commute(i, j) && !is_canonical_pair(i, j)) return false;
    return true;
}

Exponents GeneratorSet::unit(int i) const {
    Exponents e(names_.size(), 0);
    e[static_cast<size_t>(i)] = 1;
    return e;
}

TermMap GeneratorSet::right_multiply(const Exponents& m, int g) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    return right_multiply_unlocked(m, g);
}

TermMap GeneratorSet::right_multiply_unlocked(const Exponents& m, int g) const {
    int last = -1;
    for (int i = size() - 1; i >= 0; --i)
        if (m[static_cast<size_t>(i)] > 0) {
            last = i;
            break;
        }
    if (last <= g) {
        Exponents r = m;
        ++r[static_cast<size_t>(g)];
        return TermMap{{TermKey{r, 0}, QQi(1)}};
    }
    auto key = std::make_pair(m, g);
    if (auto it = rmul_cache_.find(key); it != rmul_cache_.end()) return it->second;

    // m·g = m'·y_last·g = (m'·g)·y_last + m'·[y_last, g]
    Exponents mp = m;
    --mp[static_cast<size_t>(last)];
    TermMap out;
    TermMap head = right_multiply_unlocked(mp, g);
    for (const auto& [k, c] : head) add_shifted(out, right_multiply_unlocked(k.exps, last), c, k.hgrade);
    const QQi iu = QQi::i();
    const QQi& a0 = identity_part(last, g);
    if (!a0.is_zero()) add_into(out, TermKey{mp, 2}, iu * a0);
    for (int k = 0; k < size(); ++k) {
        const QQi& a = lie_part(last, g, k);
        if (a.is_zero()) continue;
        add_shifted(out, right_multiply_unlocked(mp, k), iu * a, 2);
    }
    rmul_cache_.emplace(key, out);
    return out;
}

TermMap GeneratorSet::monomial_product(const Exponents& a, const Exponents& b) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    return monomial_product_unlocked(a, b);
}

TermMap GeneratorSet::monomial_product_unlocked(const Exponents& a, const Exponents& b) const {
    auto key = std::make_pair(a, b);
    if (auto it = prod_cache_.find(key); it != prod_cache_.end()) return it->second;
    TermMap cur{{TermKey{a, 0}, QQi(1)}};
    for (int g = 0; g < size(); ++g)
        for (int r = 0; r < b[static_cast<size_t>(g)]; ++r) {
            TermMap next;
            for (const auto& [k, c] : cur) add_shifted(next, right_multiply_unlocked(k.exps, g), c, k.hgrade);
            cur = std::move(next);
        }
    prod_cache_.emplace(key, cur);
    return cur;
}

TermMap GeneratorSet::weyl(const Exponents& m) const {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (auto it = weyl_cache_.find(m); it != weyl_cache_.end()) return it->second;

    TermMap acc;
    Exponents remaining = m;
    long paths = 0;
    const Exponents zero(names_.size(), 0);
    // Depth-first over distinct orderings, extending the prefix product one generator at a time.
    auto dfs = [&](auto&& self, const TermMap& prefix, int left) -> void {
        if (left == 0) {
            ++paths;
            for (const auto& [k, c] : prefix) add_into(acc, k, c);
            return;
        }
        for (int g = 0; g < size(); ++g) {
            if (remaining[static_cast<size_t>(g)] == 0) continue;
            --remaining[static_cast<size_t>(g)];
            TermMap next;
            for (const auto& [k, c] : prefix) add_shifted(next, right_multiply_unlocked(k.exps, g), c, k.hgrade);
            self(self, next, left - 1);
            ++remaining[static_cast<size_t>(g)];
        }
    };
    dfs(dfs, TermMap{{TermKey{zero, 0}, QQi(1)}}, degree(m));
    TermMap out;
    const QQi inv(Rational(1, paths));
    for (const auto& [k, c] : acc) add_into(out, k, c * inv);
    weyl_cache_.emplace(m, out);
    return out;
}

// ---------------------------------------------------------------------------
// AlgebraElement

AlgebraElement::AlgebraElement(GenPtr gens, TermMap terms) : gens_(std::move(gens)) {
    for (const auto& [k, c] : terms) add_term(k, c);
}

AlgebraElement AlgebraElement::scalar(const GenPtr& gens, const QQi& c, int hgrade) {
    AlgebraElement e(gens);
    e.add_term(TermKey{Exponents(static_cast<size_t>(gens->size()), 0), hgrade}, c);
    return e;
}

AlgebraElement AlgebraElement::generator(const GenPtr& gens, int i) {
    AlgebraElement e(gens);
    e.add_term(TermKey{gens->unit(i), 0}, QQi(1));
    return e;
}

AlgebraElement AlgebraElement::generator(const GenPtr& gens, const std::string& name) {
    int i = gens->index(name);
    if (i < 0) throw std::invalid_argument("unknown generator '" + name + "'");
    return generator(gens, i);
}

AlgebraElement AlgebraElement::monomial(const GenPtr& gens, const Exponents& e, const QQi& c, int hgrade) {
    AlgebraElement r(gens);
    r.add_term(TermKey{e, hgrade}, c);
    return r;
}

int AlgebraElement::degree() const {
    int d = -1;
    for (const auto& [k, c] : terms_) d = std::max(d, ncalg::degree(k.exps));
    return d;
}

QQi AlgebraElement::coefficient(const Exponents& m, int hgrade) const {
    auto it = terms_.find(TermKey{m, hgrade});
    return it == terms_.end() ? QQi(0) : it->second;
}

void AlgebraElement::add_term(const TermKey& k, const QQi& c) { add_into(terms_, k, c); }

AlgebraElement& AlgebraElement::operator+=(const AlgebraElement& o) {
    if (!gens_) gens_ = o.gens_;
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
}

AlgebraElement& AlgebraElement::operator-=(const AlgebraElement& o) {
    if (!gens_) gens_ = o.gens_;
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
}

AlgebraElement AlgebraElement::operator-() const {
    AlgebraElement r(gens_);
    for (const auto& [k, c] : terms_) r.terms_.emplace(k, -c);
    return r;
}

AlgebraElement operator*(const QQi& c, AlgebraElement a) {
    if (c.is_zero()) return AlgebraElement(a.gens_);
    for (auto& [k, v] : a.terms_) v *= c;
    return a;
}

AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) { return multiply(a, b); }

AlgebraElement AlgebraElement::times_hbar(int k) const {
    AlgebraElement r(gens_);
    for (const auto& [key, c] : terms_) r.terms_.emplace(TermKey{key.exps, key.hgrade + k}, c);
    return r;
}

std::string AlgebraElement::str() const {
    if (terms_.empty()) return "0";
    std::vector<std::pair<TermKey, QQi>> v(terms_.begin(), terms_.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
        int dx = ncalg::degree(x.first.exps), dy = ncalg::degree(y.first.exps);
        if (dx != dy) return dx > dy;
        return x.first < y.first;
    });
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : v) {
        if (!first) os << " + ";
        first = false;
        os << c.str();
        if (k.hgrade != 0) {
            if (k.hgrade % 2 == 0)
                os << "*hbar^" << k.hgrade / 2;
            else
                os << "*hbar^(" << k.hgrade << "/2)";
        }
        for (size_t g = 0; g < k.exps.size(); ++g) {
            if (k.exps[g] == 0) continue;
            os << "*" << gens_->name(static_cast<int>(g));
            if (k.exps[g] > 1) os << "^" << k.exps[g];
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Operations

AlgebraElement multiply(const AlgebraElement& a, const AlgebraElement& b) {
    const GenPtr& g = a.gens() ? a.gens() : b.gens();
    if (a.gens() && b.gens() && a.gens() != b.gens())
        throw std::invalid_argument("multiply: elements over different generator sets");
    if (a.is_zero() || b.is_zero()) return AlgebraElement(g);
    if (a.degree() + b.degree() > g->degree_cap())
        raise(ErrorKind::DegreeExceeded, "product degree " + std::to_string(a.degree() + b.degree()) +
                                             " exceeds cap " + std::to_string(g->degree_cap()));
    TermMap out;
    for (const auto& [ka, ca] : a.terms())
        for (const auto& [kb, cb] : b.terms())
            add_shifted(out, g->monomial_product(ka.exps, kb.exps), ca * cb, ka.hgrade + kb.hgrade);
    return AlgebraElement(g, std::move(out));
}

AlgebraElement commutator(const AlgebraElement& a, const AlgebraElement& b) { return a * b - b * a; }

AlgebraElement weyl_symmetrize(const GenPtr& gens, const Exponents& m) {
    if (degree(m) > gens->degree_cap())
        raise(ErrorKind::DegreeExceeded, "Weyl symmetrization beyond degree cap");
    return AlgebraElement(gens, gens->weyl(m));
}

AlgebraElement adjoint(const AlgebraElement& a) {
    const GenPtr& g = a.gens();
    TermMap out;
    for (const auto& [k, c] : a.terms()) {
        // Reverse the word y_0^{n_0}…y_{N-1}^{n_{N-1}}.
        TermMap cur{{TermKey{Exponents(static_cast<size_t>(g->size()), 0), 0}, QQi(1)}};
        for (int gi = g->size() - 1; gi >= 0; --gi)
            for (int r = 0; r < k.exps[static_cast<size_t>(gi)]; ++r) {
                TermMap next;
                for (const auto& [kk, cc] : cur) add_shifted(next, g->right_multiply(kk.exps, gi), cc, kk.hgrade);
                cur = std::move(next);
            }
        add_shifted(out, cur, c.conj(), k.hgrade);
    }
    return AlgebraElement(g, std::move(out));
}

AlgebraElement divide_ihbar(const AlgebraElement& a) {
    TermMap out;
    const QQi minus_i = -QQi::i();
    for (const auto& [k, c] : a.terms()) {
        if (k.hgrade < 2) raise(ErrorKind::UnsupportedForm, "term without a factor of hbar cannot be divided by i*hbar");
        add_into(out, TermKey{k.exps, k.hgrade - 2}, c * minus_i);
    }
    return AlgebraElement(a.gens(), std::move(out));
}

std::vector<Exponents> monomial_basis(const GenPtr& gens, int max_degree, const std::vector<int>& among) {
    std::vector<int> vars = among;
    if (vars.empty())
        for (int i = 0; i < gens->size(); ++i) vars.push_back(i);
    std::vector<Exponents> out;
    Exponents cur(static_cast<size_t>(gens->size()), 0);
    for (int d = 0; d <= max_degree; ++d) {
        // Distribute d units over vars in lexicographic order.
        std::function<void(size_t, int)> rec = [&](size_t v, int left) {
            if (v + 1 == vars.size()) {
                cur[static_cast<size_t>(vars[v])] = left;
                out.push_back(cur);
                cur[static_cast<size_t>(vars[v])] = 0;
                return;
            }
            for (int e = left; e >= 0; --e) {
                cur[static_cast<size_t>(vars[v])] = e;
                rec(v + 1, left - e);
            }
            cur[static_cast<size_t>(vars[v])] = 0;
        };
        if (vars.empty()) {
            if (d == 0) out.push_back(cur);
            continue;
        }
        rec(0, d);
    }
    return out;
}

TermMap to_weyl_basis(const AlgebraElement& a) {
    TermMap out;
    AlgebraElement rest = a;
    while (!rest.is_zero()) {
        // Peel off the leading-degree term; Weyl(m) = m + lower degree.
        auto best = rest.terms().begin();
        for (auto it = rest.terms().begin(); it != rest.terms().end(); ++it)
            if (degree(it->first.exps) > degree(best->first.exps)) best = it;
        TermKey k = best->first;
        QQi c = best->second;
        add_into(out, k, c);
        rest -= c * weyl_symmetrize(a.gens(), k.exps).times_hbar(k.hgrade);
    }
    return out;
}

bool associativity_holds(const AlgebraElement& a, const AlgebraElement& b, const AlgebraElement& c) {
    return (a * b) * c == a * (b * c);
}

RepresentationReport check_representation(const GenPtr& gens, double hbar,
                                          const std::vector<Eigen::MatrixXcd>& assignment,
                                          const std::vector<Eigen::VectorXcd>& test_states) {
    RepresentationReport rep;
    const int n = gens->size();
    if (static_cast<int>(assignment.size()) != n) throw std::invalid_argument("assignment size mismatch");
    const cplx ih(0.0, hbar);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto& A = assignment[static_cast<size_t>(i)];
            const auto& B = assignment[static_cast<size_t>(j)];
            Eigen::MatrixXcd R = A * B - B * A;
            R -= ih * gens->identity_part(i, j).to_complex() * Eigen::MatrixXcd::Identity(A.rows(), A.cols());
            for (int k = 0; k < n; ++k) {
                const QQi& c = gens->lie_part(i, j, k);
                if (!c.is_zero()) R -= ih * c.to_complex() * assignment[static_cast<size_t>(k)];
            }
            if (gens->is_canonical_pair(i, j)) {
                for (const auto& v : test_states)
                    rep.canonical_residual = std::max(rep.canonical_residual, (R * v).norm() / v.norm());
            } else {
                double r = R.cwiseAbs().maxCoeff();
                rep.lie_residual = std::max(rep.lie_residual, r);
                if (r > 1e-10)
                    raise(ErrorKind::RelationViolation, "[" + gens->name(i) + ", " + gens->name(j) +
                                                            "] misses its relation by " + std::to_string(r));
            }
        }
    return rep;
}

Eigen::MatrixXcd represent(const AlgebraElement& a, double hbar, const std::vector<Eigen::MatrixXcd>& assignment) {
    const auto& g = a.gens();
    if (!g) throw std::invalid_argument("represent: element without generator set");
    const Eigen::Index dim = assignment.at(0).rows();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    std::map<std::pair<int, int>, Eigen::MatrixXcd> powers;
    auto power = [&](int gi, int e) -> const Eigen::MatrixXcd& {
        auto key = std::make_pair(gi, e);
        auto it = powers.find(key);
        if (it != powers.end()) return it->second;
        Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(dim, dim);
        for (int r = 0; r < e; ++r) p = p * assignment[static_cast<size_t>(gi)];
        return powers.emplace(key, std::move(p)).first->second;
    };
    for (const auto& [k, c] : a.terms()) {
        Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(dim, dim);
        for (int gi = 0; gi < g->size(); ++gi)
            if (k.exps[static_cast<size_t>(gi)] > 0) term = term * power(gi, k.exps[static_cast<size_t>(gi)]);
        out += c.to_complex() * std::pow(hbar, 0.5 * k.hgrade) * term;
    }
    return out;
}

}  // namespace qrf::ncalg
