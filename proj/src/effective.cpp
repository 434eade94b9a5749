#include "qrf/effective.hpp"

#include "qrf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>

namespace qrf::effective {

namespace {

using ncalg::TermMap;
using Terms = std::map<Monomial, QQi>;

int cmp_qqi(const QQi& a, const QQi& b) {
    if (a.re() != b.re()) return a.re() < b.re() ? -1 : 1;
    if (a.im() != b.im()) return a.im() < b.im() ? -1 : 1;
    return 0;
}

int cmp_fn(const MomentFunction& a, const MomentFunction& b) {
    auto ia = a.terms().begin();
    auto ib = b.terms().begin();
    for (; ia != a.terms().end() && ib != b.terms().end(); ++ia, ++ib) {
        if (ia->first < ib->first) return -1;
        if (ib->first < ia->first) return 1;
        if (int c = cmp_qqi(ia->second, ib->second)) return c;
    }
    if (ia == a.terms().end() && ib == b.terms().end()) return 0;
    return ia == a.terms().end() ? -1 : 1;
}

Rational binom(int n, int k) {
    Rational r(1);
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Rational factorial(int n) {
    Rational r(1);
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

/// Every k with 0 ≤ k ≤ m componentwise.
std::vector<Exponents> sub_exponents(const Exponents& m) {
    std::vector<Exponents> out;
    Exponents k(m.size(), 0);
    while (true) {
        out.push_back(k);
        size_t i = 0;
        for (; i < m.size(); ++i) {
            if (k[i] < m[i]) {
                ++k[i];
                break;
            }
            k[i] = 0;
        }
        if (i == m.size()) break;
    }
    return out;
}

Atom make_atom(AtomKind kind) {
    Atom a;
    a.kind = kind;
    return a;
}

Atom expect_atom(int i) {
    Atom a = make_atom(AtomKind::expect);
    a.gen = i;
    return a;
}

Atom moment_atom(const Exponents& e) {
    Atom a = make_atom(AtomKind::moment);
    a.exps = e;
    return a;
}

Atom weyl_atom(const Exponents& e) {
    Atom a = make_atom(AtomKind::weyl);
    a.exps = e;
    return a;
}

GenPtr pick(const GenPtr& a, const GenPtr& b) { return a ? a : b; }

// Per-generator-set caches; entries are dropped when the set is destroyed.
struct GenCache {
    std::weak_ptr<const ncalg::GeneratorSet> owner;
    std::map<Exponents, MomentFunction> weyl_moments;
    std::map<TermKey, TermMap> weyl_basis;
    std::map<std::pair<Exponents, Exponents>, MomentFunction> w_brackets;
    std::map<std::pair<Atom, Atom>, MomentFunction> atom_brackets;
};

std::recursive_mutex cache_mu;
std::map<const ncalg::GeneratorSet*, GenCache> caches;

GenCache& cache_for(const GenPtr& gens) {
    GenCache& c = caches[gens.get()];
    if (c.owner.expired() || c.owner.lock() != gens) {
        c = GenCache{};
        c.owner = gens;
    }
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Atoms

int Atom::semiclassical_order() const {
    switch (kind) {
        case AtomKind::moment: return ncalg::degree(exps);
        case AtomKind::sqrt_hbar: return 1;
        case AtomKind::param: return order;
        default: return 0;
    }
}

bool operator<(const Atom& a, const Atom& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.gen != b.gen) return a.gen < b.gen;
    if (a.exps != b.exps) return a.exps < b.exps;
    if (a.name != b.name) return a.name < b.name;
    if (a.order != b.order) return a.order < b.order;
    if (!a.arg || !b.arg) return !a.arg && b.arg;
    return cmp_fn(*a.arg, *b.arg) < 0;
}

bool operator==(const Atom& a, const Atom& b) {
    if (a.kind != b.kind || a.gen != b.gen || a.exps != b.exps || a.name != b.name || a.order != b.order) return false;
    if (!a.arg || !b.arg) return !a.arg && !b.arg;
    return *a.arg == *b.arg;
}

int order_of(const Monomial& m) {
    int o = 0;
    for (const auto& [a, p] : m) o += a.semiclassical_order() * p;
    return o;
}

// ---------------------------------------------------------------------------
// MomentFunction

bool operator<(const MomentFunction& a, const MomentFunction& b) { return cmp_fn(a, b) < 0; }

void MomentFunction::add_term(const Monomial& m, const QQi& c) {
    if (c.is_zero()) return;
    for (const auto& [a, p] : m) {
        if (a.kind != AtomKind::sin || p < 2) continue;
        Monomial r = m;
        const Atom s = a;
        if (p == 2) r.erase(s);
        else r[s] = p - 2;
        add_term(r, c);
        Atom cs = s;
        cs.kind = AtomKind::cos;
        r[cs] += 2;
        add_term(r, -c);
        return;
    }
    auto it = terms_.find(m);
    if (it == terms_.end()) {
        terms_.emplace(m, c);
    } else {
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

MomentFunction MomentFunction::constant(const GenPtr& gens, const QQi& c) {
    MomentFunction f(gens);
    f.add_term({}, c);
    return f;
}

MomentFunction MomentFunction::atom(const GenPtr& gens, const Atom& a, int power) {
    MomentFunction f(gens);
    if (power == 0) f.add_term({}, QQi(1));
    else f.add_term({{a, power}}, QQi(1));
    return f;
}

MomentFunction MomentFunction::expect(const GenPtr& gens, int i) {
    if (i < 0 || i >= gens->size()) raise(ErrorKind::IndexOutOfRange, "no generator " + std::to_string(i));
    return atom(gens, expect_atom(i));
}

MomentFunction MomentFunction::expect(const GenPtr& gens, const std::string& name) {
    const int i = gens->index(name);
    if (i < 0) raise(ErrorKind::IndexOutOfRange, "no generator " + name);
    return expect(gens, i);
}

MomentFunction MomentFunction::moment(const GenPtr& gens, const Exponents& exps) {
    const int d = ncalg::degree(exps);
    if (d == 0) return constant(gens, QQi(1));
    if (d == 1) return MomentFunction(gens);
    return atom(gens, moment_atom(exps));
}

MomentFunction MomentFunction::moment(const GenPtr& gens, const std::vector<std::string>& names) {
    Exponents e(static_cast<size_t>(gens->size()), 0);
    for (const auto& n : names) {
        const int i = gens->index(n);
        if (i < 0) raise(ErrorKind::IndexOutOfRange, "no generator " + n);
        ++e[static_cast<size_t>(i)];
    }
    return moment(gens, e);
}

MomentFunction MomentFunction::param(const GenPtr& gens, const std::string& name, int order) {
    Atom a = make_atom(AtomKind::param);
    a.name = name;
    a.order = order;
    return atom(gens, a);
}

MomentFunction MomentFunction::hbar(const GenPtr& gens) { return atom(gens, make_atom(AtomKind::sqrt_hbar), 2); }

MomentFunction MomentFunction::sqrt_hbar(const GenPtr& gens) { return atom(gens, make_atom(AtomKind::sqrt_hbar)); }

namespace {

// cos(−u) = cos u and sin(−u) = −sin u; the leading coefficient is made positive.
MomentFunction trig(const MomentFunction& arg, AtomKind kind) {
    if (arg.is_zero()) return MomentFunction::constant(arg.gens(), QQi(kind == AtomKind::cos ? 1 : 0));
    if (arg.order() != 0 || truncate(arg, 0) != arg)
        raise(ErrorKind::UnsupportedForm, "trig argument must be of order zero: " + arg.str());
    const QQi& lead = arg.terms().begin()->second;
    const bool flip = lead.re() < 0 || (lead.re() == 0 && lead.im() < 0);
    Atom a = make_atom(kind);
    a.arg = std::make_shared<const MomentFunction>(flip ? -arg : arg);
    MomentFunction f = MomentFunction::atom(arg.gens(), a);
    return (flip && kind == AtomKind::sin) ? -f : f;
}

}  // namespace

MomentFunction MomentFunction::cos(const MomentFunction& arg) { return trig(arg, AtomKind::cos); }

MomentFunction MomentFunction::sin(const MomentFunction& arg) { return trig(arg, AtomKind::sin); }

bool MomentFunction::is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty()); }

QQi MomentFunction::constant_term() const {
    auto it = terms_.find(Monomial{});
    return it == terms_.end() ? QQi(0) : it->second;
}

int MomentFunction::order() const {
    int o = untruncated;
    for (const auto& [m, c] : terms_) o = std::min(o, order_of(m));
    return o;
}

std::set<Atom> MomentFunction::atoms() const {
    std::set<Atom> out;
    for (const auto& [m, c] : terms_)
        for (const auto& [a, p] : m) out.insert(a);
    return out;
}

bool MomentFunction::depends_on(const Atom& a) const {
    for (const auto& [m, c] : terms_)
        for (const auto& [b, p] : m) {
            if (b == a) return true;
            if (b.arg && b.arg->depends_on(a)) return true;
        }
    return false;
}

MomentFunction& MomentFunction::operator+=(const MomentFunction& o) {
    gens_ = pick(gens_, o.gens_);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
}

MomentFunction& MomentFunction::operator-=(const MomentFunction& o) {
    gens_ = pick(gens_, o.gens_);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
}

MomentFunction MomentFunction::operator-() const {
    MomentFunction f(gens_);
    for (const auto& [m, c] : terms_) f.terms_.emplace(m, -c);
    return f;
}

MomentFunction operator*(const MomentFunction& a, const MomentFunction& b) {
    MomentFunction f(pick(a.gens_, b.gens_));
    for (const auto& [ma, ca] : a.terms_)
        for (const auto& [mb, cb] : b.terms_) {
            Monomial m = ma;
            for (const auto& [x, p] : mb) m[x] += p;
            f.add_term(m, ca * cb);
        }
    return f;
}

MomentFunction operator*(const QQi& c, const MomentFunction& a) {
    MomentFunction f(a.gens_);
    if (c.is_zero()) return f;
    for (const auto& [m, x] : a.terms_) f.terms_.emplace(m, c * x);
    return f;
}

MomentFunction MomentFunction::pow(int n) const {
    if (n < 0) raise(ErrorKind::UnsupportedForm, "negative power");
    MomentFunction r = constant(gens_, QQi(1));
    for (int i = 0; i < n; ++i) r = r * *this;
    return r;
}

namespace {

std::string generator_list(const GenPtr& gens, const Exponents& e) {
    std::string s;
    for (size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) {
            if (!s.empty()) s += ' ';
            s += gens ? gens->name(static_cast<int>(i)) : "y" + std::to_string(i);
        }
    return s;
}

std::string atom_str(const Atom& a, const GenPtr& gens) {
    switch (a.kind) {
        case AtomKind::expect: return gens ? gens->name(a.gen) : "y" + std::to_string(a.gen);
        case AtomKind::moment: {
            int nz = 0, at = 0;
            for (size_t i = 0; i < a.exps.size(); ++i)
                if (a.exps[i] != 0) {
                    ++nz;
                    at = static_cast<int>(i);
                }
            if (nz == 1 && a.exps[static_cast<size_t>(at)] == 2)
                return "(Δ" + (gens ? gens->name(at) : "y" + std::to_string(at)) + ")^2";
            return "Δ(" + generator_list(gens, a.exps) + ")";
        }
        case AtomKind::sqrt_hbar: return "sqrt_hbar";
        case AtomKind::param: return a.name;
        case AtomKind::cos: return "cos(" + a.arg->str() + ")";
        case AtomKind::sin: return "sin(" + a.arg->str() + ")";
        case AtomKind::weyl: return "W(" + generator_list(gens, a.exps) + ")";
    }
    return "?";
}

}  // namespace

std::string MomentFunction::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c.str();
        for (const auto& [a, p] : m) {
            if (a.kind == AtomKind::sqrt_hbar && p % 2 == 0) {
                os << "*hbar";
                if (p > 2) os << '^' << p / 2;
                continue;
            }
            os << '*' << atom_str(a, gens_);
            if (p != 1) os << '^' << p;
        }
    }
    return os.str();
}

MomentFunction truncate(const MomentFunction& f, int M) {
    MomentFunction out(f.gens());
    for (const auto& [m, c] : f.terms())
        if (order_of(m) <= M) out.add_term(m, c);
    return out;
}

MomentFunction derivative(const MomentFunction& f, const Atom& a) {
    MomentFunction out(f.gens());
    for (const auto& [m, c] : f.terms()) {
        for (const auto& [b, p] : m) {
            Monomial rest = m;
            if (p == 1) rest.erase(b);
            else rest[b] = p - 1;
            if (b == a) {
                out.add_term(rest, c * QQi(p));
            } else if (b.arg && (b.kind == AtomKind::cos || b.kind == AtomKind::sin)) {
                const MomentFunction du = derivative(*b.arg, a);
                if (du.is_zero()) continue;
                // d cos u = −sin u du, d sin u = cos u du
                const MomentFunction outer =
                    b.kind == AtomKind::cos ? -MomentFunction::sin(*b.arg) : MomentFunction::cos(*b.arg);
                MomentFunction r(f.gens());
                r.add_term(rest, c * QQi(p));
                out += r * outer * du;
            }
        }
    }
    return out;
}

MomentFunction substitute(const MomentFunction& f, const std::map<Atom, MomentFunction>& values) {
    if (values.empty()) return f;
    MomentFunction out(f.gens());
    for (const auto& [m, c] : f.terms()) {
        MomentFunction t = MomentFunction::constant(f.gens(), c);
        Monomial keep;
        for (const auto& [a, p] : m) {
            auto it = values.find(a);
            if (it != values.end()) {
                t = t * it->second.pow(p);
            } else if (a.kind == AtomKind::cos || a.kind == AtomKind::sin) {
                const MomentFunction arg = substitute(*a.arg, values);
                const MomentFunction tf = a.kind == AtomKind::cos ? MomentFunction::cos(arg) : MomentFunction::sin(arg);
                t = t * tf.pow(p);
            } else {
                keep[a] += p;
            }
        }
        MomentFunction k(f.gens());
        k.add_term(keep, QQi(1));
        out += t * k;
    }
    return out;
}

MomentFunction divide_exact(const MomentFunction& f, const MomentFunction& m) {
    if (m.terms().size() != 1) raise(ErrorKind::UnsupportedForm, "divisor must be a single term: " + m.str());
    const auto& [dm, dc] = *m.terms().begin();
    MomentFunction out(pick(f.gens(), m.gens()));
    for (const auto& [tm, tc] : f.terms()) {
        Monomial r = tm;
        for (const auto& [a, p] : dm) {
            auto it = r.find(a);
            if (it == r.end() || it->second < p)
                raise(ErrorKind::UnsupportedForm, m.str() + " does not divide " + f.str());
            if ((it->second -= p) == 0) r.erase(it);
        }
        out.add_term(r, tc / dc);
    }
    return out;
}

namespace {

/// Square root of a single-term function with even powers and a square rational coefficient.
MomentFunction monomial_sqrt(const MomentFunction& f) {
    auto fail = [&]() -> MomentFunction { raise(ErrorKind::UnsupportedForm, "no exact square root of " + f.str()); };
    if (f.terms().size() != 1) return fail();
    const auto& [m, c] = *f.terms().begin();
    if (!c.is_real() || c.re() <= 0) return fail();
    using boost::multiprecision::mpz_int;
    const mpz_int num = boost::multiprecision::numerator(c.re());
    const mpz_int den = boost::multiprecision::denominator(c.re());
    const mpz_int sn = boost::multiprecision::sqrt(num);
    const mpz_int sd = boost::multiprecision::sqrt(den);
    if (sn * sn != num || sd * sd != den) return fail();
    Monomial r;
    for (const auto& [a, p] : m) {
        if (p % 2 != 0) return fail();
        r[a] = p / 2;
    }
    MomentFunction out(f.gens());
    out.add_term(r, QQi(Rational(sn, sd)));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// OperatorExpr

void OperatorExpr::add_term(const TermKey& k, const MomentFunction& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(k);
    if (it == terms_.end()) {
        terms_.emplace(k, c);
    } else {
        it->second += c;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

OperatorExpr OperatorExpr::from(const AlgebraElement& a) {
    OperatorExpr e(a.gens());
    for (const auto& [k, c] : a.terms()) e.add_term(k, MomentFunction::constant(a.gens(), c));
    return e;
}

OperatorExpr OperatorExpr::scalar(const MomentFunction& c) {
    if (!c.gens()) raise(ErrorKind::UnsupportedForm, "scalar operator needs a generator set");
    OperatorExpr e(c.gens());
    e.add_term(TermKey{Exponents(static_cast<size_t>(c.gens()->size()), 0), 0}, c);
    return e;
}

OperatorExpr OperatorExpr::scalar(const GenPtr& gens, const QQi& c) { return scalar(MomentFunction::constant(gens, c)); }

OperatorExpr OperatorExpr::generator(const GenPtr& gens, int i) { return from(AlgebraElement::generator(gens, i)); }

OperatorExpr OperatorExpr::generator(const GenPtr& gens, const std::string& name) {
    return from(AlgebraElement::generator(gens, name));
}

OperatorExpr& OperatorExpr::operator+=(const OperatorExpr& o) {
    gens_ = pick(gens_, o.gens_);
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
}

OperatorExpr& OperatorExpr::operator-=(const OperatorExpr& o) {
    gens_ = pick(gens_, o.gens_);
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
}

OperatorExpr OperatorExpr::operator-() const {
    OperatorExpr e(gens_);
    for (const auto& [k, c] : terms_) e.terms_.emplace(k, -c);
    return e;
}

OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b) {
    OperatorExpr out(pick(a.gens_, b.gens_));
    for (const auto& [ka, ca] : a.terms_)
        for (const auto& [kb, cb] : b.terms_) {
            const MomentFunction cc = ca * cb;
            if (cc.is_zero()) continue;
            for (const auto& [k, c] : out.gens_->monomial_product(ka.exps, kb.exps))
                out.add_term(TermKey{k.exps, k.hgrade + ka.hgrade + kb.hgrade}, c * cc);
        }
    return out;
}

OperatorExpr operator*(const MomentFunction& c, const OperatorExpr& a) {
    OperatorExpr out(pick(a.gens_, c.gens()));
    for (const auto& [k, x] : a.terms_) out.add_term(k, c * x);
    return out;
}

std::set<int> OperatorExpr::support() const {
    std::set<int> s;
    for (const auto& [k, c] : terms_)
        for (size_t i = 0; i < k.exps.size(); ++i)
            if (k.exps[i] != 0) s.insert(static_cast<int>(i));
    return s;
}

std::string OperatorExpr::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << '(' << c.str() << ')';
        if (k.hgrade != 0) os << "*sqrt_hbar^" << k.hgrade;
        for (size_t i = 0; i < k.exps.size(); ++i)
            if (k.exps[i] != 0) {
                os << '*' << gens_->name(static_cast<int>(i));
                if (k.exps[i] != 1) os << '^' << k.exps[i];
            }
    }
    return os.str();
}

OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b) { return a * b - b * a; }

OperatorExpr divide_ihbar(const OperatorExpr& a) {
    const QQi minus_i(Rational(0), Rational(-1));
    OperatorExpr r(a.gens());
    for (const auto& [k, c] : a.terms()) {
        if (k.hgrade < 2) raise(ErrorKind::UnsupportedForm, "term without a factor of hbar: " + a.str());
        r += (minus_i * c) * OperatorExpr::from(AlgebraElement::monomial(a.gens(), k.exps, QQi(1), k.hgrade - 2));
    }
    return r;
}

OperatorExpr weyl_product(const std::vector<OperatorExpr>& factors, const Exponents& k) {
    if (factors.size() != k.size()) raise(ErrorKind::IndexOutOfRange, "one exponent per factor expected");
    std::vector<int> seq;
    for (size_t i = 0; i < k.size(); ++i)
        for (int j = 0; j < k[i]; ++j) seq.push_back(static_cast<int>(i));
    GenPtr gens;
    for (const auto& f : factors) gens = pick(gens, f.gens());
    if (seq.empty()) return OperatorExpr::scalar(gens, QQi(1));
    OperatorExpr acc(gens);
    long count = 0;
    do {
        OperatorExpr p = factors[static_cast<size_t>(seq[0])];
        for (size_t j = 1; j < seq.size(); ++j) p = p * factors[static_cast<size_t>(seq[j])];
        acc += p;
        ++count;
    } while (std::next_permutation(seq.begin(), seq.end()));
    return MomentFunction::constant(gens, QQi(Rational(1, count))) * acc;
}

// ---------------------------------------------------------------------------
// Expectations

namespace {

TermMap weyl_basis_of(const GenPtr& gens, const TermKey& k) {
    {
        std::lock_guard<std::recursive_mutex> lk(cache_mu);
        auto& c = cache_for(gens);
        auto it = c.weyl_basis.find(k);
        if (it != c.weyl_basis.end()) return it->second;
    }
    TermMap w = ncalg::to_weyl_basis(AlgebraElement::monomial(gens, k.exps, QQi(1), k.hgrade));
    std::lock_guard<std::recursive_mutex> lk(cache_mu);
    cache_for(gens).weyl_basis.emplace(k, w);
    return w;
}

/// ⟨Weyl(y^m)⟩ = Σ_{k ≤ m} Π binom(m_i, k_i) y^{m−k} Δ(k).
MomentFunction weyl_in_moments(const GenPtr& gens, const Exponents& m) {
    {
        std::lock_guard<std::recursive_mutex> lk(cache_mu);
        auto& c = cache_for(gens);
        auto it = c.weyl_moments.find(m);
        if (it != c.weyl_moments.end()) return it->second;
    }
    MomentFunction out(gens);
    for (const Exponents& k : sub_exponents(m)) {
        const int dk = ncalg::degree(k);
        if (dk == 1) continue;
        Rational coef(1);
        Monomial mono;
        for (size_t i = 0; i < m.size(); ++i) {
            coef *= binom(m[i], k[i]);
            if (m[i] - k[i] > 0) mono[expect_atom(static_cast<int>(i))] = m[i] - k[i];
        }
        if (dk >= 2) mono[moment_atom(k)] = 1;
        out.add_term(mono, QQi(coef));
    }
    std::lock_guard<std::recursive_mutex> lk(cache_mu);
    cache_for(gens).weyl_moments.emplace(m, out);
    return out;
}

MomentFunction sqrt_hbar_power(const GenPtr& gens, int g) {
    if (g == 0) return MomentFunction::constant(gens, QQi(1));
    Atom h;
    h.kind = AtomKind::sqrt_hbar;
    return MomentFunction::atom(gens, h, g);
}

/// Drops coefficient terms that can only contribute above order M.
OperatorExpr truncate_op(const OperatorExpr& X, int M) {
    OperatorExpr out(X.gens());
    for (const auto& [k, c] : X.terms()) {
        const MomentFunction t = truncate(c, M - k.hgrade);
        if (t.is_zero()) continue;
        out += t * OperatorExpr::from(AlgebraElement::monomial(X.gens(), k.exps, QQi(1), k.hgrade));
    }
    return out;
}

}  // namespace

MomentFunction expect_expand_sym(const OperatorExpr& X, int M) {
    const GenPtr& gens = X.gens();
    MomentFunction out(gens);
    for (const auto& [k, c] : X.terms()) {
        const int oc = c.order();
        if (oc + k.hgrade > M) continue;
        const MomentFunction cm = truncate(c, M - k.hgrade);
        for (const auto& [w, wc] : weyl_basis_of(gens, k)) {
            if (w.hgrade + cm.order() > M) continue;
            const MomentFunction e = truncate(weyl_in_moments(gens, w.exps), M - w.hgrade);
            out += truncate(wc * (cm * sqrt_hbar_power(gens, w.hgrade) * e), M);
        }
    }
    return out;
}

MomentFunction expect_expand_sym(const AlgebraElement& P, int M) { return expect_expand_sym(OperatorExpr::from(P), M); }

// ---------------------------------------------------------------------------
// Poisson bracket

namespace {

/// Expectation of an operator with constant coefficients in W coordinates.
MomentFunction expect_in_w(const AlgebraElement& X) {
    const GenPtr& gens = X.gens();
    MomentFunction out(gens);
    for (const auto& [w, c] : ncalg::to_weyl_basis(X)) {
        MomentFunction t = sqrt_hbar_power(gens, w.hgrade);
        if (ncalg::degree(w.exps) > 0) t = t * MomentFunction::atom(gens, weyl_atom(w.exps));
        out += c * t;
    }
    return out;
}

MomentFunction w_bracket(const GenPtr& gens, const Exponents& j, const Exponents& l) {
    const auto key = std::make_pair(j, l);
    {
        std::lock_guard<std::recursive_mutex> lk(cache_mu);
        auto& c = cache_for(gens);
        auto it = c.w_brackets.find(key);
        if (it != c.w_brackets.end()) return it->second;
    }
    const AlgebraElement a = ncalg::weyl_symmetrize(gens, j);
    const AlgebraElement b = ncalg::weyl_symmetrize(gens, l);
    const MomentFunction r = expect_in_w(ncalg::divide_ihbar(ncalg::commutator(a, b)));
    std::lock_guard<std::recursive_mutex> lk(cache_mu);
    cache_for(gens).w_brackets.emplace(key, r);
    return r;
}

/// Expectation or moment atom written in W coordinates.
MomentFunction to_w(const GenPtr& gens, const Atom& a) {
    const size_t n = static_cast<size_t>(gens->size());
    if (a.kind == AtomKind::expect) {
        Exponents e(n, 0);
        e[static_cast<size_t>(a.gen)] = 1;
        return MomentFunction::atom(gens, weyl_atom(e));
    }
    // Δ(k) = Σ_{j ≤ k} Π binom(k_i, j_i) (−y_i)^{k_i−j_i} W_j
    MomentFunction out(gens);
    for (const Exponents& j : sub_exponents(a.exps)) {
        Rational coef(1);
        int sign_power = 0;
        Monomial mono;
        for (size_t i = 0; i < n; ++i) {
            coef *= binom(a.exps[i], j[i]);
            const int r = a.exps[i] - j[i];
            sign_power += r;
            if (r > 0) {
                Exponents e(n, 0);
                e[i] = 1;
                mono[weyl_atom(e)] += r;
            }
        }
        if (ncalg::degree(j) > 0) mono[weyl_atom(j)] += 1;
        out.add_term(mono, QQi(sign_power % 2 == 0 ? coef : Rational(-coef)));
    }
    return out;
}

/// W_m back to expectations and moments.
MomentFunction from_w(const MomentFunction& f) {
    std::map<Atom, MomentFunction> values;
    for (const Atom& a : f.atoms())
        if (a.kind == AtomKind::weyl) values.emplace(a, weyl_in_moments(f.gens(), a.exps));
    return substitute(f, values);
}

MomentFunction atom_bracket(const GenPtr& gens, const Atom& a, const Atom& b) {
    const auto key = std::make_pair(a, b);
    {
        std::lock_guard<std::recursive_mutex> lk(cache_mu);
        auto& c = cache_for(gens);
        auto it = c.atom_brackets.find(key);
        if (it != c.atom_brackets.end()) return it->second;
    }
    const MomentFunction A = to_w(gens, a);
    const MomentFunction B = to_w(gens, b);
    MomentFunction r(gens);
    for (const Atom& wa : A.atoms()) {
        if (wa.kind != AtomKind::weyl) continue;
        const MomentFunction dA = derivative(A, wa);
        for (const Atom& wb : B.atoms()) {
            if (wb.kind != AtomKind::weyl) continue;
            const MomentFunction br = w_bracket(gens, wa.exps, wb.exps);
            if (br.is_zero()) continue;
            r += dA * derivative(B, wb) * br;
        }
    }
    r = from_w(r);
    std::lock_guard<std::recursive_mutex> lk(cache_mu);
    cache_for(gens).atom_brackets.emplace(key, r);
    return r;
}

void base_atoms(const MomentFunction& f, std::set<Atom>& out) {
    for (const auto& [m, c] : f.terms())
        for (const auto& [a, p] : m) {
            if (a.kind == AtomKind::expect || a.kind == AtomKind::moment) out.insert(a);
            else if (a.arg) base_atoms(*a.arg, out);
        }
}

}  // namespace

MomentFunction poisson_bracket(const MomentFunction& f, const MomentFunction& g) {
    const GenPtr gens = pick(f.gens(), g.gens());
    MomentFunction out(gens);
    if (!gens) return out;
    std::set<Atom> af, ag;
    base_atoms(f, af);
    base_atoms(g, ag);
    for (const Atom& a : af) {
        const MomentFunction da = derivative(f, a);
        if (da.is_zero()) continue;
        for (const Atom& b : ag) {
            const MomentFunction br = atom_bracket(gens, a, b);
            if (br.is_zero()) continue;
            out += da * derivative(g, b) * br;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numeric states

cplx MomentState::value(const Atom& a) const {
    switch (a.kind) {
        case AtomKind::expect: {
            auto it = expectations.find(a.gen);
            if (it == expectations.end())
                raise(ErrorKind::UnsupportedForm, "missing expectation of " + gens->name(a.gen));
            return it->second;
        }
        case AtomKind::moment: {
            auto it = moments.find(a.exps);
            if (it != moments.end()) return it->second;
            if (ncalg::degree(a.exps) > M) return 0.0;
            raise(ErrorKind::UnsupportedForm, "missing moment " + atom_str(a, gens));
        }
        case AtomKind::sqrt_hbar: return std::sqrt(hbar);
        case AtomKind::param: {
            auto it = params.find(a.name);
            if (it == params.end()) raise(ErrorKind::UnsupportedForm, "missing parameter " + a.name);
            return it->second;
        }
        default: raise(ErrorKind::UnsupportedForm, "atom has no stored value: " + atom_str(a, gens));
    }
}

cplx MomentState::expect(const std::string& name) const {
    const int i = gens->index(name);
    if (i < 0) raise(ErrorKind::IndexOutOfRange, "no generator " + name);
    return value(expect_atom(i));
}

cplx MomentState::moment(const std::vector<std::string>& names) const {
    return evaluate(MomentFunction::moment(gens, names), *this);
}

cplx evaluate(const MomentFunction& f, const MomentState& s) {
    cplx total = 0.0;
    for (const auto& [m, c] : f.terms()) {
        cplx t = c.to_complex();
        for (const auto& [a, p] : m) {
            cplx v;
            if (a.kind == AtomKind::cos) v = std::cos(evaluate(*a.arg, s));
            else if (a.kind == AtomKind::sin) v = std::sin(evaluate(*a.arg, s));
            else v = s.value(a);
            for (int k = 0; k < p; ++k) t *= v;
        }
        total += t;
    }
    return total;
}

cplx expect_expand(const AlgebraElement& P, const MomentState& s) { return evaluate(expect_expand_sym(P, s.M), s); }

cplx expect_expand(const OperatorExpr& P, const MomentState& s) { return evaluate(expect_expand_sym(P, s.M), s); }

MomentState moments_from_hilbert(const AlgebraicState& w, int M, const std::vector<int>& among) {
    const GenPtr& gens = w.gens();
    MomentState s;
    s.gens = gens;
    s.M = M;
    s.hbar = w.hbar();
    std::map<Exponents, cplx> W;
    for (const Exponents& j : ncalg::monomial_basis(gens, M, among))
        W[j] = ncalg::degree(j) == 0 ? cplx(1.0) : w.evaluate(ncalg::weyl_symmetrize(gens, j));
    const size_t n = static_cast<size_t>(gens->size());
    std::vector<cplx> y(n, 0.0);
    for (const auto& [j, v] : W)
        if (ncalg::degree(j) == 1)
            for (size_t i = 0; i < n; ++i)
                if (j[i] == 1) {
                    y[i] = v;
                    s.expectations[static_cast<int>(i)] = v;
                }
    for (const auto& [k, v] : W) {
        if (ncalg::degree(k) < 2) continue;
        cplx d = 0.0;
        for (const Exponents& j : sub_exponents(k)) {
            cplx t = W.at(j);
            for (size_t i = 0; i < n; ++i) {
                t *= to_double(binom(k[i], j[i]));
                for (int r = 0; r < k[i] - j[i]; ++r) t *= -y[i];
            }
            d += t;
        }
        s.moments[k] = d;
    }
    return s;
}

MomentState moments_from_hilbert(const GenPtr& gens, const LatticeSpace& space, const GeneratorAssignment& assignment,
                                 const Vec& ket, int M, const std::vector<int>& among) {
    const AlgebraicState w = AlgebraicState::from_hilbert(gens, space, assignment, ket, ket,
                                                          std::max(M, AlgebraicState::default_degree));
    return moments_from_hilbert(w, M, among);
}

// ---------------------------------------------------------------------------
// Constraint towers and gauge fixing

std::vector<TowerFunction> constraint_tower(const OperatorExpr& C, int M) {
    const GenPtr& gens = C.gens();
    std::vector<TowerFunction> out;
    out.push_back({"C", -1, expect_expand_sym(C, M)});
    for (int i = 0; i < gens->size(); ++i) {
        const OperatorExpr d = OperatorExpr::generator(gens, i) - OperatorExpr::scalar(MomentFunction::expect(gens, i));
        out.push_back({"C_" + gens->name(i), i, expect_expand_sym(d * C, M)});
    }
    return out;
}

std::vector<TowerFunction> constraint_tower(const AlgebraElement& C, int M) {
    return constraint_tower(OperatorExpr::from(C), M);
}

namespace {

/**
 * Solves equations one unknown at a time; an equation is used when exactly one unknown
 * remains and it enters linearly with a constant coefficient.
 */
void solve_linear(const std::vector<MomentFunction>& eqs, const std::function<bool(const Atom&)>& unknown,
                  std::map<Atom, MomentFunction>& values, int M) {
    std::vector<bool> used(eqs.size(), false);
    bool progress = true;
    while (progress) {
        progress = false;
        for (size_t e = 0; e < eqs.size(); ++e) {
            if (used[e]) continue;
            const MomentFunction f = truncate(substitute(eqs[e], values), M);
            if (f.is_zero()) {
                used[e] = true;
                continue;
            }
            std::set<Atom> all;
            base_atoms(f, all);
            std::vector<Atom> unk;
            for (const Atom& a : all)
                if (unknown(a) && !values.count(a)) unk.push_back(a);
            if (unk.size() != 1) continue;
            const Atom& u = unk.front();
            if (!f.atoms().count(u)) continue;  // only inside a trig argument
            const MomentFunction d = derivative(f, u);
            if (!d.is_constant() || d.is_zero()) continue;
            const MomentFunction rest = f - d * MomentFunction::atom(f.gens(), u);
            if (rest.depends_on(u)) continue;
            const MomentFunction sol = truncate((QQi(-1) / d.constant_term()) * rest, M);
            const std::map<Atom, MomentFunction> one{{u, sol}};
            for (auto& [a, v] : values) v = truncate(substitute(v, one), M);
            values.emplace(u, sol);
            used[e] = true;
            progress = true;
        }
    }
}

}  // namespace

MomentFunction GaugeSolution::impose(const MomentFunction& f) const { return truncate(substitute(f, values), M); }

GaugeSolution fix_frame_gauge(const std::vector<TowerFunction>& tower, int qR, int pR, const MomentFunction& rho, int M) {
    if (tower.empty()) raise(ErrorKind::InsufficientTower, "empty tower");
    const GenPtr gens = tower.front().f.gens();
    if (!gens) raise(ErrorKind::InsufficientTower, "tower has no generator set");
    if (!tower.front().f.depends_on(expect_atom(pR)))
        raise(ErrorKind::InsufficientTower, "constraint does not contain " + gens->name(pR));
    GaugeSolution g;
    g.qR = qR;
    g.pR = pR;
    g.M = M;
    g.values.emplace(expect_atom(qR), rho);
    const auto basis = ncalg::monomial_basis(gens, M);
    for (const Exponents& e : basis)
        if (ncalg::degree(e) >= 2 && e[static_cast<size_t>(qR)] > 0 && e[static_cast<size_t>(pR)] == 0)
            g.values.emplace(moment_atom(e), MomentFunction(gens));
    auto unknown = [&](const Atom& a) {
        if (a.kind == AtomKind::expect) return a.gen == pR;
        return a.kind == AtomKind::moment && a.exps[static_cast<size_t>(pR)] > 0 && ncalg::degree(a.exps) <= M;
    };
    std::vector<MomentFunction> eqs;
    for (const auto& t : tower) eqs.push_back(t.f);
    solve_linear(eqs, unknown, g.values, M);
    std::vector<std::string> missing;
    if (!g.values.count(expect_atom(pR))) missing.push_back(gens->name(pR));
    for (const Exponents& e : basis)
        if (ncalg::degree(e) >= 2 && e[static_cast<size_t>(pR)] > 0 && !g.values.count(moment_atom(e)))
            missing.push_back(atom_str(moment_atom(e), gens));
    if (!missing.empty()) {
        std::string msg = "tower does not determine";
        for (const auto& m : missing) msg += " " + m;
        raise(ErrorKind::InsufficientTower, msg);
    }
    return g;
}

MomentState apply_gauge(const GaugeSolution& g, const MomentState& s) {
    MomentState out = s;
    for (const auto& [a, f] : g.values) {
        const cplx v = evaluate(f, s);
        if (a.kind == AtomKind::expect) out.expectations[a.gen] = v;
        else if (a.kind == AtomKind::moment) out.moments[a.exps] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Effective frame changes

namespace {

OperatorExpr flow_generator(const EffFramePair& fp) {
    OperatorExpr g = fp.G_S;
    if (fp.pB >= 0) g += OperatorExpr::generator(fp.G_S.gens(), fp.pB);
    return g;
}

OperatorExpr d_map(const OperatorExpr& X, const OperatorExpr& gen) { return divide_ihbar(commutator(X, gen)); }

}  // namespace

OperatorExpr relational_generator(const EffFramePair& fp, int generator, int M) {
    const GenPtr& gens = fp.G_S.gens();
    if (generator == fp.qA || generator == fp.pA)
        raise(ErrorKind::UnsupportedForm, "relational image of a frame-A generator");
    const OperatorExpr gen = flow_generator(fp);
    const OperatorExpr y = OperatorExpr::generator(gens, generator);
    const OperatorExpr qA = OperatorExpr::generator(gens, fp.qA);

    // Nilpotent case: Σ (ρ_A − q̂_A)^n/n! Dⁿ y.
    std::vector<OperatorExpr> chain{y};
    constexpr int max_chain = 12;
    while (static_cast<int>(chain.size()) <= max_chain && !chain.back().is_zero())
        chain.push_back(d_map(chain.back(), gen));
    if (chain.back().is_zero()) {
        const OperatorExpr u = OperatorExpr::scalar(fp.rhoA) - qA;
        OperatorExpr out = y;
        OperatorExpr un = OperatorExpr::scalar(gens, QQi(1));
        for (size_t n = 1; n + 1 < chain.size(); ++n) {
            un = un * u;
            out += MomentFunction::constant(gens, QQi(Rational(1) / factorial(static_cast<int>(n)))) * (un * chain[n]);
        }
        return out;
    }

    // Oscillating case: D²y = −κ²y gives cos(κu) y + sin(κu) (Dy/κ), expanded around ⟨q_A⟩.
    const OperatorExpr& dy = chain[1];
    const OperatorExpr& d2y = chain[2];
    const auto& [k0, c0] = *y.terms().begin();
    auto it = d2y.terms().find(k0);
    if (it == d2y.terms().end() || d2y.terms().size() != y.terms().size())
        raise(ErrorKind::UnsupportedForm, "relational series is neither terminating nor oscillating");
    const MomentFunction kappa2 = divide_exact(-it->second, c0);
    if (!(d2y == -(kappa2 * y))) raise(ErrorKind::UnsupportedForm, "D^2 y is not proportional to y");
    const MomentFunction kappa = monomial_sqrt(kappa2);
    OperatorExpr ey(gens);
    for (const auto& [k, c] : dy.terms())
        ey += divide_exact(c, kappa) * OperatorExpr::from(AlgebraElement::monomial(gens, k.exps, QQi(1), k.hgrade));

    const MomentFunction u0 = kappa * (fp.rhoA - MomentFunction::expect(gens, fp.qA));
    const OperatorExpr xhat = qA - OperatorExpr::scalar(MomentFunction::expect(gens, fp.qA));
    const MomentFunction c = MomentFunction::cos(u0), s = MomentFunction::sin(u0);
    // f^{(n)} of cos and sin at u0, n mod 4.
    const MomentFunction dcos[4] = {c, -s, -c, s};
    const MomentFunction dsin[4] = {s, c, -s, -c};
    OperatorExpr cos_op(gens), sin_op(gens);
    OperatorExpr pw = OperatorExpr::scalar(gens, QQi(1));  // (−κ X̂)^n
    const OperatorExpr step = (-kappa) * xhat;
    for (int n = 0; n <= M; ++n) {
        const MomentFunction inv = MomentFunction::constant(gens, QQi(Rational(1) / factorial(n)));
        cos_op += (inv * dcos[n % 4]) * pw;
        sin_op += (inv * dsin[n % 4]) * pw;
        pw = truncate_op(pw * step, M);
    }
    return truncate_op(cos_op * y + sin_op * ey, M);
}

OperatorExpr relational_expr(const EffFramePair& fp, const OperatorExpr& f, int M) {
    const GenPtr& gens = fp.G_S.gens();
    std::map<int, OperatorExpr> images;
    OperatorExpr out(gens);
    for (const auto& [k, c] : f.terms()) {
        OperatorExpr t = c * OperatorExpr::from(AlgebraElement::scalar(gens, QQi(1), k.hgrade));
        for (size_t i = 0; i < k.exps.size(); ++i) {
            if (k.exps[i] == 0) continue;
            const int g = static_cast<int>(i);
            if (g == fp.qA || g == fp.pA) raise(ErrorKind::UnsupportedForm, "observable involves frame A");
            auto im = images.find(g);
            if (im == images.end()) im = images.emplace(g, relational_generator(fp, g, M)).first;
            for (int r = 0; r < k.exps[i]; ++r) t = truncate_op(t * im->second, M);
        }
        out += t;
    }
    return out;
}

OperatorExpr eliminate_frame(const EffFramePair& fp, const OperatorExpr& X) {
    if (fp.qB < 0) return X;
    const GenPtr& gens = X.gens() ? X.gens() : fp.G_S.gens();
    if (fp.qB > fp.pB) raise(ErrorKind::OrderingViolation, "q_B must precede p_B in the normal order");
    for (int j = 0; j < gens->size(); ++j) {
        if (j != fp.pB && !gens->commute(fp.qB, j)) raise(ErrorKind::OrderingViolation, "q_B must only fail to commute with p_B");
        if (j != fp.qB && !gens->commute(fp.pB, j)) raise(ErrorKind::OrderingViolation, "p_B must only fail to commute with q_B");
    }
    const OperatorExpr pb_sub = -OperatorExpr::generator(gens, fp.pA) - fp.G_S;
    std::vector<OperatorExpr> pb_pow{OperatorExpr::scalar(gens, QQi(1))};
    OperatorExpr out(gens);
    for (const auto& [k, c] : X.terms()) {
        const int a = k.exps[static_cast<size_t>(fp.qB)];
        const int b = k.exps[static_cast<size_t>(fp.pB)];
        Exponents rest = k.exps;
        rest[static_cast<size_t>(fp.qB)] = 0;
        rest[static_cast<size_t>(fp.pB)] = 0;
        while (static_cast<int>(pb_pow.size()) <= b) pb_pow.push_back(pb_pow.back() * pb_sub);
        const OperatorExpr R = OperatorExpr::from(AlgebraElement::monomial(gens, rest, QQi(1), k.hgrade));
        out += (c * fp.rhoB.pow(a)) * (R * pb_pow[static_cast<size_t>(b)]);
    }
    return out;
}

MomentFunction transformed_expectation(const EffFramePair& fp, const OperatorExpr& f, int M) {
    return truncate(expect_expand_sym(eliminate_frame(fp, relational_expr(fp, f, M)), M), M);
}

namespace {

OperatorExpr pA_image(const EffFramePair& fp) {
    const GenPtr& gens = fp.G_S.gens();
    OperatorExpr r = -fp.G_S;
    if (fp.pB >= 0) r -= OperatorExpr::generator(gens, fp.pB);
    return r;
}

}  // namespace

MomentFunction transformed_moment(const EffFramePair& fp, const Exponents& k, int M) {
    const GenPtr& gens = fp.G_S.gens();
    if (k[static_cast<size_t>(fp.qA)] != 0) raise(ErrorKind::UnsupportedForm, "moments of q_A are fixed by the A gauge");
    std::vector<OperatorExpr> factors;
    Exponents kk;
    for (size_t i = 0; i < k.size(); ++i) {
        if (k[i] == 0 || static_cast<int>(i) == fp.pA) continue;
        const OperatorExpr y = OperatorExpr::generator(gens, static_cast<int>(i));
        const OperatorExpr img = relational_expr(fp, y, M);
        factors.push_back(img - OperatorExpr::scalar(transformed_expectation(fp, y, M)));
        kk.push_back(k[i]);
    }
    OperatorExpr X = factors.empty() ? OperatorExpr::scalar(gens, QQi(1)) : weyl_product(factors, kk);
    const int a = k[static_cast<size_t>(fp.pA)];
    if (a > 0) {
        const OperatorExpr img = pA_image(fp);
        const OperatorExpr d = img - OperatorExpr::scalar(transformed_expectation(fp, img, M));
        for (int r = 0; r < a; ++r) X = truncate_op(X * d, M);
    }
    return truncate(expect_expand_sym(eliminate_frame(fp, truncate_op(X, M)), M), M);
}

MomentState effective_frame_transform(const MomentState& sB, const EffFramePair& fp, int M) {
    if (fp.qA == fp.qB) return sB;
    const GenPtr& gens = sB.gens;
    MomentState out;
    out.gens = gens;
    out.M = M;
    out.hbar = sB.hbar;
    out.params = sB.params;
    for (int i = 0; i < gens->size(); ++i) {
        if (i == fp.qA) {
            out.expectations[i] = evaluate(fp.rhoA, sB);
        } else if (i == fp.pA) {
            out.expectations[i] = evaluate(transformed_expectation(fp, pA_image(fp), M), sB);
        } else {
            out.expectations[i] = evaluate(transformed_expectation(fp, OperatorExpr::generator(gens, i), M), sB);
        }
    }
    for (const Exponents& k : ncalg::monomial_basis(gens, M)) {
        if (ncalg::degree(k) < 2) continue;
        if (k[static_cast<size_t>(fp.qA)] > 0) {
            if (k[static_cast<size_t>(fp.pA)] == 0) out.moments[k] = 0.0;
            continue;
        }
        out.moments[k] = evaluate(transformed_moment(fp, k, M), sB);
    }
    return out;
}

MomentFunction transform_uncertainty_sym(const EffFramePair& fp, const OperatorExpr& f_S, int M) {
    const OperatorExpr O = relational_expr(fp, f_S, M);
    const MomentFunction e = truncate(expect_expand_sym(eliminate_frame(fp, O), M), M);
    const MomentFunction e2 = truncate(expect_expand_sym(eliminate_frame(fp, truncate_op(O * O, M)), M), M);
    return truncate(e2 - e * e, M);
}

cplx transform_uncertainty(const OperatorExpr& f_S, const MomentState& sB, const EffFramePair& fp, int M) {
    return evaluate(transform_uncertainty_sym(fp, f_S, M), sB);
}

// ---------------------------------------------------------------------------
// Degenerate constraints

std::pair<DegenerateBranch, DegenerateBranch> degenerate_solve(const GenPtr& gens, int qR, int pR, int H) {
    if (!gens->commute(H, qR) || !gens->commute(H, pR))
        raise(ErrorKind::UnsupportedForm, "H must commute with the frame generators");
    constexpr int M = 2;
    const OperatorExpr p = OperatorExpr::generator(gens, pR);
    const OperatorExpr h = OperatorExpr::generator(gens, H);
    const auto full = constraint_tower(p * p - h * h, M);
    auto pick_eqs = [&](const std::vector<TowerFunction>& t) {
        std::vector<MomentFunction> eqs;
        for (const auto& x : t)
            if (x.generator == -1 || x.generator == pR || x.generator == H) eqs.push_back(x.f);
        return eqs;
    };
    auto unknown = [&](const Atom& a) {
        if (a.kind == AtomKind::expect) return a.gen == pR;
        return a.kind == AtomKind::moment && a.exps[static_cast<size_t>(pR)] > 0 && a.exps[static_cast<size_t>(qR)] == 0;
    };
    auto branch = [&](int sign) {
        DegenerateBranch b;
        b.sign = sign;
        const OperatorExpr factor = p - MomentFunction::constant(gens, QQi(sign)) * h;
        solve_linear(pick_eqs(constraint_tower(factor, M)), unknown, b.values, M);
        for (const MomentFunction& e : pick_eqs(full)) b.full_tower_residuals.push_back(truncate(substitute(e, b.values), M));
        return b;
    };
    return {branch(1), branch(-1)};
}

std::pair<cplx, cplx> sqrt_expansion(cplx G, cplx varG, double threshold) {
    if (std::abs(G) < threshold || G.real() < threshold)
        raise(ErrorKind::NearZeroEnergy, "<G_S> = " + std::to_string(G.real()) + " is too small for the square-root expansion");
    const cplx sg = std::sqrt(G);
    return {sg - varG / (8.0 * G * sg), varG / (4.0 * G)};
}

// ---------------------------------------------------------------------------
// Truncated flows

MomentState constraint_flow(const MomentState& s, const MomentFunction& generator, double lambda, int steps) {
    if (steps <= 0) raise(ErrorKind::StepTooLarge, "at least one step is needed");
    const GenPtr& gens = s.gens;
    std::vector<Atom> vars;
    for (const auto& [i, v] : s.expectations) vars.push_back(expect_atom(i));
    for (const auto& [e, v] : s.moments) vars.push_back(moment_atom(e));
    std::vector<MomentFunction> rhs;
    for (const Atom& a : vars) rhs.push_back(truncate(poisson_bracket(MomentFunction::atom(gens, a), generator), s.M));

    auto load = [&](const std::vector<cplx>& x) {
        MomentState t = s;
        for (size_t i = 0; i < vars.size(); ++i) {
            if (vars[i].kind == AtomKind::expect) t.expectations[vars[i].gen] = x[i];
            else t.moments[vars[i].exps] = x[i];
        }
        return t;
    };
    auto field = [&](const std::vector<cplx>& x) {
        const MomentState t = load(x);
        std::vector<cplx> d(x.size());
        for (size_t i = 0; i < x.size(); ++i) d[i] = evaluate(rhs[i], t);
        return d;
    };
    auto axpy = [](const std::vector<cplx>& x, double h, const std::vector<cplx>& k) {
        std::vector<cplx> r = x;
        for (size_t i = 0; i < r.size(); ++i) r[i] += h * k[i];
        return r;
    };
    auto rk4 = [&](const std::vector<cplx>& x, double h) {
        const auto k1 = field(x);
        const auto k2 = field(axpy(x, h / 2, k1));
        const auto k3 = field(axpy(x, h / 2, k2));
        const auto k4 = field(axpy(x, h, k3));
        std::vector<cplx> r = x;
        for (size_t i = 0; i < r.size(); ++i) r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return r;
    };

    std::vector<cplx> x;
    for (const Atom& a : vars) x.push_back(s.value(a));
    const double h = lambda / steps;
    for (int n = 0; n < steps; ++n) {
        const auto full = rk4(x, h);
        const auto half = rk4(rk4(x, h / 2), h / 2);
        for (size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(half[i].real()) || !std::isfinite(half[i].imag()))
                raise(ErrorKind::StepTooLarge, "flow diverged at step " + std::to_string(n));
            if (std::abs(full[i] - half[i]) > 1e-6 * (1.0 + std::abs(half[i])))
                raise(ErrorKind::StepTooLarge, "step-doubling error too large at step " + std::to_string(n));
        }
        x = half;
    }
    return load(x);
}

}  // namespace qrf::effective
