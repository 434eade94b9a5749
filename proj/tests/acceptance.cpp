#include "qrf/effective.hpp"
#include "qrf/models.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>

using namespace qrf;
using namespace qrf::effective;
using namespace qrf::models;

namespace {

constexpr double kTol = 1e-10;

/// Criteria whose literal statement contradicts the derivation; see README.
const std::set<int> kKnownDeviations{4};

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void report(const Report& r, double tol = kTol) {
        const double w = r.worst(tol);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s/%s worst residual/tol %.2g", r.suite.c_str(), r.model.c_str(), w);
        require(r.passed(tol), buf);
        notes.push_back(buf);
    }
    std::vector<std::string> notes;
};

struct Sym {
    GenPtr g;
    MomentFunction y(const std::string& n) const { return MomentFunction::expect(g, n); }
    MomentFunction d(const std::vector<std::string>& n) const { return MomentFunction::moment(g, n); }
    MomentFunction par(const std::string& n) const { return MomentFunction::param(g, n); }
    MomentFunction c(const QQi& v) const { return MomentFunction::constant(g, v); }
    MomentFunction hbar() const { return MomentFunction::hbar(g); }
    OperatorExpr op(const std::string& n) const { return OperatorExpr::generator(g, n); }
    int i(const std::string& n) const { return g->index(n); }
    Exponents e(const std::vector<std::string>& n) const {
        Exponents out(static_cast<size_t>(g->size()), 0);
        for (const auto& x : n) ++out[static_cast<size_t>(i(x))];
        return out;
    }
};

const QQi half(Rational(1, 2));
const QQi i_half(Rational(0), Rational(1, 2));

MomentFunction tower_entry(const std::vector<TowerFunction>& t, const std::string& label) {
    for (const auto& x : t)
        if (x.label == label) return x.f;
    return {};
}

// 1. Physical inner product, Page–Wootters, algebraic and Θ-gauge values agree.
Outcome criterion1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (auto k : {ModelKind::newtonian, ModelKind::nparticle}) {
        const Model m = build_model(default_spec(k));
        o.require(m.space.dim() <= 4096, "dimension above 4096");
        EquivalenceOptions opt;
        opt.states = 5;
        opt.observables = 20;
        o.report(run_equivalence_suite(m, opt));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 60.0, "runtime " + std::to_string(secs) + " s");
    return o;
}

// 2. Constraint tower, Δ(q_R p_R) and the Newtonian expansions with exact coefficients.
Outcome criterion2() {
    Outcome o;
    Sym s{testing::canonical_pairs({"R", "S"})};
    const OperatorExpr G = s.c(half) * (s.op("p_S") * s.op("p_S")) + s.op("q_S") * s.op("q_S");
    const auto t = constraint_tower(G + s.op("p_R"), 2);
    // T₂Δ(y G_S) for this G_S is p_S Δ(y p_S) + 2 q_S Δ(y q_S).
    auto dG = [&](const std::string& y) {
        return s.y("p_S") * s.d({y, "p_S"}) + QQi(2) * s.y("q_S") * s.d({y, "q_S"});
    };
    o.require(tower_entry(t, "C") ==
                  s.y("p_R") + s.c(half) * s.y("p_S").pow(2) + s.c(half) * s.d({"p_S", "p_S"}) + s.y("q_S").pow(2) +
                      s.d({"q_S", "q_S"}),
              "C");
    o.require(tower_entry(t, "C_q_R") == s.d({"q_R", "p_R"}) + dG("q_R") + i_half * s.hbar(), "C_q_R with +iħ/2");
    o.require(tower_entry(t, "C_p_R") == s.d({"p_R", "p_R"}) + dG("p_R"), "C_p_R");
    // ½⟨[q_S, G_S]⟩ = ½ iħ p_S.
    o.require(tower_entry(t, "C_q_S") == s.d({"p_R", "q_S"}) + dG("q_S") + i_half * s.hbar() * s.y("p_S"), "C_q_S");
    const auto sol = fix_frame_gauge(t, s.i("q_R"), s.i("p_R"), s.par("rho"), 2);
    o.require(sol.impose(s.d({"q_R", "p_R"})) == -(i_half * s.hbar()), "Δ(q_R p_R) = −iħ/2");

    Sym n{testing::canonical_pairs({"C", "S"})};
    const OperatorExpr H = n.op("p_C") + n.c(half) * (n.op("p_S") * n.op("p_S"));
    const MomentFunction CH = n.y("p_C") + n.c(half) * n.y("p_S").pow(2) + n.c(half) * n.d({"p_S", "p_S"});
    o.require(expect_expand_sym(H, 2) == CH, "Newtonian C_H");
    o.require(expect_expand_sym(H, 6) == CH, "Newtonian C_H untruncated");
    EffFramePair fp;
    fp.qA = n.i("q_C");
    fp.pA = n.i("p_C");
    fp.G_S = n.c(half) * (n.op("p_S") * n.op("p_S"));
    fp.rhoA = n.par("tau");
    const MomentFunction Oq = n.y("q_S") - (n.y("q_C") - n.par("tau")) * n.y("p_S") - n.d({"q_C", "p_S"});
    o.require(transformed_expectation(fp, n.op("q_S"), 2) == Oq, "Newtonian O(q_S)");
    o.require(transformed_expectation(fp, n.op("q_S"), 6) == Oq, "Newtonian O(q_S) untruncated");
    o.require(poisson_bracket(truncate(Oq, 0), truncate(CH, 0)).is_zero(), "{T₀O(q_S), T₀C_H} = 0");
    return o;
}

// 3. Frame-change laws: numerically on three particles, symbolically in the effective engine.
Outcome criterion3() {
    Outcome o;
    ModelSpec spec = default_spec(ModelKind::nparticle);
    spec.particles = 3;
    const Model m = build_model(spec);
    o.report(run_variance_experiment(m));

    Sym s{testing::canonical_pairs({"A", "B", "C"})};
    EffFramePair fp;
    fp.qA = s.i("q_A");
    fp.pA = s.i("p_A");
    fp.qB = s.i("q_B");
    fp.pB = s.i("p_B");
    fp.G_S = s.op("p_C");
    fp.rhoA = s.par("rho_A");
    fp.rhoB = s.par("rho_B");
    o.require(transformed_expectation(fp, s.op("q_B"), 2) == s.par("rho_B") + s.par("rho_A") - s.y("q_A"), "<q_B>_A");
    o.require(transformed_expectation(fp, s.op("p_B"), 2) == -s.y("p_A") - s.y("p_C"), "<p_B>_A");
    for (int M : {2, 3, 4}) {
        o.require(transformed_moment(fp, s.e({"q_C", "q_C"}), M) ==
                      s.d({"q_C", "q_C"}) + s.d({"q_A", "q_A"}) - QQi(2) * s.d({"q_A", "q_C"}),
                  "variance law M=" + std::to_string(M));
        o.require(transformed_moment(fp, s.e({"q_B", "q_C"}), M) == s.d({"q_A", "q_A"}) - s.d({"q_A", "q_C"}),
                  "covariance law (D=B) M=" + std::to_string(M));
    }
    // General covariance law: reference frame D distinct from B needs four particles.
    Sym f{testing::canonical_pairs({"A", "B", "C", "D"})};
    EffFramePair gp;
    gp.qA = f.i("q_A");
    gp.pA = f.i("p_A");
    gp.qB = f.i("q_D");
    gp.pB = f.i("p_D");
    gp.G_S = f.op("p_B") + f.op("p_C");
    gp.rhoA = f.par("rho_A");
    gp.rhoB = f.par("rho_D");
    o.require(transformed_moment(gp, f.e({"q_B", "q_C"}), 2) ==
                  f.d({"q_B", "q_C"}) + f.d({"q_A", "q_A"}) - f.d({"q_A", "q_B"}) - f.d({"q_A", "q_C"}),
              "general covariance law");
    return o;
}

// 4. su(2): closed-form Dirac observable and the effective J_x transformations.
Outcome criterion4() {
    Outcome o;
    ModelSpec spec = default_spec(ModelKind::su2);
    spec.j = 1;
    spec.N = 16;
    o.report(run_su2_suite(build_model(spec)));

    std::vector<std::string> names{"q_A", "p_A", "q_B", "p_B", "Jx", "Jy", "Jz"};
    std::vector<ncalg::Relation> rel{{0, 1, QQi(1), {}},
                                     {2, 3, QQi(1), {}},
                                     {4, 5, QQi(0), {{6, QQi(1)}}},
                                     {5, 6, QQi(0), {{4, QQi(1)}}},
                                     {6, 4, QQi(0), {{5, QQi(1)}}}};
    Sym s{ncalg::GeneratorSet::create(names, rel)};
    const auto beta = s.par("beta");
    EffFramePair fp;
    fp.qA = 0;
    fp.pA = 1;
    fp.qB = 2;
    fp.pB = 3;
    fp.G_S = -(beta * s.op("Jz"));
    fp.rhoA = s.par("rho_A");
    fp.rhoB = s.par("rho_B");
    const auto arg = beta * (s.y("q_A") - s.par("rho_A"));
    const auto cs = MomentFunction::cos(arg), sn = MomentFunction::sin(arg);
    const auto ocl = cs * s.y("Jx") - sn * s.y("Jy");

    const auto jx = transformed_expectation(fp, s.op("Jx"), 2);
    o.require(jx == ocl - beta * sn * s.d({"q_A", "Jx"}) - beta * cs * s.d({"q_A", "Jy"}) -
                        s.c(half) * beta.pow(2) * ocl * s.d({"q_A", "q_A"}),
              "T₂(J_x)_A");
    // B = A: gauge conditions of A on the right-hand side give back J_x.
    auto impose_A = [&](const MomentFunction& f) {
        std::map<Atom, MomentFunction> g;
        for (const auto& a : f.atoms())
            if (a.kind == AtomKind::moment && a.exps[0] > 0) g.emplace(a, MomentFunction(s.g));
        g.emplace(*s.y("q_A").atoms().begin(), s.par("rho_A"));
        return substitute(f, g);
    };
    o.require(impose_A(jx) == s.y("Jx"), "B=A limit of T₂(J_x)_A");

    const auto cov = transformed_moment(fp, s.e({"q_B", "Jx"}), 2);
    const auto literal = -(cs * s.d({"q_A", "Jx"})) + sn * s.d({"q_A", "Jy"}) +
                         s.c(half) * (beta * sn * s.y("Jx") + beta * cs * s.y("Jy")) * s.d({"q_A", "q_A"});
    o.require(cov == literal, "T₂Δ(q_B J_x)_A differs from the printed equation by (Δq_A)² coefficient β vs β/2");
    o.require(impose_A(cov).is_zero(), "B=A vanishing of T₂Δ(q_B J_x)_A");
    return o;
}

// 5. Degenerate branches and sector kernels.
Outcome criterion5() {
    Outcome o;
    o.report(run_degenerate_suite(build_model(default_spec(ModelKind::degenerate))));
    return o;
}

// 6. ħ-scaling of the effective frame change.
Outcome criterion6() {
    Outcome o;
    const auto r = run_scaling_experiment(default_spec(ModelKind::su2));
    for (const auto& [M, slope] : r.slopes) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "M=%d slope %.3f (target %.1f)", M, slope, (M + 1) / 2.0);
        o.notes.push_back(buf);
    }
    o.report(scaling_report(r));
    return o;
}

// 7. Projector identities and the gauge-flow derivative on every model.
Outcome criterion7() {
    Outcome o;
    for (auto k : {ModelKind::newtonian, ModelKind::nparticle, ModelKind::su2, ModelKind::degenerate})
        o.report(run_projector_battery(build_model(default_spec(k))));
    return o;
}

MomentFunction random_function(const GenPtr& g, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nterms(1, 3), nat(1, 2), gen(0, g->size() - 1), kind(0, 2), deg(2, 3);
    MomentFunction f(g);
    const int t = nterms(rng);
    for (int k = 0; k < t; ++k) {
        MomentFunction term = MomentFunction::constant(g, testing::random_qqi(rng));
        const int a = nat(rng);
        for (int r = 0; r < a; ++r) {
            if (kind(rng) == 0) {
                Exponents e(static_cast<size_t>(g->size()), 0);
                const int d = deg(rng);
                for (int j = 0; j < d; ++j) ++e[static_cast<size_t>(gen(rng))];
                term = term * MomentFunction::moment(g, e);
            } else {
                term = term * MomentFunction::expect(g, gen(rng));
            }
        }
        f += term;
    }
    return f;
}

// 8. Lie-algebra properties of the commutator and the Poisson bracket; truncation commutes with brackets.
Outcome criterion8() {
    Outcome o;
    std::mt19937_64 rng(8);
    int ncalg_n = 0, pb_n = 0, trunc_n = 0;
    for (GenPtr g : {testing::canonical_pairs({"A", "B"}), testing::pair_and_su2()}) {
        for (int k = 0; k < 60; ++k, ++ncalg_n) {
            const auto a = testing::random_element(g, rng), b = testing::random_element(g, rng),
                       c = testing::random_element(g, rng);
            using ncalg::commutator;
            o.require((commutator(a, b) + commutator(b, a)).is_zero(), "ncalg antisymmetry");
            o.require(commutator(a, b * c) == commutator(a, b) * c + b * commutator(a, c), "ncalg Leibniz");
            o.require((commutator(commutator(a, b), c) + commutator(commutator(b, c), a) + commutator(commutator(c, a), b))
                          .is_zero(),
                      "ncalg Jacobi");
        }
        for (int k = 0; k < 60; ++k, ++pb_n) {
            const auto f = random_function(g, rng), h = random_function(g, rng), u = random_function(g, rng);
            o.require(poisson_bracket(f, h) == -poisson_bracket(h, f), "Poisson antisymmetry");
            o.require(poisson_bracket(f, h * u) == poisson_bracket(f, h) * u + h * poisson_bracket(f, u), "Poisson Leibniz");
            o.require((poisson_bracket(f, poisson_bracket(h, u)) + poisson_bracket(h, poisson_bracket(u, f)) +
                       poisson_bracket(u, poisson_bracket(f, h)))
                          .is_zero(),
                      "Poisson Jacobi");
        }
        for (int k = 0; k < 12; ++k, ++trunc_n) {
            // Tower constraint function against an expanded observable.
            const auto C = expect_expand_sym(testing::random_element(g, rng, 3, 3));
            const auto O = expect_expand_sym(testing::random_element(g, rng, 3, 3));
            for (int M : {2, 3})
                o.require(truncate(poisson_bracket(truncate(C, M), truncate(O, M)), M) == truncate(poisson_bracket(C, O), M),
                          "truncation/bracket commutation M=" + std::to_string(M));
        }
    }
    o.require(ncalg_n >= 100 && pb_n >= 100 && trunc_n >= 20, "too few instances");
    o.notes.push_back(std::to_string(ncalg_n) + " commutator triples, " + std::to_string(pb_n) + " bracket triples, " +
                      std::to_string(trunc_n) + " truncation pairs");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    bool strict = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only.insert(std::atoi(argv[++i]));
        else if (std::strcmp(argv[i], "--strict") == 0) strict = true;
        else {
            std::fprintf(stderr, "usage: %s [--only K]... [--strict]\n", argv[0]);
            return 2;
        }
    }
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"five-way equivalence", criterion1},     {"symbolic exactness", criterion2},
        {"frame-change laws", criterion3},        {"su(2) transformations", criterion4},
        {"degenerate equivalence", criterion5},   {"hbar-scaling convergence", criterion6},
        {"projector identity battery", criterion7}, {"property suites", criterion8}};
    int unexpected = 0, failed = 0;
    for (size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string info;
        for (const auto& n : o.notes) info += (info.empty() ? "" : ", ") + n;
        std::printf("criterion %d %s: %s (%.1f s)%s%s%s%s\n", id, criteria[k].first, o.pass ? "PASS" : "FAIL", secs,
                    info.empty() ? "" : " [", info.c_str(), info.empty() ? "" : "]",
                    o.pass ? "" : (" -- " + o.detail).c_str());
        std::fflush(stdout);
        if (!o.pass) {
            ++failed;
            if (strict || !kKnownDeviations.count(id)) ++unexpected;
        }
    }
    std::printf("%d failing criteria, %d unexpected\n", failed, unexpected);
    return unexpected == 0 ? 0 : 1;
}
