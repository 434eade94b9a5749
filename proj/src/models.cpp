#include "qrf/models.hpp"

#include "qrf/errors.hpp"
#include "qrf/reduction_gauge.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace qrf::models {

using effective::EffFramePair;
using effective::MomentFunction;
using effective::MomentState;
using effective::OperatorExpr;

namespace {

const cplx I(0.0, 1.0);

bool is_integer(const Rational& r) { return denominator(r) == 1; }

std::string fmt(const Rational& r) { return to_string(r); }

Mat diag_mat(const std::vector<double>& d) {
    Mat m = Mat::Zero(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
}

Mat random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    return (a + a.adjoint()) / (2.0 * std::sqrt(static_cast<double>(n)));
}

Vec random_vec(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    return v;
}

GenPtr canonical_gens(const std::vector<std::string>& labels, bool su2) {
    std::vector<std::string> names;
    std::vector<ncalg::Relation> rel;
    for (size_t i = 0; i < labels.size(); ++i) {
        names.push_back("q_" + labels[i]);
        names.push_back("p_" + labels[i]);
        rel.push_back({static_cast<int>(2 * i), static_cast<int>(2 * i + 1), QQi(1), {}});
    }
    if (su2) {
        const int x = static_cast<int>(names.size());
        names.insert(names.end(), {"Jx", "Jy", "Jz"});
        rel.push_back({x, x + 1, QQi(0), {{x + 2, QQi(1)}}});
        rel.push_back({x + 1, x + 2, QQi(0), {{x, QQi(1)}}});
        rel.push_back({x + 2, x, QQi(0), {{x + 1, QQi(1)}}});
    }
    return ncalg::GeneratorSet::create(names, rel);
}

std::string particle_label(int i) {
    if (i < 26) return std::string(1, static_cast<char>('A' + i));
    return "P" + std::to_string(i);
}

double default_width(int N) { return std::min(N / 8.0, 1.2); }

/// Orientation-basis profile e^{-x²/4σ²}(1 + skew·x/σ), x in grid units.
Vec lattice_profile(const OrientationFrame& f, double center, double width, double skew) {
    Vec v(f.N);
    for (int k = 0; k < f.N; ++k) {
        const double x = (f.rho(f.j_min() + k) - center) / f.drho;
        v(k) = std::exp(-x * x / (4 * width * width)) * (1.0 + skew * x / width);
    }
    return orientation_basis(f) * v.normalized();
}

struct SecondMoments {
    std::vector<cplx> mean;
    Mat cov;
};

/// Means and symmetrized covariances of hermitian local operators in the vector state v.
SecondMoments second_moments(const LatticeSpace& s, const std::vector<std::pair<int, Mat>>& ops, const Vec& v) {
    const double n = v.squaredNorm();
    std::vector<Vec> applied;
    SecondMoments out;
    for (const auto& [f, op] : ops) {
        applied.push_back(apply_local(s, f, op, v));
        out.mean.push_back(v.dot(applied.back()) / n);
    }
    const auto k = static_cast<int>(ops.size());
    out.cov = Mat::Zero(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            out.cov(a, b) = applied[static_cast<size_t>(a)].dot(applied[static_cast<size_t>(b)]).real() / n -
                            out.mean[static_cast<size_t>(a)] * out.mean[static_cast<size_t>(b)];
    return out;
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void add_group(Report& rep, const std::string& quantity, const std::vector<std::pair<std::string, cplx>>& values) {
    for (size_t a = 0; a < values.size(); ++a) {
        double r = 0.0;
        for (size_t b = 0; b < values.size(); ++b) r = std::max(r, std::abs(values[a].second - values[b].second));
        rep.rows.push_back({quantity, values[a].first, values[a].second, r, std::nullopt, true});
    }
}

Mat local_momentum(const FactorSpec& f) { return diag_mat(f.momenta()); }

}  // namespace

const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::newtonian: return "newtonian";
        case ModelKind::nparticle: return "nparticle";
        case ModelKind::su2: return "su2";
        case ModelKind::degenerate: return "degenerate";
    }
    return "?";
}

ModelKind parse_kind(const std::string& name) {
    for (auto k : {ModelKind::newtonian, ModelKind::nparticle, ModelKind::su2, ModelKind::degenerate})
        if (name == kind_name(k)) return k;
    raise(ErrorKind::ConfigError, "unknown model '" + name + "' (expected newtonian, nparticle, su2 or degenerate)");
}

ModelSpec default_spec(ModelKind k) {
    ModelSpec s;
    s.kind = k;
    switch (k) {
        case ModelKind::newtonian:
            s.N = 16;
            s.dp = Rational(1, 2);
            s.N_system = 4;
            s.state.centers = {0.0, 0.3};
            break;
        case ModelKind::nparticle:
            s.N = 8;
            s.state.centers = {0.0, 0.4, -0.3};
            break;
        case ModelKind::su2:
            s.N = 16;
            s.state.centers = {0.4, -0.3};
            break;
        case ModelKind::degenerate:
            s.N = 16;
            s.mass = 2;
            s.state.centers = {0.2};
            break;
    }
    return s;
}

SpinMatrices spin_matrices(const Rational& j, double hbar) {
    const Rational twoj = 2 * j;
    if (!is_integer(twoj) || twoj <= 0) raise(ErrorKind::ConfigError, "spin j must be a positive half-integer, got " + fmt(j));
    const int d = static_cast<int>(numerator(twoj).convert_to<long>()) + 1;
    const double jj = to_double(j);
    SpinMatrices s{Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d)};
    Mat up = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const double m = jj - i;
        s.z(i, i) = hbar * m;
        if (i > 0) up(i - 1, i) = hbar * std::sqrt(jj * (jj + 1) - m * (m + 1));
    }
    s.x = (up + up.adjoint()) / 2.0;
    s.y = (up - up.adjoint()) / (2.0 * I);
    return s;
}

Vec spin_coherent(const Rational& j, double theta, double phi) {
    const double jj = to_double(j);
    const int d = static_cast<int>(std::lround(2 * jj)) + 1;
    Vec v(d);
    for (int i = 0; i < d; ++i) {
        const double m = jj - i;
        const double lb = std::lgamma(2 * jj + 1) - std::lgamma(jj + m + 1) - std::lgamma(jj - m + 1);
        v(i) = std::exp(0.5 * lb) * std::pow(std::cos(theta / 2), jj + m) * std::pow(std::sin(theta / 2), jj - m) *
               std::polar(1.0, -m * phi);
    }
    return v.normalized();
}

Vec Model::project(Vec v) const {
    const double tol = 1e-9 * std::max(C.diag.cwiseAbs().maxCoeff(), 1.0);
    for (int i = 0; i < space.dim(); ++i)
        if (std::abs(C.diag(i)) > tol) v(i) = 0.0;
    return v;
}

Vec Model::initial_state(const StateRecipe& r) const {
    std::vector<Vec> locals;
    std::vector<int> lattice;
    for (int f = 0; f < space.num_factors(); ++f) {
        const auto& fs = space.factor(f);
        if (fs.is_lattice()) {
            const auto idx = lattice.size();
            lattice.push_back(f);
            const OrientationFrame fr = orientation_frame(space, f);
            const double c = idx < r.centers.size() ? r.centers[idx] : 0.0;
            double w = r.width > 0 ? r.width : default_width(fs.N);
            if (idx < r.widths.size() && r.widths[idx] > 0) w = r.widths[idx];
            locals.push_back(lattice_profile(fr, c, w, r.skew));
        } else {
            locals.push_back(spin_coherent(Rational(fs.N - 1, 2), r.theta, r.phi));
        }
    }
    Vec v = space.product_state(locals);
    if (r.shear != 0.0 && lattice.size() >= 2) {
        const auto p0 = space.factor(lattice[0]).momenta(), p1 = space.factor(lattice[1]).momenta();
        for (int i = 0; i < space.dim(); ++i) {
            const double a = p0[static_cast<size_t>(space.digit(i, lattice[0]))];
            const double b = p1[static_cast<size_t>(space.digit(i, lattice[1]))];
            v(i) *= std::polar(1.0, r.shear * a * b / space.hbar());
        }
    }
    v = project(std::move(v));
    if (v.norm() < 1e-12) raise(ErrorKind::EmptyKernel, "initial state has no physical component");
    return v.normalized();
}

Model build_model(const ModelSpec& spec) {
    if (spec.N < 2 || spec.N % 2 != 0) raise(ErrorKind::ConfigError, "N must be even and at least 2");
    if (spec.hbar <= 0 || spec.dp <= 0) raise(ErrorKind::ConfigError, "hbar and dp must be positive");
    Model m;
    m.spec = spec;
    const double hbar = to_double(spec.hbar), dp = to_double(spec.dp);
    const Rational half_N(spec.N / 2);
    std::vector<FactorSpec> fs;
    std::vector<int> frame_factors;

    switch (spec.kind) {
        case ModelKind::newtonian: {
            if (spec.N_system < 2 || spec.N_system % 2 != 0 || spec.dp_system <= 0)
                raise(ErrorKind::ConfigError, "N_system must be even and dp_system positive");
            std::vector<double> energy;
            for (int k = -spec.N_system / 2; k < spec.N_system / 2; ++k) {
                const Rational p = Rational(k) * spec.dp_system;
                const Rational e = p * p / 2;
                const Rational n = e / spec.dp;
                if (!is_integer(n) || -n < -half_N)
                    raise(ErrorKind::IncommensurableSpectrum,
                          "p_S^2/2 = " + fmt(e) + " is not on the clock momentum lattice (dp = " + fmt(spec.dp) + ", N = " +
                              std::to_string(spec.N) + "); choose dp dividing dp_system^2/2 and N >= dp_system^2 N_system^2/(4 dp)");
                energy.push_back(to_double(e));
            }
            fs = {FactorSpec::frame("C", spec.N, dp), FactorSpec::particle("S", spec.N_system, to_double(spec.dp_system), energy)};
            m.labels = {"C", "S"};
            frame_factors = {0};
            break;
        }
        case ModelKind::nparticle: {
            if (spec.particles < 2) raise(ErrorKind::ConfigError, "nparticle needs at least two particles");
            for (int i = 0; i < spec.particles; ++i) {
                m.labels.push_back(particle_label(i));
                fs.push_back(FactorSpec::frame(m.labels.back(), spec.N, dp));
                frame_factors.push_back(i);
            }
            break;
        }
        case ModelKind::su2: {
            const Rational twoj = 2 * spec.j;
            if (!is_integer(twoj) || twoj <= 0) raise(ErrorKind::ConfigError, "spin j must be a positive half-integer, got " + fmt(spec.j));
            const long d = numerator(twoj).convert_to<long>() + 1;
            std::vector<double> gs;
            for (long i = 0; i < d; ++i) {
                const Rational mj = spec.j - Rational(i);
                const Rational g = -spec.beta * spec.hbar * mj;
                if (!is_integer(g / spec.dp)) {
                    const Rational unit = is_integer(spec.j) ? Rational(spec.dp / spec.hbar) : Rational(2 * spec.dp / spec.hbar);
                    raise(ErrorKind::IncommensurableSpectrum,
                          "beta*hbar*m = " + fmt(-g) + " is off the frame momentum lattice (dp = " + fmt(spec.dp) +
                              "); choose beta as an integer multiple of " + fmt(unit));
                }
                gs.push_back(to_double(g));
            }
            fs = {FactorSpec::frame("A", spec.N, dp), FactorSpec::frame("B", spec.N, dp), FactorSpec::system("S", gs)};
            m.labels = {"A", "B", "S"};
            frame_factors = {0, 1};
            break;
        }
        case ModelKind::degenerate: {
            const Rational k = spec.mass / spec.dp;
            if (!is_integer(k) || k <= 0 || k >= half_N)
                raise(ErrorKind::IncommensurableSpectrum,
                      "mass " + fmt(spec.mass) + " is not a positive lattice momentum below N*dp/2 (dp = " + fmt(spec.dp) +
                          "); choose m = k*dp with 0 < k < N/2");
            if (spec.system_dim < 1) raise(ErrorKind::ConfigError, "system_dim must be positive");
            const double m2 = to_double(spec.mass * spec.mass);
            fs = {FactorSpec::frame("R", spec.N, dp), FactorSpec::system("S", std::vector<double>(static_cast<size_t>(spec.system_dim), m2))};
            m.labels = {"R", "S"};
            frame_factors = {0};
            break;
        }
    }

    m.space = tensor_space(fs, hbar);
    const auto& s = m.space;
    std::vector<std::string> lattice_labels;
    for (int f = 0; f < s.num_factors(); ++f)
        if (s.factor(f).is_lattice()) lattice_labels.push_back(m.labels[static_cast<size_t>(f)]);
    m.gens = canonical_gens(lattice_labels, spec.kind == ModelKind::su2);
    for (int f = 0; f < s.num_factors(); ++f) {
        if (!s.factor(f).is_lattice()) continue;
        m.assignment.push_back(GeneratorImage::on(f, local_orientation_operator(orientation_frame(s, f))));
        m.assignment.push_back(GeneratorImage::on(f, local_momentum(s.factor(f))));
    }
    auto G = [&](const std::string& n) { return AlgebraElement::generator(m.gens, n); };
    const QQi beta(spec.beta);

    switch (spec.kind) {
        case ModelKind::newtonian:
            m.C = build_constraint(s, {momentum_term(s, 0), spectrum_term(s, 1)});
            m.C_alg = G("p_C") + QQi(Rational(1, 2)) * (G("p_S") * G("p_S"));
            break;
        case ModelKind::nparticle: {
            std::vector<ConstraintTerm> terms;
            m.C_alg = AlgebraElement(m.gens);
            for (int i = 0; i < spec.particles; ++i) {
                terms.push_back(momentum_term(s, i));
                m.C_alg += G("p_" + m.labels[static_cast<size_t>(i)]);
            }
            m.C = build_constraint(s, terms);
            break;
        }
        case ModelKind::su2: {
            const auto J = spin_matrices(spec.j, hbar);
            m.assignment.push_back(GeneratorImage::on(2, J.x));
            m.assignment.push_back(GeneratorImage::on(2, J.y));
            m.assignment.push_back(GeneratorImage::on(2, J.z));
            m.C = build_constraint(s, {momentum_term(s, 0), momentum_term(s, 1), spectrum_term(s, 2)});
            m.C_alg = G("p_A") + G("p_B") - beta * G("Jz");
            break;
        }
        case ModelKind::degenerate: {
            m.C = build_constraint(s, {squared_momentum_term(s, 0), spectrum_term(s, 1, -1.0)});
            m.gs_terms = {spectrum_term(s, 1)};
            const QQi mass(spec.mass);
            m.C_alg = G("p_R") * G("p_R") - AlgebraElement::scalar(m.gens, mass * mass);
            break;
        }
    }

    for (int f : frame_factors) m.frames.push_back(orientation_frame(s, f));
    const int D = spec.frame_check_degree;
    if (spec.kind == ModelKind::degenerate) {
        // p_R² − m² is not conjugate to q_R; each momentum sector has the ideal factor p_R ∓ m.
        const AlgebraElement mass = AlgebraElement::scalar(m.gens, QQi(spec.mass));
        m.frame_checks.push_back(verify_reference_frame(G("q_R"), G("p_R") - mass, D));
        m.frame_checks.push_back(verify_reference_frame(G("q_R"), G("p_R") + mass, D));
    } else {
        for (int f : frame_factors)
            m.frame_checks.push_back(verify_reference_frame(G("q_" + m.labels[static_cast<size_t>(f)]), m.C_alg, D));
    }
    return m;
}

GeneratorAssignment reduced_assignment(const Model& m, int dropped) {
    const LatticeSpace rest = remove_factor(m.space, dropped);
    GeneratorAssignment out;
    for (const auto& im : m.assignment) {
        if (im.factor == dropped) {
            const int n = rest.factor(0).N;
            out.push_back(GeneratorImage::on(0, Mat::Zero(n, n)));
        } else {
            out.push_back(GeneratorImage::on(rest_factor(im.factor, dropped), im.local));
        }
    }
    return out;
}

bool Report::passed(double tol) const { return worst(tol) <= 1.0; }

double Report::worst(double tol) const {
    double w = 0.0;
    for (const auto& r : rows) {
        if (!r.gated) continue;
        const double t = r.tol.value_or(tol);
        const double ratio = t > 0 ? r.residual / t : (r.residual > 0 ? INFINITY : 0.0);
        w = std::max(w, std::isnan(ratio) ? INFINITY : ratio);
    }
    return w;
}

double loglog_slope(const std::vector<double>& hbar, const std::vector<double>& deviation) {
    const auto n = static_cast<double>(hbar.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < hbar.size(); ++i) {
        const double x = std::log(hbar[i]), y = std::log(deviation[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------------------------

namespace {

/// Random hermitian system operator: local terms on every system factor plus one product term.
Mat random_system_operator(const Model& m, int frame, std::mt19937_64& rng) {
    const auto& s = m.space;
    Mat F = Mat::Zero(s.dim(), s.dim());
    std::vector<int> sys;
    for (int f = 0; f < s.num_factors(); ++f)
        if (f != frame) sys.push_back(f);
    std::vector<Mat> prod;
    for (int f : sys) {
        F += s.embed(f, random_hermitian(s.factor(f).N, rng));
        prod.push_back(s.embed(f, random_hermitian(s.factor(f).N, rng)));
    }
    if (prod.size() >= 2) F += prod[0] * prod[1];
    return F;
}

std::vector<int> system_support(const Model& m, int frame) {
    std::vector<int> out;
    for (int f = 0; f < m.space.num_factors(); ++f)
        if (f != frame) out.push_back(f);
    return out;
}

/// Effective B → A frame pair with G_S read off the constraint; ρ's are parameters.
EffFramePair effective_pair(const Model& m, int A, int B) {
    const auto& g = m.gens;
    EffFramePair fp;
    const std::string a = m.labels[static_cast<size_t>(A)], b = m.labels[static_cast<size_t>(B)];
    fp.qA = g->index("q_" + a);
    fp.pA = g->index("p_" + a);
    fp.qB = g->index("q_" + b);
    fp.pB = g->index("p_" + b);
    fp.G_S = OperatorExpr::scalar(g, QQi(0));
    if (m.spec.kind == ModelKind::nparticle) {
        for (int i = 0; i < m.spec.particles; ++i)
            if (i != A && i != B) fp.G_S = fp.G_S + OperatorExpr::generator(g, "p_" + m.labels[static_cast<size_t>(i)]);
    } else if (m.spec.kind == ModelKind::su2) {
        fp.G_S = -(MomentFunction::param(g, "beta") * OperatorExpr::generator(g, "Jz"));
    } else {
        raise(ErrorKind::UnsupportedForm, "effective frame pairs need nparticle or su2");
    }
    fp.rhoA = MomentFunction::param(g, "rho_A");
    fp.rhoB = MomentFunction::param(g, "rho_B");
    return fp;
}

AlgebraElement algebraic_gs(const Model& m, int A, int B) {
    AlgebraElement gs(m.gens);
    if (m.spec.kind == ModelKind::nparticle) {
        for (int i = 0; i < m.spec.particles; ++i)
            if (i != A && i != B) gs += m.g("p_" + m.labels[static_cast<size_t>(i)]);
    } else if (m.spec.kind == ModelKind::su2) {
        gs = -(QQi(m.spec.beta) * m.g("Jz"));
    }
    return gs;
}

std::vector<int> generators_without(const Model& m, int factor) {
    std::vector<int> out;
    const std::string q = "q_" + m.labels[static_cast<size_t>(factor)], p = "p_" + m.labels[static_cast<size_t>(factor)];
    for (int i = 0; i < m.gens->size(); ++i)
        if (m.gens->name(i) != q && m.gens->name(i) != p) out.push_back(i);
    return out;
}

}  // namespace

Report run_equivalence_suite(const Model& m, const EquivalenceOptions& opt) {
    if (m.spec.kind == ModelKind::degenerate)
        raise(ErrorKind::UnsupportedForm, "the equivalence suite needs an ideal frame; use the degenerate suite");
    Report rep{"equivalence", kind_name(m.spec.kind), {}};
    std::mt19937_64 rng(opt.seed);
    const auto& s = m.space;
    const OrientationFrame& fr = m.frames[0];
    const double rho = fr.rho(1);
    const auto support = system_support(m, fr.factor);
    const bool closed = m.C.linear_in(s, fr.factor);

    std::vector<Vec> states;
    for (int i = 0; i < opt.states; ++i) states.push_back(m.project(random_vec(s.dim(), rng)).normalized());

    for (int k = 0; k < opt.observables; ++k) {
        const KinOperator F = make_operator(random_system_operator(m, fr.factor, rng), support);
        const Mat Okin = relational_observable(s, m.C, fr, rho, F, RelForm::kinematical).matrix;
        const Mat Ophys = relational_observable(s, m.C, fr, rho, F, RelForm::physical).matrix;
        Mat Oclosed;
        if (closed) Oclosed = relational_observable(s, m.C, fr, rho, F, RelForm::closed).matrix;
        const Mat Frest = restrict_operator(s, fr.factor, F);
        for (size_t i = 0; i < states.size(); ++i) {
            const Vec& psi = states[i];
            const double n = psi.squaredNorm();
            std::vector<std::pair<std::string, cplx>> v;
            v.emplace_back("physical_ip_kinematical", psi.dot(Okin * psi) / n);
            v.emplace_back("physical_ip_physical", psi.dot(Ophys * psi) / n);
            if (closed) v.emplace_back("physical_ip_closed", psi.dot(Oclosed * psi) / n);
            const Vec red = reduce(s, m.C, fr, rho, psi);
            v.emplace_back("page_wootters", red.dot(Frest * red) / red.squaredNorm());
            const auto w = AlgebraicState::frame_state(m.gens, s, m.assignment, m.C, fr, rho, psi, 2);
            v.emplace_back("algebraic_gauge", w.evaluate_operator(F.matrix));
            const auto kin = AlgebraicState::from_hilbert(m.gens, s, m.assignment, psi, psi, 2);
            v.emplace_back("theta_gauge", gauge_transform_state(kin, m.C, fr, rho).evaluate_operator(F.matrix));
            add_group(rep, "<O(f" + std::to_string(k) + ")>[psi" + std::to_string(i) + "]", v);
        }
    }

    // Effective value at M = 4 of a frame change B → A on the localized initial state (reported only).
    if (m.frames.size() >= 2) {
        const int A = m.frames[0].factor, B = m.frames[1].factor;
        const double rA = 0.0, rB = 0.0;
        const Vec psi = m.initial_state();
        const auto fp = effective_pair(m, A, B);
        const auto wB = AlgebraicState::frame_state(m.gens, s, m.assignment, m.C, m.frames[1], rB, psi, 4);
        MomentState sB = effective::moments_from_hilbert(wB, 4, generators_without(m, B));
        sB.params = {{"rho_A", rA}, {"rho_B", rB}, {"beta", to_double(m.spec.beta)}};
        const Vec red = reduce(s, m.C, m.frames[0], rA, psi);
        const LatticeSpace rest = remove_factor(s, A);
        const auto ra = reduced_assignment(m, A);
        std::vector<std::string> targets;
        if (m.spec.kind == ModelKind::su2) targets = {"Jz", "Jx"};
        else targets = {"q_" + m.labels[2 % m.labels.size()]};
        for (const auto& t : targets) {
            const int gi = m.gens->index(t);
            const Vec applied = apply_generator(rest, ra[static_cast<size_t>(gi)], red);
            const cplx exact = red.dot(applied) / red.squaredNorm();
            const cplx eff = effective::evaluate(effective::transformed_expectation(fp, OperatorExpr::generator(m.gens, t), 4), sB);
            rep.rows.push_back({"<" + t + ">_A", "page_wootters", exact, 0.0, std::nullopt, false});
            rep.rows.push_back({"<" + t + ">_A", "effective_M4", eff, std::abs(eff - exact), std::nullopt, false});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

Report run_variance_experiment(const Model& base, const VarianceOptions& opt) {
    if (base.spec.kind != ModelKind::nparticle || base.spec.particles < 3)
        raise(ErrorKind::UnsupportedForm, "the variance experiment needs nparticle with at least three particles");
    ModelSpec spec = base.spec;
    if (opt.N > 0) spec.N = opt.N;
    const Model m = spec.N == base.spec.N ? base : build_model(spec);
    Report rep{"variance", kind_name(m.spec.kind), {}};
    const auto& s = m.space;
    const int n = m.spec.particles;
    const int A = 0, B = 1;
    const double rhoA = 0.0, rhoB = 0.0;
    const auto& L = m.labels;
    auto q = [&](int i) { return "q_" + L[static_cast<size_t>(i)]; };
    const OrientationFrame& fA = m.frames[A];
    const OrientationFrame& fB = m.frames[B];
    const LatticeSpace restA = remove_factor(s, A), restB = remove_factor(s, B);
    const FramePair afp{m.generator("q_A"), m.generator("p_A"), m.generator("q_B"), m.generator("p_B"), algebraic_gs(m, A, B), rhoA, rhoB};
    const EffFramePair efp = effective_pair(m, A, B);
    const auto& g = m.gens;

    auto pos_ops = [&](int dropped) {
        std::vector<std::pair<int, Mat>> ops;
        for (int i = 0; i < n; ++i)
            if (i != dropped) ops.emplace_back(rest_factor(i, dropped), local_orientation_operator(m.frames[static_cast<size_t>(i)]));
        for (int i = 0; i < n; ++i)
            if (i != dropped) ops.emplace_back(rest_factor(i, dropped), local_momentum(s.factor(i)));
        return ops;
    };
    // Index of q_i / p_i in pos_ops(dropped).
    auto qi = [&](int i, int dropped) { return rest_factor(i, dropped); };
    auto pi = [&](int i, int dropped) { return n - 1 + rest_factor(i, dropped); };

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uc(-0.4, 0.4), uw(1.0, 1.3), us(-0.3, 0.3), ush(-0.05, 0.05);
    std::vector<double> fit_y;
    std::vector<std::array<double, 3>> fit_x;

    auto eff_moment = [&](int a, int b) {
        Exponents e(static_cast<size_t>(g->size()), 0);
        ++e[static_cast<size_t>(g->index(q(a)))];
        ++e[static_cast<size_t>(g->index(q(b)))];
        return effective::transformed_moment(efp, e, 2);
    };
    auto alg_cov = [&](const AlgebraicState& wB, int a, int b) {
        const AlgebraElement X = m.g(q(a)), Y = m.g(q(b));
        const AlgebraElement sym = QQi(Rational(1, 2)) * (X * Y + Y * X);
        return transform_frame(wB, afp, sym) - transform_frame(wB, afp, X) * transform_frame(wB, afp, Y);
    };

    for (int st = 0; st < opt.states; ++st) {
        StateRecipe r = m.spec.state;
        r.centers.clear();
        r.widths.clear();
        for (int i = 0; i < n; ++i) {
            r.centers.push_back(uc(rng));
            r.widths.push_back(uw(rng));
        }
        r.skew = us(rng);
        r.shear = ush(rng);
        const Vec psi = m.initial_state(r);
        const std::string tag = "[state" + std::to_string(st) + "]";

        const Vec phiA = reduce(s, m.C, fA, rhoA, psi), phiB = reduce(s, m.C, fB, rhoB, psi);
        const auto mA = second_moments(restA, pos_ops(A), phiA);
        const auto mB = second_moments(restB, pos_ops(B), phiB);
        const auto wB = AlgebraicState::frame_state(g, s, m.assignment, m.C, fB, rhoB, psi, 2);
        MomentState sB = effective::moments_from_hilbert(wB, 2, generators_without(m, B));
        sB.params = {{"rho_A", rhoA}, {"rho_B", rhoB}};
        auto covB = [&](int a, int b) { return mB.cov(qi(a, B), qi(b, B)); };

        auto law = [&](const std::string& quantity, cplx exact, cplx rhs, cplx alg, cplx eff) {
            rep.rows.push_back({quantity + tag, "law_rhs", rhs, std::abs(rhs - exact), std::nullopt, true});
            rep.rows.push_back({quantity + tag, "hilbert", exact, std::abs(exact - rhs), std::nullopt, true});
            rep.rows.push_back({quantity + tag, "algebraic", alg, std::abs(alg - rhs), std::nullopt, true});
            rep.rows.push_back({quantity + tag, "effective", eff, std::abs(eff - rhs), std::nullopt, true});
        };

        // Frame readings.
        {
            const cplx exact = mA.mean[static_cast<size_t>(qi(B, A))];
            const cplx rhs = rhoA + rhoB - mB.mean[static_cast<size_t>(qi(A, B))];
            law("<q_B>_A", exact, rhs, transform_frame(wB, afp, m.g("q_B")),
                effective::evaluate(effective::transformed_expectation(efp, OperatorExpr::generator(g, "q_B"), 2), sB));
        }
        {
            const cplx exact = mA.mean[static_cast<size_t>(pi(B, A))];
            cplx rhs = -mB.mean[static_cast<size_t>(pi(A, B))];
            for (int i = 2; i < n; ++i) rhs -= mB.mean[static_cast<size_t>(pi(i, B))];
            law("<p_B>_A", exact, rhs, transform_frame(wB, afp, m.g("p_B")),
                effective::evaluate(effective::transformed_expectation(efp, OperatorExpr::generator(g, "p_B"), 2), sB));
        }
        for (int c = 2; c < n; ++c) {
            const cplx exact = mA.cov(qi(c, A), qi(c, A));
            const cplx rhs = covB(c, c) + covB(A, A) - 2.0 * covB(A, c);
            law("var(" + q(c) + ")_A", exact, rhs, alg_cov(wB, c, c), effective::evaluate(eff_moment(c, c), sB));
            if (c == 2) {
                fit_y.push_back(exact.real());
                fit_x.push_back({covB(c, c).real(), covB(A, A).real(), covB(A, c).real()});
            }
        }
        for (int c = 2; c < n; ++c) {
            const cplx exact = mA.cov(qi(B, A), qi(c, A));
            const cplx rhs = covB(A, A) - covB(A, c);
            law("cov(q_B," + q(c) + ")_A", exact, rhs, alg_cov(wB, B, c), effective::evaluate(eff_moment(B, c), sB));
            // General covariance law with the reference frame D = B; the B-gauge moments come from the B-frame state.
            auto wcov = [&](int a, int b) {
                const AlgebraElement X = m.g(q(a)), Y = m.g(q(b));
                return wB.evaluate(QQi(Rational(1, 2)) * (X * Y + Y * X)) - wB.evaluate(X) * wB.evaluate(Y);
            };
            const cplx general = wcov(B, c) + wcov(A, A) - wcov(A, B) - wcov(A, c);
            rep.rows.push_back({"cov(q_B," + q(c) + ")_A" + tag, "general_law_D=B", general, std::abs(general - exact),
                                std::nullopt, true});
        }
        for (int c = 2; c < n; ++c)
            for (int d = c + 1; d < n; ++d) {
                const cplx exact = mA.cov(qi(c, A), qi(d, A));
                const cplx rhs = covB(c, d) + covB(A, A) - covB(A, c) - covB(A, d);
                law("cov(" + q(c) + "," + q(d) + ")_A", exact, rhs, alg_cov(wB, c, d), effective::evaluate(eff_moment(c, d), sB));
            }
    }

    // Least-squares coefficients of var(q_C)_A against var(q_C)_B, var(q_A)_B, cov(q_A,q_C)_B.
    if (fit_y.size() >= 3) {
        Eigen::MatrixXd X(static_cast<int>(fit_y.size()), 3);
        Eigen::VectorXd y(static_cast<int>(fit_y.size()));
        for (size_t i = 0; i < fit_y.size(); ++i) {
            for (int k = 0; k < 3; ++k) X(static_cast<int>(i), k) = fit_x[i][static_cast<size_t>(k)];
            y(static_cast<int>(i)) = fit_y[i];
        }
        const Eigen::VectorXd c = X.colPivHouseholderQr().solve(y);
        const char* names[3] = {"var(q_C)_B", "var(q_A)_B", "cov(q_A,q_C)_B"};
        const double expect[3] = {1.0, 1.0, -2.0};
        // The fit amplifies the data error by the condition number of X.
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
        const double cond = svd.singularValues()(0) / svd.singularValues()(2);
        for (int k = 0; k < 3; ++k)
            rep.rows.push_back({std::string("coefficient of ") + names[k], "least_squares", c(k), std::abs(c(k) - expect[k]),
                                std::max(1e-10, 1e-12 * cond), true});
    }

    // B-frame description with A and the systems uncorrelated: cov(q_B,q_C)_A ≈ var(q_A)_B.
    {
        std::vector<Vec> locals;
        for (int i = 0; i < n; ++i) {
            if (i == B) continue;
            locals.push_back(lattice_profile(m.frames[static_cast<size_t>(i)], i == A ? 0.1 : -0.1, 1.65, 0.2));
        }
        const Vec phi = restB.product_state(locals);
        const Vec psi = embed(s, m.C, fB, rhoB, phi);
        const Vec phiA = reduce(s, m.C, fA, rhoA, psi), phiB = reduce(s, m.C, fB, rhoB, psi);
        const auto mA = second_moments(restA, pos_ops(A), phiA);
        const auto mB = second_moments(restB, pos_ops(B), phiB);
        const cplx lhs = mA.cov(qi(B, A), qi(2, A));
        const cplx varA = mB.cov(qi(A, B), qi(A, B));
        const cplx corr = mB.cov(qi(A, B), qi(2, B));
        // The product is cut by the momentum lattice when re-embedded, which leaves a small correlation.
        // Width 1.65 balances that cut against orientation wraparound (both below 1e-10 at N = 32).
        rep.rows.push_back({"cov(q_B,q_C)_A[uncorrelated]", "hilbert", lhs, std::abs(lhs - (varA - corr)), std::nullopt, true});
        rep.rows.push_back({"cov(q_B,q_C)_A[uncorrelated]", "var(q_A)_B", varA, std::abs(lhs - varA), 1e-4, true});
        rep.rows.push_back({"cov(q_A,q_C)_B[uncorrelated]", "hilbert", corr, std::abs(corr), 1e-4, true});
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

Report run_su2_suite(const Model& m) {
    if (m.spec.kind != ModelKind::su2) raise(ErrorKind::UnsupportedForm, "the su2 suite needs the su2 model");
    Report rep{"su2", "su2", {}};
    const auto& s = m.space;
    const double beta = to_double(m.spec.beta);
    const auto J = spin_matrices(m.spec.j, s.hbar());
    const Eigen::VectorXd mask = m.project(Vec::Ones(s.dim())).real();
    auto on_pi = [&](const Mat& X) { return max_abs(mask.asDiagonal() * X * mask.asDiagonal()); };

    for (size_t fi = 0; fi < m.frames.size(); ++fi) {
        const OrientationFrame& f = m.frames[fi];
        const std::string R = m.labels[static_cast<size_t>(f.factor)];
        const double rho = f.rho(1);
        const Mat c = s.embed(f.factor, orientation_function(f, [&](double x) { return std::cos(beta * (x - rho)); }));
        const Mat sn = s.embed(f.factor, orientation_function(f, [&](double x) { return std::sin(beta * (x - rho)); }));
        const Mat Jx = s.embed(2, J.x), Jy = s.embed(2, J.y), Jz = s.embed(2, J.z);
        const std::vector<std::pair<std::string, Mat>> closed{{"Jx", c * Jx - sn * Jy}, {"Jy", c * Jy + sn * Jx}, {"Jz", Jz}};
        for (const auto& [name, Oc] : closed) {
            const KinOperator fS = make_operator(name == "Jx" ? Jx : name == "Jy" ? Jy : Jz, {2});
            const std::string qn = "O_" + R + "(" + name + ")";
            rep.rows.push_back({qn, "twirl_vs_closed_form", 0.0,
                                on_pi(relational_observable(s, m.C, f, rho, fS, RelForm::kinematical).matrix - Oc),
                                std::nullopt, true});
            rep.rows.push_back({qn, "physical_vs_closed_form", 0.0,
                                on_pi(relational_observable(s, m.C, f, rho, fS, RelForm::physical).matrix - Oc),
                                std::nullopt, true});
            rep.rows.push_back({qn, "library_closed_vs_closed_form", 0.0,
                                on_pi(relational_observable(s, m.C, f, rho, fS, RelForm::closed).matrix - Oc),
                                std::nullopt, true});
        }
    }
    // J_z commutes with G_S, so its relational observable is frame independent.
    if (m.frames.size() >= 2) {
        const KinOperator fS = make_operator(s.embed(2, J.z), {2});
        const Mat a = relational_observable(s, m.C, m.frames[0], m.frames[0].rho(2), fS, RelForm::kinematical).matrix;
        const Mat b = relational_observable(s, m.C, m.frames[1], m.frames[1].rho(-3), fS, RelForm::kinematical).matrix;
        rep.rows.push_back({"O_A(Jz) - O_B(Jz)", "twirl", 0.0, on_pi(a - b), std::nullopt, true});
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

ScalingResult run_scaling_experiment(const ModelSpec& base, const ScalingOptions& opt) {
    if (base.kind != ModelKind::su2) raise(ErrorKind::UnsupportedForm, "the scaling experiment runs on su2");
    if (opt.ladder.size() < 2) raise(ErrorKind::ConfigError, "the hbar ladder needs at least two values");
    const double w0 = base.state.width > 0 ? base.state.width : default_width(base.N);
    int maxM = 0;
    for (int M : opt.orders) {
        if (M < 1) raise(ErrorKind::ConfigError, "truncation orders must be positive");
        maxM = std::max(maxM, M);
    }

    std::vector<Model> models;
    for (const Rational& h : opt.ladder) {
        if (h <= 0) raise(ErrorKind::ConfigError, "hbar ladder values must be positive");
        const Rational r = h / base.hbar;
        ModelSpec sp = base;
        sp.hbar = h;
        sp.j = base.j / r;
        if (!is_integer(2 * sp.j))
            raise(ErrorKind::ConfigError, "hbar = " + fmt(h) + " needs 2j/(hbar/hbar0) to be an integer (j = " + fmt(base.j) + ")");
        const double sr = std::sqrt(to_double(r));
        sp.N = 2 * static_cast<int>(std::lround(base.N / (2.0 * sr)));
        sp.dp = base.dp * r;
        sp.state.width = w0 * sp.N / base.N * sr;
        models.push_back(build_model(sp));
    }

    // Formulas are built once on the first model's generators; all models share the generator layout.
    const Model& m0 = models.front();
    const auto& g = m0.gens;
    const EffFramePair fp = effective_pair(m0, 0, 1);
    const std::vector<int> aside{g->index("q_B"), g->index("p_B"), g->index("Jx"), g->index("Jy"), g->index("Jz")};
    const std::vector<int> bside{g->index("q_A"), g->index("p_A"), g->index("Jx"), g->index("Jy"), g->index("Jz")};

    ScalingResult res;
    for (int M : opt.orders) {
        std::vector<std::pair<Exponents, MomentFunction>> F;
        for (int a : aside) {
            Exponents e(static_cast<size_t>(g->size()), 0);
            e[static_cast<size_t>(a)] = 1;
            F.emplace_back(e, effective::transformed_expectation(fp, OperatorExpr::generator(g, a), M));
        }
        for (const auto& e : ncalg::monomial_basis(g, 2, aside))
            if (ncalg::degree(e) == 2) F.emplace_back(e, effective::transformed_moment(fp, e, M));

        std::vector<double> hs, devs;
        for (const Model& m : models) {
            const Vec psi = m.initial_state();
            const Vec phiB = reduce(m.space, m.C, m.frames[1], 0.0, psi);
            const Vec phiA = reduce(m.space, m.C, m.frames[0], 0.0, psi);
            MomentState sB = effective::moments_from_hilbert(g, remove_factor(m.space, 1), reduced_assignment(m, 1), phiB, M, bside);
            sB.params = {{"beta", to_double(m.spec.beta)}, {"rho_A", 0.0}, {"rho_B", 0.0}};
            const MomentState sA = effective::moments_from_hilbert(g, remove_factor(m.space, 0), reduced_assignment(m, 0), phiA, 2, aside);
            double dev = 0.0;
            for (const auto& [e, f] : F) {
                cplx exact;
                if (ncalg::degree(e) == 1) {
                    const auto it = std::find(e.begin(), e.end(), 1);
                    exact = sA.expectations.at(static_cast<int>(it - e.begin()));
                } else {
                    exact = sA.moments.at(e);
                }
                dev = std::max(dev, std::abs(effective::evaluate(f, sB) - exact));
            }
            hs.push_back(m.space.hbar());
            devs.push_back(dev);
            res.points.push_back({M, m.space.hbar(), dev});
        }
        res.slopes.emplace_back(M, loglog_slope(hs, devs));
    }
    return res;
}

Report scaling_report(const ScalingResult& r) {
    Report rep{"scaling", "su2", {}};
    for (const auto& p : r.points) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "max deviation M=%d hbar=%.6g", p.M, p.hbar);
        rep.rows.push_back({buf, "effective_vs_hilbert", p.deviation, p.deviation, std::nullopt, false});
    }
    for (const auto& [M, slope] : r.slopes) {
        const double target = (M + 1) / 2.0;
        rep.rows.push_back({"log-log slope M=" + std::to_string(M), "fit", slope, std::abs(slope - target) / target, 0.2, true});
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

Report run_degenerate_suite(const Model& m, std::uint64_t seed) {
    if (m.spec.kind != ModelKind::degenerate) raise(ErrorKind::UnsupportedForm, "the degenerate suite needs the degenerate model");
    Report rep{"degenerate", "degenerate", {}};
    const auto& s = m.space;
    const int R = m.frames[0].factor;
    const auto [Cp, Cm] = factorize_constraint(s, R, m.gs_terms);
    const auto [Pp, Pm] = sector_projectors(s, R);
    const std::vector<int> all{0, 1};
    const Mat Cfull = m.C.op().matrix;
    const Mat Pi = group_average(s, m.C).matrix;

    // Positive momenta solve p_R − m, negative ones p_R + m.
    const std::vector<std::tuple<std::string, const KinOperator*, const KinOperator*, const Constraint*>> sectors{
        {"+", &Pp, &Pm, &Cm}, {"-", &Pm, &Pp, &Cp}};
    for (const auto& [name, P, Q, Cf] : sectors) {
        const Mat K = kernel_basis(s, make_operator(P->matrix * Cfull * P->matrix + Q->matrix, all));
        const Mat Kf = kernel_basis(s, make_operator(P->matrix * Cf->op().matrix * P->matrix + Q->matrix, all));
        rep.rows.push_back({"ker(C) in sector " + name, "rank", static_cast<double>(K.cols()),
                            K.cols() == Kf.cols() && K.cols() > 0 ? 0.0 : 1.0, 0.0, true});
        rep.rows.push_back({"ker(C) vs factor kernel, sector " + name, "principal_angle", max_principal_angle(K, Kf),
                            max_principal_angle(K, Kf), std::nullopt, true});
        rep.rows.push_back({"Pi P" + name + " - Pi(factor)", "max_abs", 0.0,
                            max_abs(Pi * P->matrix - group_average(s, *Cf).matrix), std::nullopt, true});
    }
    rep.rows.push_back({"P+ Pi P-", "max_abs", 0.0, max_abs(Pp.matrix * Pi * Pm.matrix), std::nullopt, true});

    // Symbolic branches against independently solved factor towers and the closed forms.
    {
        const auto g = ncalg::GeneratorSet::create({"q_R", "p_R", "H"}, {{0, 1, QQi(1), {}}});
        const auto [plus, minus] = effective::degenerate_solve(g, 0, 1, 2);
        const auto y = [&](const std::string& n) { return MomentFunction::expect(g, n); };
        const auto d = [&](const std::vector<std::string>& n) { return MomentFunction::moment(g, n); };
        const MomentFunction rho = MomentFunction::param(g, "rho");
        for (const auto* b : {&plus, &minus}) {
            const std::string tag = b->sign > 0 ? "+" : "-";
            const QQi sg(b->sign);
            const auto pR = OperatorExpr::generator(g, "p_R"), H = OperatorExpr::generator(g, "H");
            const auto tower = effective::constraint_tower(pR - OperatorExpr::scalar(g, sg) * H, 2);
            const auto sol = effective::fix_frame_gauge(tower, 0, 1, rho, 2);
            bool same = true;
            for (const auto& [atom, val] : b->values) {
                const auto it = sol.values.find(atom);
                same = same && it != sol.values.end() && it->second == val;
            }
            rep.rows.push_back({"branch " + tag + " vs factor tower", "symbolic", same ? 1.0 : 0.0, same ? 0.0 : 1.0, 0.0, true});
            auto value = [&](const MomentFunction& f) {
                const auto it = b->values.find(*f.atoms().begin());
                return it == b->values.end() ? MomentFunction(g) : it->second;
            };
            const bool p_ok = value(y("p_R")) == sg * y("H");
            const bool var_ok = value(d({"p_R", "p_R"})) == d({"H", "H"});
            const bool cov_ok = value(d({"p_R", "H"})) == sg * d({"H", "H"});
            rep.rows.push_back({"<p_R> = " + tag + "<H>", "symbolic", p_ok ? 1.0 : 0.0, p_ok ? 0.0 : 1.0, 0.0, true});
            rep.rows.push_back({"var(p_R) = var(H) [" + tag + "]", "symbolic", var_ok ? 1.0 : 0.0, var_ok ? 0.0 : 1.0, 0.0, true});
            rep.rows.push_back({"cov(p_R,H) = " + tag + "var(H)", "symbolic", cov_ok ? 1.0 : 0.0, cov_ok ? 0.0 : 1.0, 0.0, true});
            bool full = true;
            for (const auto& r : b->full_tower_residuals) full = full && r.is_zero();
            rep.rows.push_back({"full tower on branch " + tag, "symbolic", full ? 1.0 : 0.0, full ? 0.0 : 1.0, 0.0, true});
        }
    }

    // Sector-wise relational expectations: full constraint against the factor constraint.
    std::mt19937_64 rng(seed);
    const OrientationFrame& fr = m.frames[0];
    const double rho = fr.rho(1);
    for (int k = 0; k < 4; ++k) {
        const KinOperator F = make_operator(s.embed(1, random_hermitian(s.factor(1).N, rng)), {1});
        const Mat Ofull = relational_observable(s, m.C, fr, rho, F, RelForm::kinematical).matrix;
        const Mat Frest = restrict_operator(s, fr.factor, F);
        const Vec phi = random_vec(s.dim(), rng);
        for (const auto& [name, P, Q, Cf] : sectors) {
            (void)Q;
            const Vec psi = (P->matrix * (Pi * phi)).normalized();
            const Mat Ofac = relational_observable(s, *Cf, fr, rho, F, RelForm::kinematical).matrix;
            const Vec red = reduce(s, *Cf, fr, rho, psi);
            add_group(rep, "<O(f" + std::to_string(k) + ")> sector " + name,
                      {{"full_constraint", psi.dot(Ofull * psi)},
                       {"factor_constraint", psi.dot(Ofac * psi)},
                       {"factor_page_wootters", red.dot(Frest * red) / red.squaredNorm()}});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

Report run_projector_battery(const Model& m, std::uint64_t seed) {
    Report rep{"projectors", kind_name(m.spec.kind), {}};
    const auto& s = m.space;
    std::vector<std::pair<std::string, Constraint>> sectors;
    if (m.spec.kind == ModelKind::degenerate) {
        const auto [Cp, Cm] = factorize_constraint(s, m.frames[0].factor, m.gs_terms);
        sectors = {{"sector+", Cm}, {"sector-", Cp}};
    } else {
        sectors = {{"", m.C}};
    }
    auto mask_of = [&](const Constraint& C) { return Eigen::VectorXcd(group_average(s, C).matrix.diagonal()); };

    for (const auto& f : m.frames) {
        const std::string R = m.labels[static_cast<size_t>(f.factor)];
        const double rho = f.rho(1);
        const Mat Th = theta_operator(s, f, rho).matrix;
        // Resolution of the identity by the orientation projectors.
        Mat sum = Mat::Zero(f.N, f.N);
        for (int j = f.j_min(); j < f.j_min() + f.N; ++j) {
            const Vec r = orientation_state(f, j);
            sum += r * r.adjoint();
        }
        rep.rows.push_back({"sum_rho Theta(rho)/N - 1 [" + R + "]", "max_abs", 0.0,
                            max_abs(sum / static_cast<double>(f.N) - Mat::Identity(f.N, f.N)), std::nullopt, true});
        for (const auto& [sec, C] : sectors) {
            const std::string tag = " [" + R + (sec.empty() ? "" : "," + sec) + "]";
            const Vec mask = mask_of(C);
            const Mat Pi = mask.asDiagonal();
            const Eigen::VectorXd pihat = system_projector(s, C, f.factor).matrix.diagonal().real();
            rep.rows.push_back({"Pi Theta Pi - Pi" + tag, "max_abs", 0.0, max_abs(mask.asDiagonal() * Th * mask.asDiagonal() - Pi),
                                std::nullopt, true});
            rep.rows.push_back({"Theta Pi Theta - Theta pihat" + tag, "max_abs", 0.0,
                                max_abs(Th * mask.asDiagonal() * Th - Th * pihat.cast<cplx>().asDiagonal()), std::nullopt, true});
            const Vec pm = pihat.cast<cplx>().cwiseProduct(mask);
            rep.rows.push_back({"pihat Pi - Pi" + tag, "max_abs", 0.0, (pm - mask).cwiseAbs().maxCoeff(), std::nullopt, true});
            // Both operators are diagonal in the product basis.
            rep.rows.push_back({"[Pi, pihat]" + tag, "max_abs", 0.0,
                                max_abs(Pi * pihat.cast<cplx>().asDiagonal() - pihat.cast<cplx>().asDiagonal() * Pi),
                                std::nullopt, true});
        }
        if (m.spec.kind == ModelKind::degenerate) {
            // The full quadratic constraint: ⟨ρ|Π|ρ⟩ counts the two roots, but ΘΠΘ = Θπ̂ still holds.
            const Vec mask = mask_of(m.C);
            const Eigen::VectorXd pihat = system_projector(s, m.C, f.factor).matrix.diagonal().real();
            rep.rows.push_back({"Theta Pi Theta - Theta pihat [" + R + ",full]", "max_abs", 0.0,
                                max_abs(Th * mask.asDiagonal() * Th - Th * pihat.cast<cplx>().asDiagonal()), std::nullopt, true});
        }

        if (&f != &m.frames.front()) continue;
        // Finite-difference check of the gauge flow i d/dλ ω_λ(b) = ω_λ([b, aC])/ℏ, with ω_λ(·) = ω(e^{iλaC/ℏ}·).
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(f.factor));
        const Constraint& C = sectors.front().second;
        const Vec psi = m.project(random_vec(s.dim(), rng));
        const Vec psiC = [&] {
            Vec v = psi;
            const Vec mk = mask_of(C);
            return Vec(mk.cwiseProduct(v));
        }();
        const auto w = AlgebraicState::frame_state(m.gens, s, m.assignment, C, f, rho, psiC, 2);
        Mat a = random_hermitian(s.dim(), rng);
        const Mat aC0 = a * C.diag.cast<cplx>().asDiagonal();
        a /= std::max(aC0.cwiseAbs().colwise().sum().maxCoeff(), 1e-300);
        std::vector<int> every(static_cast<size_t>(s.num_factors()));
        for (int i = 0; i < s.num_factors(); ++i) every[static_cast<size_t>(i)] = i;
        const KinOperator aop = make_operator(a, every);
        int bi = 0;
        while (bi < m.gens->size() && m.assignment[static_cast<size_t>(bi)].factor == f.factor) ++bi;
        if (bi == m.gens->size()) bi = 0;
        const Mat b = dense_assignment(s, m.assignment)[static_cast<size_t>(bi)];
        const Mat aC = a * C.diag.cast<cplx>().asDiagonal();
        const double lambda = 0.3, h = 1e-4;
        const cplx fd = (gauge_flow(w, C, aop, lambda + h).evaluate_operator(b) - gauge_flow(w, C, aop, lambda - h).evaluate_operator(b)) / (2 * h);
        const cplx expect = I / s.hbar() * gauge_flow(w, C, aop, lambda).evaluate_operator(aC * b - b * aC);
        rep.rows.push_back({"gauge flow d/dlambda <" + m.gens->name(bi) + "> [" + R + "]", "finite_difference", fd,
                            std::abs(fd - expect) / std::max(1.0, std::abs(expect)), 1e-6, true});
    }
    return rep;
}

}  // namespace qrf::models
