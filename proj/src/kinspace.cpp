#include "qrf/kinspace.hpp"

#include "qrf/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace qrf {

namespace {

bool is_integer(double x, double tol = 1e-9) { return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x)); }

// Continued-fraction approximation with bounded denominator.
bool rationalize(double x, long& num, long& den, long max_den = 10000, double tol = 1e-11) {
    long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(r);
        long ai = static_cast<long>(a);
        long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (std::abs(x - static_cast<double>(h1) / static_cast<double>(k1)) <= tol * std::max(1.0, std::abs(x))) {
            num = h1;
            den = k1;
            return true;
        }
        double frac = r - a;
        if (frac < 1e-15) break;
        r = 1.0 / frac;
    }
    return false;
}

}  // namespace

FactorSpec FactorSpec::frame(std::string name, int N, double dp) {
    FactorSpec f;
    f.kind = FactorKind::frame;
    f.N = N;
    f.dp = dp;
    f.name = std::move(name);
    f.generator_spectrum = f.momenta();
    return f;
}

FactorSpec FactorSpec::particle(std::string name, int N, double dp, std::vector<double> spectrum) {
    FactorSpec f;
    f.kind = FactorKind::system;
    f.N = N;
    f.dp = dp;
    f.name = std::move(name);
    f.generator_spectrum = spectrum.empty() ? f.momenta() : std::move(spectrum);
    return f;
}

FactorSpec FactorSpec::system(std::string name, std::vector<double> spectrum) {
    FactorSpec f;
    f.kind = FactorKind::system;
    f.N = static_cast<int>(spectrum.size());
    f.name = std::move(name);
    f.generator_spectrum = std::move(spectrum);
    return f;
}

std::vector<double> FactorSpec::momenta() const {
    std::vector<double> p(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) p[static_cast<size_t>(i)] = (i - N / 2) * dp;
    return p;
}

int LatticeSpace::find(const std::string& name) const {
    for (int i = 0; i < num_factors(); ++i)
        if (factors_[static_cast<size_t>(i)].name == name) return i;
    return -1;
}

Mat LatticeSpace::embed(int factor, const Mat& local) const {
    const int n = factors_[static_cast<size_t>(factor)].N;
    const int right = strides_[static_cast<size_t>(factor)];
    const int left = dim_ / (n * right);
    Mat M = Mat::Zero(dim_, dim_);
    for (int l = 0; l < left; ++l)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const cplx v = local(a, b);
                if (v == cplx(0.0)) continue;
                for (int r = 0; r < right; ++r) M(l * n * right + a * right + r, l * n * right + b * right + r) = v;
            }
    return M;
}

Eigen::VectorXd LatticeSpace::embed_diag(int factor, const std::vector<double>& local) const {
    Eigen::VectorXd d(dim_);
    for (int i = 0; i < dim_; ++i) d(i) = local[static_cast<size_t>(digit(i, factor))];
    return d;
}

Vec LatticeSpace::product_state(const std::vector<Vec>& locals) const {
    Vec v = Vec::Ones(dim_);
    for (int i = 0; i < dim_; ++i)
        for (int f = 0; f < num_factors(); ++f) v(i) *= locals[static_cast<size_t>(f)](digit(i, f));
    return v;
}

double LatticeSpace::orientation_spacing(int factor) const {
    const auto& f = factors_.at(static_cast<size_t>(factor));
    if (!f.is_lattice()) raise(ErrorKind::NotAFrameFactor, "factor '" + f.name + "' has no momentum lattice");
    return 2.0 * M_PI * hbar_ / (f.N * f.dp);
}

KinOperator make_operator(Mat m, std::vector<int> support) {
    KinOperator op;
    op.hermitian = (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
    op.matrix = std::move(m);
    op.support = std::move(support);
    return op;
}

ConstraintTerm momentum_term(const LatticeSpace& s, int factor, double coeff) {
    const auto& f = s.factor(factor);
    if (!f.is_lattice()) raise(ErrorKind::NotAFrameFactor, "factor '" + f.name + "' has no momentum lattice");
    ConstraintTerm t{factor, f.momenta()};
    for (auto& v : t.diag) v *= coeff;
    return t;
}

ConstraintTerm squared_momentum_term(const LatticeSpace& s, int factor, double coeff) {
    ConstraintTerm t = momentum_term(s, factor);
    for (auto& v : t.diag) v = coeff * v * v;
    return t;
}

ConstraintTerm spectrum_term(const LatticeSpace& s, int factor, double coeff) {
    ConstraintTerm t{factor, s.factor(factor).generator_spectrum};
    for (auto& v : t.diag) v *= coeff;
    return t;
}

KinOperator Constraint::op() const { return make_operator(diag.cast<cplx>().asDiagonal(), support); }

Eigen::VectorXd Constraint::rest_generator(const LatticeSpace& s, int frame) const {
    auto it = frame_terms.find(frame);
    if (it == frame_terms.end())
        raise(ErrorKind::UnsupportedForm, "constraint has no separable term on factor " + std::to_string(frame));
    return diag - s.embed_diag(frame, it->second);
}

bool Constraint::linear_in(const LatticeSpace& s, int frame) const {
    auto it = frame_terms.find(frame);
    if (it == frame_terms.end() || !s.factor(frame).is_lattice()) return false;
    const auto p = s.factor(frame).momenta();
    for (size_t k = 0; k < p.size(); ++k)
        if (std::abs(it->second[k] - p[k]) > 1e-12 * std::max(1.0, std::abs(p[k]))) return false;
    return true;
}

long IntegerSpectrum::min() const { return n.empty() ? 0 : *std::min_element(n.begin(), n.end()); }
long IntegerSpectrum::max() const { return n.empty() ? 0 : *std::max_element(n.begin(), n.end()); }

IntegerSpectrum integer_spectrum(const Eigen::VectorXd& values) {
    IntegerSpectrum out;
    out.n.assign(static_cast<size_t>(values.size()), 0);
    double ref = 0.0;
    for (double v : values)
        if (std::abs(v) > 1e-12 && (ref == 0.0 || std::abs(v) < ref)) ref = std::abs(v);
    if (ref == 0.0) return out;
    std::vector<long> nums(static_cast<size_t>(values.size())), dens(static_cast<size_t>(values.size()));
    long L = 1;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        long a = 0, b = 1;
        if (std::abs(values(i)) > 1e-12 && !rationalize(values(i) / ref, a, b))
            raise(ErrorKind::IncommensurableSpectrum, "spectrum value " + std::to_string(values(i)) +
                                                          " has no common unit with " + std::to_string(ref));
        nums[static_cast<size_t>(i)] = a;
        dens[static_cast<size_t>(i)] = b;
        L = std::lcm(L, b);
    }
    long g = 0;
    for (size_t i = 0; i < nums.size(); ++i) {
        nums[i] *= L / dens[i];
        g = std::gcd(g, std::abs(nums[i]));
    }
    for (size_t i = 0; i < nums.size(); ++i) out.n[i] = nums[i] / g;
    out.unit = ref * static_cast<double>(g) / static_cast<double>(L);
    return out;
}

LatticeSpace tensor_space(const std::vector<FactorSpec>& factors, double hbar) {
    if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
    LatticeSpace s;
    s.factors_ = factors;
    s.hbar_ = hbar;
    s.strides_.assign(factors.size(), 1);
    for (int i = static_cast<int>(factors.size()) - 1; i >= 0; --i) {
        const auto& f = factors[static_cast<size_t>(i)];
        if (f.N <= 0 || static_cast<int>(f.generator_spectrum.size()) != f.N)
            throw std::invalid_argument("factor '" + f.name + "' has inconsistent dimension");
        if (f.kind == FactorKind::frame) {
            if (f.N < 4 || f.N % 2 != 0) throw std::invalid_argument("frame '" + f.name + "' needs even N >= 4");
            if (!(f.dp > 0)) throw std::invalid_argument("frame '" + f.name + "' needs dp > 0");
        }
        s.strides_[static_cast<size_t>(i)] = s.dim_;
        s.dim_ *= f.N;
    }
    for (const auto& sys : factors) {
        if (sys.kind != FactorKind::system) continue;
        for (const auto& fr : factors) {
            if (fr.kind != FactorKind::frame) continue;
            for (double v : sys.generator_spectrum)
                if (!is_integer(v / fr.dp))
                    raise(ErrorKind::IncommensurableSpectrum,
                          "eigenvalue " + std::to_string(v) + " of '" + sys.name + "' is off the momentum lattice of '" +
                              fr.name + "' (dp = " + std::to_string(fr.dp) + ")");
        }
    }
    return s;
}

KinOperator momentum_operator(const LatticeSpace& s, int factor) {
    const auto& f = s.factor(factor);
    if (f.kind != FactorKind::frame && !f.is_lattice())
        raise(ErrorKind::NotAFrameFactor, "factor '" + f.name + "' is not a frame");
    Eigen::VectorXd d = s.embed_diag(factor, f.momenta());
    return make_operator(d.cast<cplx>().asDiagonal(), {factor});
}

Constraint constraint_from_diag(const LatticeSpace& s, Eigen::VectorXd diag, std::map<int, std::vector<double>> frame_terms) {
    Constraint c;
    c.diag = std::move(diag);
    c.frame_terms = std::move(frame_terms);
    c.support.resize(static_cast<size_t>(s.num_factors()));
    std::iota(c.support.begin(), c.support.end(), 0);
    const double scale = std::max(1.0, c.diag.cwiseAbs().maxCoeff());
    c.zero_in_spectrum = (c.diag.cwiseAbs().array() < 1e-9 * scale).any();
    return c;
}

Constraint build_constraint(const LatticeSpace& s, const std::vector<ConstraintTerm>& terms) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(s.dim());
    std::map<int, std::vector<double>> per;
    for (const auto& t : terms) {
        if (static_cast<int>(t.diag.size()) != s.factor(t.factor).N)
            throw std::invalid_argument("constraint term has wrong size");
        d += s.embed_diag(t.factor, t.diag);
        auto& acc = per[t.factor];
        if (acc.empty()) acc.assign(t.diag.size(), 0.0);
        for (size_t k = 0; k < t.diag.size(); ++k) acc[k] += t.diag[k];
    }
    return constraint_from_diag(s, std::move(d), std::move(per));
}

KinOperator group_average(const LatticeSpace& s, const Constraint& C) {
    const double scale = C.diag.cwiseAbs().maxCoeff();
    const double tol = 1e-9 * scale;
    Eigen::VectorXd mask(s.dim());
    bool any = false;
    for (int i = 0; i < s.dim(); ++i) {
        const double v = std::abs(C.diag(i));
        mask(i) = (v <= tol) ? 1.0 : 0.0;
        if (v <= tol) any = true;
        if (v <= tol && v > 1e-14 * scale)
            std::cerr << "qrf: kernel tolerance absorbed eigenvalue " << C.diag(i) << " (incommensurate input?)\n";
    }
    if (!any) raise(ErrorKind::EmptyKernel, "constraint has trivial kernel");
    return make_operator(mask.cast<cplx>().asDiagonal(), C.support);
}

Mat kernel_basis(const LatticeSpace& s, const KinOperator& C) {
    (void)s;
    Eigen::SelfAdjointEigenSolver<Mat> es(C.matrix);
    const auto& ev = es.eigenvalues();
    const double tol = 1e-9 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) <= tol) cols.push_back(i);
    if (cols.empty()) raise(ErrorKind::EmptyKernel, "constraint has trivial kernel");
    Mat K(C.matrix.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) K.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(cols[j]);
    return K;
}

KinOperator group_average(const LatticeSpace& s, const KinOperator& C) {
    Mat K = kernel_basis(s, C);
    return make_operator(K * K.adjoint(), C.support);
}

long group_order(const Constraint& C) {
    IntegerSpectrum is = integer_spectrum(C.diag);
    return is.max() - is.min() + 1;
}

double group_step(const LatticeSpace& s, const Constraint& C) {
    IntegerSpectrum is = integer_spectrum(C.diag);
    return 2.0 * M_PI * s.hbar() / (is.unit * static_cast<double>(is.max() - is.min() + 1));
}

cplx physical_inner_product(const KinOperator& Pi, const Vec& psi, const Vec& phi) {
    return psi.dot(Pi.matrix * phi);
}

std::pair<KinOperator, KinOperator> sector_projectors(const LatticeSpace& s, int frame) {
    const auto& f = s.factor(frame);
    if (!f.is_lattice()) raise(ErrorKind::NotAFrameFactor, "factor '" + f.name + "' is not a frame");
    std::vector<double> plus, minus;
    for (double p : f.momenta()) {
        plus.push_back(p >= 0 ? 1.0 : 0.0);
        minus.push_back(p < 0 ? 1.0 : 0.0);
    }
    return {make_operator(s.embed_diag(frame, plus).cast<cplx>().asDiagonal(), {frame}),
            make_operator(s.embed_diag(frame, minus).cast<cplx>().asDiagonal(), {frame})};
}

std::pair<Constraint, Constraint> factorize_constraint(const LatticeSpace& s, int frame,
                                                       const std::vector<ConstraintTerm>& gs_terms) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(s.dim());
    for (const auto& t : gs_terms) {
        if (t.factor == frame) throw std::invalid_argument("G_S must be supported off the frame");
        g += s.embed_diag(t.factor, t.diag);
    }
    if (g.minCoeff() < -1e-12) raise(ErrorKind::NegativeGenerator, "G_S has eigenvalue " + std::to_string(g.minCoeff()));
    Eigen::VectorXd root = g.cwiseMax(0.0).cwiseSqrt();
    const auto p = s.factor(frame).momenta();
    Eigen::VectorXd pr = s.embed_diag(frame, p);
    std::map<int, std::vector<double>> ft{{frame, p}};
    return {constraint_from_diag(s, pr + root, ft), constraint_from_diag(s, pr - root, ft)};
}

double max_principal_angle(const Mat& A, const Mat& B) {
    if (A.cols() != B.cols()) return M_PI / 2;
    if (A.cols() == 0) return 0.0;
    Eigen::HouseholderQR<Mat> qa(A), qb(B);
    Mat Qa = qa.householderQ() * Mat::Identity(A.rows(), A.cols());
    Mat Qb = qb.householderQ() * Mat::Identity(B.rows(), B.cols());
    Mat R = Qa - Qb * (Qb.adjoint() * Qa);
    Eigen::JacobiSVD<Mat> svd(R);
    return std::asin(std::min(1.0, svd.singularValues()(0)));
}

}  // namespace qrf
