#include "qrf/reduction_gauge.hpp"

#include "qrf/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace qrf {

namespace {

constexpr cplx I{0.0, 1.0};

Eigen::VectorXd kernel_mask(const Constraint& C) {
    const double tol = 1e-9 * std::max(C.diag.cwiseAbs().maxCoeff(), 1e-300);
    return (C.diag.cwiseAbs().array() <= tol).cast<double>().matrix();
}

void require_physical(const Constraint& C, const Vec& psi) {
    const double res = C.diag.cast<cplx>().cwiseProduct(psi).norm();
    if (res > 1e-9 * psi.norm())
        raise(ErrorKind::NotPhysical, "vector is not annihilated by the constraint (residual " + std::to_string(res) + ")");
}

Vec reduce_unchecked(const LatticeSpace& s, const OrientationFrame& f, double rho, const Vec& psi) {
    const Vec r = orientation_vector(f, rho);
    const int rest = s.dim() / f.N;
    Vec out = Vec::Zero(rest);
    for (int j = 0; j < rest; ++j)
        for (int k = 0; k < f.N; ++k) out(j) += std::conj(r(k)) * psi(join_index(s, f.factor, k, j));
    return out;
}

}  // namespace

LatticeSpace remove_factor(const LatticeSpace& s, int factor) {
    if (factor < 0 || factor >= s.num_factors()) raise(ErrorKind::IndexOutOfRange, "no factor " + std::to_string(factor));
    std::vector<FactorSpec> rest;
    for (int i = 0; i < s.num_factors(); ++i)
        if (i != factor) rest.push_back(s.factor(i));
    return tensor_space(rest, s.hbar());
}

int rest_index(const LatticeSpace& s, int factor, int i) {
    const int st = s.stride(factor);
    const int n = s.factor(factor).N;
    return (i / (n * st)) * st + i % st;
}

int join_index(const LatticeSpace& s, int factor, int digit, int rest) {
    const int st = s.stride(factor);
    const int n = s.factor(factor).N;
    return (rest / st) * n * st + digit * st + rest % st;
}

int rest_factor(int factor, int dropped) {
    if (factor == dropped) return -1;
    return factor > dropped ? factor - 1 : factor;
}

Mat restrict_operator(const LatticeSpace& s, int factor, const KinOperator& f) {
    for (int x : f.support)
        if (x == factor) raise(ErrorKind::UnsupportedSupport, "operator acts on the dropped factor");
    const int rest = s.dim() / s.factor(factor).N;
    Mat out(rest, rest);
    for (int a = 0; a < rest; ++a)
        for (int b = 0; b < rest; ++b) out(a, b) = f.matrix(join_index(s, factor, 0, a), join_index(s, factor, 0, b));
    const double scale = std::max(f.matrix.cwiseAbs().maxCoeff(), 1.0);
    if ((lift_operator(s, factor, out) - f.matrix).cwiseAbs().maxCoeff() > 1e-10 * scale)
        raise(ErrorKind::UnsupportedSupport, "operator is not the identity on the dropped factor");
    return out;
}

Mat lift_operator(const LatticeSpace& s, int factor, const Mat& f_rest) {
    const int n = s.factor(factor).N;
    Mat out = Mat::Zero(s.dim(), s.dim());
    for (int d = 0; d < n; ++d)
        for (int a = 0; a < f_rest.rows(); ++a)
            for (int b = 0; b < f_rest.cols(); ++b)
                out(join_index(s, factor, d, a), join_index(s, factor, d, b)) = f_rest(a, b);
    return out;
}

ReductionMap reduction_map(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho) {
    const Eigen::VectorXd mask = kernel_mask(C);
    const Vec r = orientation_vector(f, rho);
    const int rest = s.dim() / f.N;
    ReductionMap m{f.factor, rho, Mat::Zero(rest, s.dim())};
    for (int j = 0; j < rest; ++j)
        for (int k = 0; k < f.N; ++k) {
            const int i = join_index(s, f.factor, k, j);
            m.matrix(j, i) = std::conj(r(k)) * mask(i);
        }
    return m;
}

Vec reduce(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho, const Vec& psi) {
    require_physical(C, psi);
    return reduce_unchecked(s, f, rho, psi);
}

Vec embed(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho, const Vec& phi) {
    const Eigen::VectorXd mask = kernel_mask(C);
    const Vec r = orientation_vector(f, rho);
    Vec out = Vec::Zero(s.dim());
    for (int j = 0; j < phi.size(); ++j)
        for (int k = 0; k < f.N; ++k) {
            const int i = join_index(s, f.factor, k, j);
            out(i) = mask(i) * r(k) * phi(j);
        }
    return out;
}

Eigen::VectorXd system_projector_diag(const LatticeSpace& s, const Constraint& C, int frame) {
    const Eigen::VectorXd mask = kernel_mask(C);
    const int n = s.factor(frame).N;
    const int rest = s.dim() / n;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rest);
    for (int j = 0; j < rest; ++j)
        for (int k = 0; k < n; ++k) d(j) += mask(join_index(s, frame, k, j));
    return d;
}

KinOperator system_projector(const LatticeSpace& s, const Constraint& C, int frame) {
    const Eigen::VectorXd d = system_projector_diag(s, C, frame);
    Eigen::VectorXd full(s.dim());
    for (int i = 0; i < s.dim(); ++i) full(i) = d(rest_index(s, frame, i));
    std::vector<int> support;
    for (int x : C.support)
        if (x != frame) support.push_back(x);
    return make_operator(full.cast<cplx>().asDiagonal(), support);
}

QrfTransform qrf_transform(const LatticeSpace& s, const Constraint& C, const OrientationFrame& A, double rhoA,
                           const OrientationFrame& B, double rhoB) {
    if (A.factor == B.factor) raise(ErrorKind::SameFrame, "frame change needs two distinct frames");
    QrfTransform t;
    t.A = A.factor;
    t.B = B.factor;
    t.rhoA = rhoA;
    t.rhoB = rhoB;
    t.full = s;
    t.restA = remove_factor(s, A.factor);
    t.restB = remove_factor(s, B.factor);
    t.V = Mat::Zero(t.restB.dim(), t.restA.dim());
    for (int j = 0; j < t.restA.dim(); ++j) {
        Vec e = Vec::Zero(t.restA.dim());
        e(j) = 1.0;
        t.V.col(j) = reduce_unchecked(s, B, rhoB, embed(s, C, A, rhoA, e));
    }
    return t;
}

KinOperator conjugate_observable(const QrfTransform& T, const KinOperator& f) {
    return conjugate_observable(T, restrict_operator(T.full, T.A, f));
}

KinOperator conjugate_observable(const QrfTransform& T, const Mat& f_rest) {
    std::vector<int> support(static_cast<size_t>(T.restB.num_factors()));
    for (size_t i = 0; i < support.size(); ++i) support[i] = static_cast<int>(i);
    return make_operator(T.V * f_rest * T.V.adjoint(), support);
}

GaugeMap theta_gauge(const LatticeSpace& s, const OrientationFrame& f, double rho) {
    return {theta_operator(s, f, rho).matrix, "theta(" + std::to_string(f.factor) + ")"};
}

GaugeMap dressed_gauge(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi, const Mat& O1, const Mat& O2) {
    const Mat c = C.diag.cast<cplx>().asDiagonal();
    const Mat left = (I * O1 * c / s.hbar()).exp();
    const Mat right = (I * O2 * c / s.hbar()).exp();
    return {left * phi.matrix * right, "dressed " + phi.label};
}

GaugeMap shifted_gauge(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi, double shift) {
    const Vec ph = (-I * shift * C.diag.cast<cplx>() / s.hbar()).array().exp().matrix();
    return {ph.asDiagonal() * phi.matrix * ph.conjugate().asDiagonal(), phi.label};
}

Mat gauge_family_average(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi) {
    const long n = group_order(C);
    const double step = group_step(s, C);
    Mat acc = Mat::Zero(phi.matrix.rows(), phi.matrix.cols());
    for (long k = 0; k < n; ++k) acc += shifted_gauge(s, C, phi, static_cast<double>(k) * step).matrix;
    return acc / static_cast<double>(n);
}

GaugeReport verify_gauge(const GaugeMap& phi, const Mat& Pi, double tol) {
    GaugeReport r;
    r.pi_phi_pi = (Pi * phi.matrix * Pi - Pi).cwiseAbs().maxCoeff();
    r.phi_pi_phi = ((phi.matrix * Pi * phi.matrix - phi.matrix) * Pi).cwiseAbs().maxCoeff();
    r.valid = r.pi_phi_pi <= tol && r.phi_pi_phi <= tol;
    return r;
}

AlgebraicState gauge_transform_state(const AlgebraicState& w, const Constraint& C, const GaugeMap& phiB) {
    if (!w.hilbert_backed()) raise(ErrorKind::UnsupportedForm, "gauge transformation needs a Hilbert-backed state");
    const Vec masked = kernel_mask(C).cast<cplx>().cwiseProduct(w.bra());
    return w.with_bra(phiB.matrix.adjoint() * masked);
}

AlgebraicState gauge_transform_state(const AlgebraicState& w, const Constraint& C, const OrientationFrame& f, double rho) {
    if (!w.hilbert_backed()) raise(ErrorKind::UnsupportedForm, "gauge transformation needs a Hilbert-backed state");
    const Vec masked = kernel_mask(C).cast<cplx>().cwiseProduct(w.bra());
    const Vec r = orientation_vector(f, rho);
    return w.with_bra(apply_local(w.space(), f.factor, r * r.adjoint(), masked));
}

AlgebraicState gauge_flow(const AlgebraicState& w, const Constraint& C, const KinOperator& a, double lambda) {
    if (!w.hilbert_backed()) raise(ErrorKind::UnsupportedForm, "gauge flow needs a Hilbert-backed state");
    const double hbar = w.space().hbar();
    const Mat aC = a.matrix * C.diag.cast<cplx>().asDiagonal();
    const double norm1 = aC.cwiseAbs().colwise().sum().maxCoeff();
    if (std::abs(lambda) * norm1 / hbar > 50.0)
        raise(ErrorKind::IllConditionedFlow, "|lambda|*||aC||/hbar = " + std::to_string(std::abs(lambda) * norm1 / hbar));
    const Mat U = (I * lambda * aC / hbar).exp();
    return w.with_bra(U.adjoint() * w.bra());
}

}  // namespace qrf
