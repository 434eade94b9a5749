#include "qrf/relobs.hpp"

#include "qrf/errors.hpp"

#include <cmath>

namespace qrf {

OrientationFrame orientation_frame(const LatticeSpace& s, int factor) {
    const auto& fs = s.factor(factor);
    if (!fs.is_lattice()) raise(ErrorKind::NotAFrameFactor, "factor '" + fs.name + "' has no orientation grid");
    OrientationFrame f;
    f.factor = factor;
    f.N = fs.N;
    f.dp = fs.dp;
    f.hbar = s.hbar();
    f.drho = s.orientation_spacing(factor);
    return f;
}

Vec orientation_vector(const OrientationFrame& f, double rho) {
    Vec v(f.N);
    for (int i = 0; i < f.N; ++i) {
        const double p = (i - f.N / 2) * f.dp;
        v(i) = std::polar(1.0, -rho * p / f.hbar);
    }
    return v;
}

Vec orientation_state(const OrientationFrame& f, int j) {
    if (j < f.j_min() || j >= f.j_min() + f.N)
        raise(ErrorKind::IndexOutOfRange, "grid index " + std::to_string(j) + " outside [" + std::to_string(f.j_min()) +
                                              ", " + std::to_string(f.j_min() + f.N) + ")");
    // Integer phase index keeps the Fourier matrix exact up to rounding of one polar call.
    Vec v(f.N);
    for (int i = 0; i < f.N; ++i) {
        const long k = i - f.N / 2;
        const long m = ((static_cast<long>(j) * k) % f.N + f.N) % f.N;
        v(i) = std::polar(1.0, -2.0 * M_PI * static_cast<double>(m) / f.N);
    }
    return v;
}

Mat orientation_basis(const OrientationFrame& f) {
    Mat F(f.N, f.N);
    const double norm = 1.0 / std::sqrt(static_cast<double>(f.N));
    for (int c = 0; c < f.N; ++c) F.col(c) = norm * orientation_state(f, f.j_min() + c);
    return F;
}

Mat orientation_function(const OrientationFrame& f, const std::function<double(double)>& g) {
    Mat F = orientation_basis(f);
    Eigen::VectorXcd d(f.N);
    for (int c = 0; c < f.N; ++c) d(c) = g(f.rho(f.j_min() + c));
    return F * d.asDiagonal() * F.adjoint();
}

double wrap_orientation(const OrientationFrame& f, double x) {
    const double lo = f.rho(f.j_min());
    const double P = f.period();
    double y = std::fmod(x - lo, P);
    if (y < 0) y += P;
    // Snap values that land within rounding of the upper edge back to the lower edge.
    if (P - y < 1e-9 * f.drho) y = 0.0;
    return lo + y;
}

Mat local_orientation_operator(const OrientationFrame& f) {
    return orientation_function(f, [](double r) { return r; });
}

KinOperator orientation_operator(const LatticeSpace& s, const OrientationFrame& f) {
    return make_operator(s.embed(f.factor, local_orientation_operator(f)), {f.factor});
}

KinOperator effect_operator(const LatticeSpace& s, const OrientationFrame& f, const std::vector<int>& X) {
    Mat E = Mat::Zero(f.N, f.N);
    for (int j : X) {
        Vec r = orientation_state(f, j);
        E += r * r.adjoint() / static_cast<double>(f.N);
    }
    return make_operator(s.embed(f.factor, E), {f.factor});
}

Vec apply_local(const LatticeSpace& s, int factor, const Mat& local, const Vec& v) {
    const int n = s.factor(factor).N;
    const int right = s.stride(factor);
    const int left = s.dim() / (n * right);
    Vec out = Vec::Zero(v.size());
    for (int l = 0; l < left; ++l) {
        const int base = l * n * right;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const cplx m = local(a, b);
                if (m == cplx(0.0)) continue;
                const int ra = base + a * right, rb = base + b * right;
                for (int r = 0; r < right; ++r) out(ra + r) += m * v(rb + r);
            }
    }
    return out;
}

Mat apply_local(const LatticeSpace& s, int factor, const Mat& local, const Mat& cols) {
    const int n = s.factor(factor).N;
    const int right = s.stride(factor);
    const int left = s.dim() / (n * right);
    Mat out = Mat::Zero(cols.rows(), cols.cols());
    for (int l = 0; l < left; ++l) {
        const int base = l * n * right;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const cplx m = local(a, b);
                if (m == cplx(0.0)) continue;
                out.middleRows(base + a * right, right) += m * cols.middleRows(base + b * right, right);
            }
    }
    return out;
}

double wraparound_weight(const LatticeSpace& s, const OrientationFrame& f, const Vec& psi) {
    Vec t = apply_local(s, f.factor, orientation_basis(f).adjoint(), psi);
    double edge = 0.0;
    for (int i = 0; i < s.dim(); ++i) {
        const int c = s.digit(i, f.factor);
        if (c < 2 || c >= f.N - 2) edge += std::norm(t(i));
    }
    return edge / std::max(psi.squaredNorm(), 1e-300);
}

KinOperator g_twirl(const LatticeSpace& s, const Constraint& C, const KinOperator& A) {
    const long NG = group_order(C);
    const double step = group_step(s, C);
    const int d = s.dim();
    Mat out = Mat::Zero(d, d);
    // e^{-isC/ℏ} is diagonal in the product basis, so each conjugation is an entrywise phase.
    for (long k = 0; k < NG; ++k) {
        const double sk = step * static_cast<double>(k);
        Eigen::VectorXcd ph(d);
        for (int i = 0; i < d; ++i) ph(i) = std::polar(1.0, -sk * C.diag(i) / s.hbar());
        out += ph.asDiagonal() * A.matrix * ph.conjugate().asDiagonal();
    }
    out /= static_cast<double>(NG);
    return make_operator(std::move(out), C.support);
}

KinOperator theta_operator(const LatticeSpace& s, const OrientationFrame& f, double rho) {
    Vec r = orientation_vector(f, rho);
    return make_operator(s.embed(f.factor, r * r.adjoint()), {f.factor});
}

KinOperator relational_observable(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho,
                                  const KinOperator& f_S, RelForm form) {
    for (int g : f_S.support)
        if (g == f.factor) raise(ErrorKind::UnsupportedForm, "f_S must be supported off the frame factor");
    const Vec r = orientation_vector(f, rho);
    switch (form) {
        case RelForm::kinematical:
            return g_twirl(s, C, make_operator(apply_local(s, f.factor, r * r.adjoint(), f_S.matrix), C.support));
        case RelForm::physical: {
            // Π is diagonal in the product basis.
            const Vec mask = group_average(s, C).matrix.diagonal();
            return make_operator(mask.asDiagonal() * apply_local(s, f.factor, r * r.adjoint(), f_S.matrix), C.support);
        }
        case RelForm::closed: {
            if (!C.linear_in(s, f.factor))
                raise(ErrorKind::UnsupportedForm, "closed form needs a constraint linear in the frame momentum");
            Eigen::VectorXd g = C.rest_generator(s, f.factor);
            Mat F = s.embed(f.factor, orientation_basis(f));
            Eigen::VectorXcd ph(s.dim());
            for (int i = 0; i < s.dim(); ++i) {
                const double r = f.rho(f.j_min() + s.digit(i, f.factor));
                ph(i) = std::polar(1.0, -(r - rho) * g(i) / s.hbar());
            }
            Mat U = F * ph.asDiagonal() * F.adjoint();
            return make_operator(U * f_S.matrix * U.adjoint(), C.support);
        }
    }
    return {};
}

}  // namespace qrf
