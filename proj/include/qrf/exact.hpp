#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <complex>
#include <string>

namespace qrf {

using Rational = boost::multiprecision::mpq_rational;
using cplx = std::complex<double>;

/// Parses "3", "-7/2" or "0.25" into an exact rational.
Rational parse_rational(const std::string& s);
std::string to_string(const Rational& r);
double to_double(const Rational& r);

/**
 * @brief Gaussian rational a + b·i.
 */
class QQi {
public:
    QQi() = default;
    QQi(long v) : re_(v) {}  // NOLINT(google-explicit-constructor)
    QQi(Rational re) : re_(std::move(re)) {}  // NOLINT(google-explicit-constructor)
    QQi(Rational re, Rational im) : re_(std::move(re)), im_(std::move(im)) {}

    static QQi i() { return QQi(Rational(0), Rational(1)); }

    const Rational& re() const { return re_; }
    const Rational& im() const { return im_; }

    bool is_zero() const { return re_ == 0 && im_ == 0; }
    bool is_real() const { return im_ == 0; }
    QQi conj() const { return QQi(re_, -im_); }

    QQi& operator+=(const QQi& o) { re_ += o.re_; im_ += o.im_; return *this; }
    QQi& operator-=(const QQi& o) { re_ -= o.re_; im_ -= o.im_; return *this; }
    QQi& operator*=(const QQi& o);
    QQi& operator/=(const QQi& o);

    friend QQi operator+(QQi a, const QQi& b) { return a += b; }
    friend QQi operator-(QQi a, const QQi& b) { return a -= b; }
    friend QQi operator*(QQi a, const QQi& b) { return a *= b; }
    friend QQi operator/(QQi a, const QQi& b) { return a /= b; }
    QQi operator-() const { return QQi(-re_, -im_); }

    friend bool operator==(const QQi& a, const QQi& b) { return a.re_ == b.re_ && a.im_ == b.im_; }
    friend bool operator!=(const QQi& a, const QQi& b) { return !(a == b); }

    cplx to_complex() const { return {to_double(re_), to_double(im_)}; }
    /// Canonical literal: "3/2", "-1/2i", "(1+2i)".
    std::string str() const;

private:
    Rational re_{0};
    Rational im_{0};
};

}  // namespace qrf
