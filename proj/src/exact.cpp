#include "qrf/exact.hpp"

#include "qrf/errors.hpp"

#include <cctype>

namespace qrf {

namespace {

/// Base-10 digits only; strings such as "0125" would otherwise be read as octal.
boost::multiprecision::mpz_int decimal(const std::string& digits, const std::string& literal) {
    if (digits.empty()) raise(ErrorKind::ConfigError, "bad rational literal '" + literal + "'");
    boost::multiprecision::mpz_int v = 0;
    for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c))) raise(ErrorKind::ConfigError, "bad rational literal '" + literal + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

}  // namespace

Rational parse_rational(const std::string& s) {
    std::string t;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) raise(ErrorKind::ConfigError, "empty rational literal");
    bool negative = false;
    if (t[0] == '+' || t[0] == '-') {
        negative = t[0] == '-';
        t = t.substr(1);
    }
    Rational r;
    if (const auto dot = t.find('.'); dot != std::string::npos) {
        const std::string frac = t.substr(dot + 1);
        boost::multiprecision::mpz_int den = 1;
        for (size_t i = 0; i < frac.size(); ++i) den *= 10;
        r = Rational(decimal(t.substr(0, dot) + frac, s), den);
    } else if (const auto slash = t.find('/'); slash != std::string::npos) {
        const auto den = decimal(t.substr(slash + 1), s);
        if (den == 0) raise(ErrorKind::ConfigError, "zero denominator in '" + s + "'");
        r = Rational(decimal(t.substr(0, slash), s), den);
    } else {
        r = Rational(decimal(t, s));
    }
    return negative ? Rational(-r) : r;
}

std::string to_string(const Rational& r) { return r.str(); }

double to_double(const Rational& r) { return r.convert_to<double>(); }

QQi& QQi::operator*=(const QQi& o) {
    Rational r = re_ * o.re_ - im_ * o.im_;
    Rational i = re_ * o.im_ + im_ * o.re_;
    re_ = std::move(r);
    im_ = std::move(i);
    return *this;
}

QQi& QQi::operator/=(const QQi& o) {
    Rational d = o.re_ * o.re_ + o.im_ * o.im_;
    if (d == 0) throw std::domain_error("QQi division by zero");
    Rational r = (re_ * o.re_ + im_ * o.im_) / d;
    Rational i = (im_ * o.re_ - re_ * o.im_) / d;
    re_ = std::move(r);
    im_ = std::move(i);
    return *this;
}

std::string QQi::str() const {
    if (im_ == 0) return re_.str();
    if (re_ == 0) return im_.str() + "i";
    std::string s = "(" + re_.str();
    if (im_ > 0) s += "+";
    return s + im_.str() + "i)";
}

}  // namespace qrf
