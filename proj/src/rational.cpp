#include "evsched/rational.hpp"

#include <cctype>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace evsched {
namespace {

int128 gcd_wide(int128 a, int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const int128 r = a % b;
        a = b;
        b = r;
    }
    return a;
}

constexpr int128 kMax = std::numeric_limits<std::int64_t>::max();
constexpr int128 kMin = std::numeric_limits<std::int64_t>::min();

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    *this = from_wide(num, den);
}

Rational Rational::from_wide(int128 num, int128 den) {
    if (den == 0) throw std::domain_error("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const int128 g = gcd_wide(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (num > kMax || num < kMin || den > kMax) throw std::overflow_error("Rational: 64-bit overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
}

Rational Rational::parse(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    if (text.empty()) throw std::invalid_argument("Rational: empty string");

    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const Rational n = parse(text.substr(0, slash));
        const Rational d = parse(text.substr(slash + 1));
        return n / d;
    }

    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') {
        negative = text[pos] == '-';
        ++pos;
    }
    int128 mantissa = 0;
    int scale = 0;
    bool seen_digit = false;
    bool seen_point = false;
    for (; pos < text.size(); ++pos) {
        const char c = text[pos];
        if (c == '.') {
            if (seen_point) throw std::invalid_argument("Rational: malformed number '" + std::string(text) + "'");
            seen_point = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            seen_digit = true;
            mantissa = mantissa * 10 + (c - '0');
            if (mantissa > kMax) throw std::overflow_error("Rational: too many digits");
            if (seen_point) --scale;
        } else {
            break;
        }
    }
    if (!seen_digit) throw std::invalid_argument("Rational: malformed number '" + std::string(text) + "'");
    if (pos < text.size()) {
        if (text[pos] != 'e' && text[pos] != 'E')
            throw std::invalid_argument("Rational: malformed number '" + std::string(text) + "'");
        ++pos;
        bool exp_negative = false;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
            exp_negative = text[pos] == '-';
            ++pos;
        }
        int exponent = 0;
        bool exp_digit = false;
        for (; pos < text.size(); ++pos) {
            if (!std::isdigit(static_cast<unsigned char>(text[pos])))
                throw std::invalid_argument("Rational: malformed exponent '" + std::string(text) + "'");
            exp_digit = true;
            exponent = exponent * 10 + (text[pos] - '0');
            if (exponent > 40) throw std::overflow_error("Rational: exponent out of range");
        }
        if (!exp_digit) throw std::invalid_argument("Rational: malformed exponent '" + std::string(text) + "'");
        scale += exp_negative ? -exponent : exponent;
    }
    if (negative) mantissa = -mantissa;

    int128 den = 1;
    for (; scale > 0; --scale) {
        mantissa *= 10;
        if (mantissa > kMax || mantissa < kMin) throw std::overflow_error("Rational: value out of range");
    }
    for (; scale < 0; ++scale) {
        den *= 10;
        if (den > kMax * 10) throw std::overflow_error("Rational: too many decimal places");
    }
    return from_wide(mantissa, den);
}

std::string Rational::to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational& Rational::operator+=(const Rational& rhs) {
    if (den_ == 1 && rhs.den_ == 1) {
        std::int64_t out = 0;
        if (__builtin_add_overflow(num_, rhs.num_, &out)) throw std::overflow_error("Rational: 64-bit overflow");
        num_ = out;
        return *this;
    }
    const int128 n = static_cast<int128>(num_) * rhs.den_ + static_cast<int128>(rhs.num_) * den_;
    const int128 d = static_cast<int128>(den_) * rhs.den_;
    return *this = from_wide(n, d);
}

Rational& Rational::operator-=(const Rational& rhs) { return *this += -rhs; }

Rational& Rational::operator*=(const Rational& rhs) {
    const int128 n = static_cast<int128>(num_) * rhs.num_;
    const int128 d = static_cast<int128>(den_) * rhs.den_;
    return *this = from_wide(n, d);
}

Rational& Rational::operator/=(const Rational& rhs) {
    if (rhs.num_ == 0) throw std::domain_error("Rational: division by zero");
    const int128 n = static_cast<int128>(num_) * rhs.den_;
    const int128 d = static_cast<int128>(den_) * rhs.num_;
    return *this = from_wide(n, d);
}

Rational operator-(const Rational& value) {
    if (value.num_ == std::numeric_limits<std::int64_t>::min()) throw std::overflow_error("Rational: negation overflow");
    Rational r = value;
    r.num_ = -r.num_;
    return r;
}

std::strong_ordering operator<=>(const Rational& lhs, const Rational& rhs) {
    const int128 l = static_cast<int128>(lhs.num_) * rhs.den_;
    const int128 r = static_cast<int128>(rhs.num_) * lhs.den_;
    if (l < r) return std::strong_ordering::less;
    if (l > r) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Rational& value) { return os << value.to_string(); }

}  // namespace evsched
