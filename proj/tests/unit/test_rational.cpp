#include "doctest.h"
#include "oracles.hpp"

#include "evsched/random.hpp"
#include "evsched/rational.hpp"

#include <limits>
#include <stdexcept>

using evsched::Rational;

namespace {

bool same(const Rational& r, const oracle::Frac& f) { return r.num() == f.n && r.den() == f.d; }

}  // namespace

TEST_SUITE("rational") {
    TEST_CASE("normalises sign and common factors") {
        const Rational r(6, -4);
        CHECK(r.num() == -3);
        CHECK(r.den() == 2);
        CHECK(Rational(0, -7) == Rational{0});
        CHECK(Rational(0, -7).den() == 1);
    }

    TEST_CASE("parse") {
        CHECK(Rational::parse("7") == Rational{7});
        CHECK(Rational::parse("-3/4") == Rational(-3, 4));
        CHECK(Rational::parse("0.125") == Rational(1, 8));
        CHECK(Rational::parse("1e-3") == Rational(1, 1000));
        CHECK(Rational::parse("2.5E2") == Rational{250});
        CHECK(Rational::parse("3/10").to_string() == "3/10");
        CHECK_THROWS_AS((void)Rational::parse(""), std::invalid_argument);
        CHECK_THROWS_AS((void)Rational::parse("1.2.3"), std::invalid_argument);
        CHECK_THROWS_AS((void)Rational::parse("abc"), std::invalid_argument);
        CHECK_THROWS_AS((void)Rational::parse("1/0"), std::domain_error);
    }

    TEST_CASE("zero denominator and division by zero") {
        CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
        CHECK_THROWS_AS(Rational{1} / Rational{0}, std::domain_error);
    }

    TEST_CASE("arithmetic agrees with a 128-bit fraction oracle") {
        evsched::RandomStream rng(42);
        for (int k = 0; k < 20000; ++k) {
            const std::int64_t an = rng.uniform_int(-50000, 50000);
            const std::int64_t ad = rng.uniform_int(1, 50000);
            const std::int64_t bn = rng.uniform_int(-50000, 50000);
            const std::int64_t bd = rng.uniform_int(1, 50000);
            const Rational a(an, ad), b(bn, bd);
            const auto fa = oracle::Frac::make(an, ad);
            const auto fb = oracle::Frac::make(bn, bd);
            CHECK(same(a + b, fa + fb));
            CHECK(same(a - b, fa - fb));
            CHECK(same(a * b, fa * fb));
            if (bn != 0) CHECK(same(a / b, fa / fb));
            CHECK((a < b) == (fa < fb));
        }
    }

    TEST_CASE("overflow throws instead of wrapping") {
        const Rational big{std::numeric_limits<std::int64_t>::max()};
        CHECK_THROWS_AS(big + Rational{1}, std::overflow_error);
        CHECK_THROWS_AS(big * Rational{2}, std::overflow_error);
        CHECK_THROWS_AS(-Rational{std::numeric_limits<std::int64_t>::min()}, std::overflow_error);
        CHECK_THROWS_AS(Rational(1, 4000000000) * Rational(1, 4000000001), std::overflow_error);
        // large intermediates that reduce back into range are fine
        CHECK(Rational(3037000493, 2) * Rational(2, 3037000493) == Rational{1});
    }
}
