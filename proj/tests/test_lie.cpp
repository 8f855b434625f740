#include <gtest/gtest.h>

#include "klv/klv.hpp"
#include "support/oracles.hpp"

using namespace klv;

TEST(Bracket, AntisymmetricAndJacobi) {
    oracle::Gen g(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(2, 5);
        const auto a = g.tensor(d, m), b = g.tensor(d, m), c = g.tensor(d, m);
        EXPECT_LT(max_abs_difference(bracket(a, b), -bracket(b, a)), 1e-14);
        const auto jacobi = bracket(a, bracket(b, c)) + bracket(b, bracket(c, a)) + bracket(c, bracket(a, b));
        EXPECT_LT(max_abs_difference(jacobi, GradedTensor(d, m)), 1e-12);
    }
}

TEST(Dynkin, LettersAndBracketsAreLie) {
    const auto e1 = GradedTensor::letter(2, 4, 1), e2 = GradedTensor::letter(2, 4, 2), e0 = GradedTensor::letter(2, 4, 0);
    EXPECT_EQ(dynkin_defect(e1), 0.0);
    EXPECT_EQ(dynkin_defect(e0 * 3.0), 0.0);
    EXPECT_LT(dynkin_defect(bracket(e1, bracket(e1, e2)) + 2.0 * bracket(e0, e2)), 1e-15);
}

TEST(Dynkin, PlainWordIsNotLie) {
    // D(e1 e2)/2 - e1 e2 = -(e1 e2 + e2 e1)/2.
    const auto w = GradedTensor::word(2, 2, Word{1, 2});
    EXPECT_DOUBLE_EQ(dynkin_defect(w), 0.5);
    EXPECT_FALSE(dynkin_is_lie(w));
    try {
        LiePolynomial::certify(w);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("Dynkin defect"), std::string::npos);
    }
    EXPECT_FALSE(LiePolynomial::try_certify(w).has_value());
    EXPECT_THROW(dynkin_defect(GradedTensor::unit(2, 2)), DomainError);
}

TEST(Dynkin, ProjectionIsIdempotentOntoLie) {
    oracle::Gen g(22);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const auto p = lie_projection(g.tensor(d, m));
        EXPECT_LT(dynkin_defect(p), 1e-12);
        EXPECT_LT(max_abs_difference(lie_projection(p), p), 1e-12);
    }
}

TEST(Dynkin, LogOfExpOfLieIsLie) {
    oracle::Gen g(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const auto l = g.lie(d, m);
        const auto a = g.lie(d, m);
        EXPECT_LT(dynkin_defect(log(exp(l.tensor()) * exp(a.tensor()))), 1e-10);
    }
}

TEST(Bch, MatchesLowOrderSeries) {
    // Letters 1, 2 have degree 1, so m = 3 keeps exactly the terms up to third order:
    // a + b + [a,b]/2 + ([a,[a,b]] + [b,[b,a]])/12.
    oracle::Gen g(24);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = GradedTensor::letter(2, 3, 1, g.uniform(-1, 1)) + GradedTensor::letter(2, 3, 2, g.uniform(-1, 1));
        const auto b = GradedTensor::letter(2, 3, 1, g.uniform(-1, 1)) + GradedTensor::letter(2, 3, 2, g.uniform(-1, 1));
        const auto expected =
            a + b + bracket(a, b) / 2.0 + (bracket(a, bracket(a, b)) + bracket(b, bracket(b, a))) / 12.0;
        const auto z = bch(LiePolynomial::certify(a), LiePolynomial::certify(b));
        EXPECT_TRUE(z.certified());
        EXPECT_LT(max_abs_difference(z.tensor(), expected), 1e-14);
    }
}

TEST(Bch, RequiresCertifiedInputs) {
    const LiePolynomial raw(GradedTensor::letter(1, 3, 1));
    EXPECT_THROW(bch(raw, raw), DomainError);
}

TEST(LiePolynomial, DilationAndProjectionKeepCertification) {
    oracle::Gen g(25);
    const auto l = g.lie(2, 4);
    const auto s = l.dilated(0.3);
    EXPECT_TRUE(s.certified());
    EXPECT_LT(dynkin_defect(s.tensor()), 1e-14);
    const auto p = l.projected(2);
    EXPECT_TRUE(p.certified());
    EXPECT_LT(dynkin_defect(p.tensor()), 1e-14);
}
