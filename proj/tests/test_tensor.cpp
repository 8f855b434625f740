#include <gtest/gtest.h>

#include <cmath>

#include "klv/klv.hpp"
#include "klv/tensor_json.hpp"
#include "support/oracles.hpp"

using namespace klv;

namespace {

double factorial(int k) { return k <= 1 ? 1.0 : k * factorial(k - 1); }

}  // namespace

TEST(Word, GradedDegreeCountsTimeTwice) {
    EXPECT_EQ(Word{}.graded_degree(), 0);
    EXPECT_EQ((Word{1, 2}).graded_degree(), 2);
    EXPECT_EQ((Word{0}).graded_degree(), 2);
    EXPECT_EQ((Word{0, 1, 0}).graded_degree(), 5);
    EXPECT_EQ((Word{1, 2}).to_string(), "(1,2)");
    EXPECT_THROW(Word{300}, RangeError);
}

TEST(Word, ShuffleCountsInterleavings) {
    const WordSum s = shuffle(Word{1}, Word{2});
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.at(Word{1, 2}), 1);
    EXPECT_EQ(s.at(Word{2, 1}), 1);
    // (1,1) sh (1) = 3 (1,1,1)
    EXPECT_EQ(shuffle(Word{1, 1}, Word{1}).at(Word{1, 1, 1}), 3);
    // C(5,2) interleavings in total
    long long total = 0;
    for (const auto& [w, c] : shuffle(Word{1, 2, 3}, Word{4, 5})) total += c;
    EXPECT_EQ(total, 10);
}

TEST(WordBasis, OrderedByDegreeThenLexicographic) {
    const auto b = WordBasis::get(1, 4);
    // deg0: (); deg1: (1); deg2: (0),(1,1); deg3: (0,1),(1,0),(1,1,1); deg4: (0,0),(0,1,1),(1,0,1),(1,1,0),(1,1,1,1)
    ASSERT_EQ(b->size(), 12u);
    EXPECT_EQ(b->word(0), Word{});
    EXPECT_EQ(b->word(1), Word{1});
    EXPECT_EQ(b->word(2), Word{0});
    EXPECT_EQ(b->word(3), (Word{1, 1}));
    EXPECT_EQ(b->word(7), (Word{0, 0}));
    for (std::size_t i = 1; i < b->size(); ++i) {
        EXPECT_LE(b->degree(i - 1), b->degree(i));
        if (b->degree(i - 1) == b->degree(i)) {
            EXPECT_LT(b->word(i - 1), b->word(i));
        }
        EXPECT_EQ(*b->index_of(b->word(i)), i);
    }
    EXPECT_FALSE(b->index_of(Word{0, 0, 0}).has_value());
    EXPECT_EQ(WordBasis::get(1, 4), b);
}

TEST(GradedTensor, FromTermsRejectsWordsBeyondTruncation) {
    EXPECT_THROW(GradedTensor::from_terms(1, 3, {{Word{0, 0}, 1.0}}), RangeError);
    EXPECT_THROW(GradedTensor::from_terms(1, 3, {{Word{2}, 1.0}}), RangeError);
    const auto t = GradedTensor::from_terms(2, 3, {{Word{1, 2}, 2.5}, {Word{0}, -1.0}});
    EXPECT_EQ(t[(Word{1, 2})], 2.5);
    EXPECT_EQ(t[Word{0}], -1.0);
    EXPECT_EQ(t[(Word{2, 1})], 0.0);
}

TEST(GradedTensor, ShapeMismatchIsStructural) {
    GradedTensor a(1, 3), b(2, 3), c(1, 4);
    EXPECT_THROW(a + b, StructuralError);
    EXPECT_THROW(mul(a, c), StructuralError);
}

TEST(GradedTensor, ConcatenationOfLetters) {
    const auto e1 = GradedTensor::letter(2, 3, 1);
    const auto e2 = GradedTensor::letter(2, 3, 2);
    const auto p = e1 * e2;
    EXPECT_EQ(p[(Word{1, 2})], 1.0);
    EXPECT_EQ(p[(Word{2, 1})], 0.0);
    // e0 e0 has graded degree 4 and is truncated at m = 3.
    const auto e0 = GradedTensor::letter(2, 3, 0);
    EXPECT_EQ(max_abs_difference(e0 * e0, GradedTensor(2, 3)), 0.0);
}

TEST(GradedTensor, ProductMatchesBruteForce) {
    oracle::Gen g(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const auto a = g.tensor(d, m, 1.0, g.uniform(-1, 1));
        const auto b = g.tensor(d, m, 1.0, g.uniform(-1, 1));
        EXPECT_LT(max_abs_difference(mul(a, b), oracle::brute_mul(a, b)), 1e-13);
    }
}

TEST(GradedTensor, ProductIsAssociativeWithUnit) {
    oracle::Gen g(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const auto a = g.tensor(d, m, 1.0, 1.0), b = g.tensor(d, m), c = g.tensor(d, m, 1.0, -0.5);
        EXPECT_LT(max_abs_difference((a * b) * c, a * (b * c)), 1e-12);
        EXPECT_EQ(max_abs_difference(GradedTensor::unit(d, m) * a, a), 0.0);
        EXPECT_EQ(max_abs_difference(a * GradedTensor::unit(d, m), a), 0.0);
    }
}

TEST(GradedTensor, ExpOfLetterIsFactorialSeries) {
    const int m = 6;
    const auto e = exp(GradedTensor::letter(1, m, 1));
    Word w;
    for (int k = 0; k <= m; ++k) {
        EXPECT_NEAR(e[w], 1.0 / factorial(k), 1e-15) << w.to_string();
        w.push_back(1);
    }
    // exp(e0) only reaches (0,0,0) at m = 6.
    const auto t = exp(GradedTensor::letter(1, m, 0, 2.0));
    EXPECT_NEAR(t[(Word{0, 0, 0})], 8.0 / 6.0, 1e-15);
}

TEST(GradedTensor, ExpLogInvert) {
    oracle::Gen g(13);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const auto a = g.tensor(d, m);
        EXPECT_LT(max_abs_difference(log(exp(a)), a), 1e-11);
        const auto h = g.tensor(d, m, 1.0, 1.0);
        EXPECT_LT(max_abs_difference(exp(log(h)), h), 1e-11);
    }
}

TEST(GradedTensor, ExpLogDomainErrors) {
    EXPECT_THROW(exp(GradedTensor::unit(1, 3)), DomainError);
    EXPECT_THROW(log(GradedTensor(1, 3)), DomainError);
    EXPECT_THROW(log(GradedTensor::unit(1, 3) * 2.0), DomainError);
}

TEST(GradedTensor, ProjectionKeepsLowDegrees) {
    oracle::Gen g(14);
    const auto a = g.tensor(2, 4, 1.0, 0.3);
    const auto p = project(a, 2);
    for (std::size_t i = 0; i < a.basis().size(); ++i)
        EXPECT_EQ(p.coeff_at(i), a.basis().degree(i) <= 2 ? a.coeff_at(i) : 0.0);
    EXPECT_EQ(max_abs_difference(project(a, 4), a), 0.0);
    EXPECT_THROW(project(a, 5), RangeError);
    EXPECT_THROW(project(a, -1), RangeError);
}

TEST(GradedTensor, DilationIsAHomomorphismCommutingWithExpLog) {
    oracle::Gen g(15);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = g.integer(1, 3), m = g.integer(1, 5);
        const double lambda = g.uniform(-2.0, 2.0);
        const auto a = g.tensor(d, m, 1.0, 1.0), b = g.tensor(d, m, 1.0, 0.5);
        EXPECT_LT(max_abs_difference(dilate(a * b, lambda), dilate(a, lambda) * dilate(b, lambda)), 1e-11);
        const auto z = g.tensor(d, m);
        EXPECT_LT(max_abs_difference(dilate(exp(z), lambda), exp(dilate(z, lambda))), 1e-11);
        EXPECT_LT(max_abs_difference(dilate(log(a), lambda), log(dilate(a, lambda))), 1e-10);
    }
    const auto t = GradedTensor::from_terms(1, 4, {{Word{0}, 1.0}, {Word{1, 0}, 1.0}, {Word{1}, 1.0}});
    const auto s = dilate(t, 2.0);
    EXPECT_EQ(s[Word{0}], 4.0);
    EXPECT_EQ(s[(Word{1, 0})], 8.0);
    EXPECT_EQ(s[Word{1}], 2.0);
}

TEST(GradedTensor, EmbedPadsWithZeros) {
    const auto a = GradedTensor::from_terms(1, 3, {{Word{}, 1.0}, {Word{0, 1}, 2.0}});
    const auto b = embed(a, 5);
    EXPECT_EQ(b.truncation(), 5);
    EXPECT_EQ(b[(Word{0, 1})], 2.0);
    EXPECT_EQ(b[(Word{0, 0})], 0.0);
    EXPECT_EQ(max_abs_difference(embed(b, 3), a), 0.0);
}

TEST(GradedTensor, JsonRoundTrip) {
    oracle::Gen g(16);
    const auto a = g.tensor(2, 3, 1.0, 0.25);
    const auto b = tensor_from_json(tensor_to_json(a));
    EXPECT_EQ(max_abs_difference(a, b), 0.0);
    EXPECT_THROW(tensor_from_json(nlohmann::json{{"dimension", 1}}), LoadError);
}
