#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "klv/klv.hpp"
#include "support/oracles.hpp"

using namespace klv;

TEST(Cubature, Degree3ValidForDimensionsOneToFive) {
    for (int d = 1; d <= 5; ++d) {
        const auto r = validate(degree3(d), 3);
        EXPECT_TRUE(r.passed) << "d=" << d << " defect " << r.max_defect << " at " << r.worst_word.to_string();
        EXPECT_LT(r.max_defect, 1e-10);
    }
}

TEST(Cubature, Degree3FailsAtDegreeFive) {
    // E[(B^1)^4]/4! = 1/8, straight lines to +-1 give 1/24.
    const auto r = validate(degree3(1), 5);
    EXPECT_FALSE(r.passed);
    const auto b = WordBasis::get(1, 5);
    EXPECT_NEAR(r.rows[*b->index_of(Word{1, 1, 1, 1})].defect, 1.0 / 8.0 - 1.0 / 24.0, 1e-15);
}

TEST(Cubature, Degree5ValidAtFiveAndDefectiveAtSeven) {
    const auto q = degree5_d1();
    EXPECT_EQ(q.size(), 3u);
    const auto r5 = validate(q, 5);
    EXPECT_TRUE(r5.passed) << r5.worst_word.to_string();
    const auto r7 = validate(q, 7);
    EXPECT_FALSE(r7.passed);
    EXPECT_GT(r7.worst_word.graded_degree(), 5);
}

TEST(Cubature, Degree5MomentsMatchGaussian) {
    // Endpoint moments: E[B^2] = 1, E[B^4] = 3.
    const auto q = degree5_d1();
    double m2 = 0, m4 = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double x = q.path_support()[j].endpoint()[0];
        m2 += q.weights()[j] * x * x;
        m4 += q.weights()[j] * x * x * x * x;
    }
    EXPECT_NEAR(m2, 1.0, 1e-15);
    EXPECT_NEAR(m4, 3.0, 1e-14);
}

TEST(Cubature, RejectsNonPositiveWeightsAndMismatches) {
    const auto line = PiecewiseLinearPath::straight_line({1.0});
    EXPECT_THROW(CubatureFormula(1, 3, {0.5, 0.0}, {line, line}), StructuralError);
    EXPECT_THROW(CubatureFormula(1, 3, {1.0}, {line, line}), StructuralError);
    EXPECT_THROW(CubatureFormula(2, 3, {1.0}, {line}), StructuralError);
    EXPECT_THROW(CubatureFormula(1, 3, {1.0}, std::vector<LiePolynomial>{LiePolynomial(GradedTensor(1, 3))}),
                 DomainError);
}

TEST(Cubature, WeightSumOtherThanOneIsAllowedButFailsValidation) {
    const auto q = degree3(1);
    const CubatureFormula heavy(1, 3, {0.6, 0.6}, q.path_support());
    const auto r = validate(heavy, 3);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.worst_word, Word{});
}

TEST(Cubature, RescaledFormulaMatchesRescaledExpectation) {
    for (double s : {0.01, 0.3, 2.0}) {
        const auto q = rescale(degree5_d1(), s);
        EXPECT_DOUBLE_EQ(q.horizon(), s);
        const auto r = validate(q, 5);
        EXPECT_LT(r.max_defect, 1e-10) << "s=" << s;
    }
    EXPECT_THROW(rescale(rescale(degree3(1), 0.5), 0.5), RangeError);
}

TEST(Cubature, LieSupportValidatesLikePathSupport) {
    const auto q = degree5_d1();
    const auto l = to_lie_support(q, 5);
    EXPECT_FALSE(l.has_path_support());
    const auto a = validate(q, 5), b = validate(l, 5);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].computed, b.rows[i].computed, 1e-13);
    const auto r = rescale(l, 0.25);
    EXPECT_LT(validate(r, 5).max_defect, 1e-10);
}

TEST(Cubature, JsonRoundTrip) {
    for (const auto& q : {degree3(2), degree5_d1(), to_lie_support(degree3(2), 3)}) {
        const auto back = cubature_from_json(cubature_to_json(q));
        EXPECT_EQ(back.size(), q.size());
        EXPECT_EQ(back.has_path_support(), q.has_path_support());
        EXPECT_LT(validate(back, q.degree()).max_defect, 1e-10);
    }
}

TEST(Cubature, LoadErrorsNameTheLocation) {
    auto j = cubature_to_json(degree3(1));
    j["weights"][1] = -0.5;
    try {
        cubature_from_json(j);
        FAIL();
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("weights[1]"), std::string::npos) << e.what();
    }

    auto lie = cubature_to_json(to_lie_support(degree3(1), 3));
    lie["support"]["lie_polys"][1] = tensor_to_json(GradedTensor::word(1, 3, Word{0, 1}));
    try {
        cubature_from_json(lie);
        FAIL();
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("support.lie_polys[1]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("Dynkin defect"), std::string::npos) << msg;
    }
    EXPECT_THROW(cubature_from_json(nlohmann::json{{"dimension", 1}}), LoadError);
    EXPECT_THROW(from_file("/nonexistent/formula.json"), LoadError);
}

TEST(Cubature, ShippedDataFilesValidate) {
    const std::filesystem::path data = std::filesystem::path(KLV_SOURCE_DIR) / "data";
    for (int d = 1; d <= 5; ++d) {
        const auto q = from_file((data / ("degree3_d" + std::to_string(d) + ".json")).string());
        EXPECT_TRUE(validate(q, 3).passed) << d;
    }
    EXPECT_TRUE(validate(from_file((data / "degree5_d1.json").string()), 5).passed);
}

TEST(Cubature, ValidationIndependentOfThreads) {
    const auto q = degree3(4);
    const auto a = validate(q, 3, 1e-10, 1), b = validate(q, 3, 1e-10, 4);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].computed, b.rows[i].computed);
}
