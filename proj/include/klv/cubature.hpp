#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "detail/parallel.hpp"
#include "errors.hpp"
#include "lie.hpp"
#include "path.hpp"
#include "tensor.hpp"
#include "tensor_json.hpp"

namespace klv {

/// Positive weights on bounded-variation paths (or on Lie polynomials) claiming
/// to reproduce the expected Brownian signature up to graded degree `degree`.
class CubatureFormula {
public:
    using PathSupport = std::vector<PiecewiseLinearPath>;
    using LieSupport = std::vector<LiePolynomial>;

    CubatureFormula(int dimension, int degree, std::vector<double> weights, PathSupport paths)
        : dimension_(dimension), degree_(degree), weights_(std::move(weights)), support_(std::move(paths)) {
        check_common(std::get<PathSupport>(support_).size());
        const auto& paths_ = std::get<PathSupport>(support_);
        horizon_ = paths_.front().horizon();
        for (std::size_t j = 0; j < paths_.size(); ++j) {
            if (paths_[j].dimension() != dimension_)
                throw StructuralError("cubature path " + std::to_string(j) + " has the wrong dimension");
            if (std::abs(paths_[j].horizon() - horizon_) > 1e-12)
                throw StructuralError("cubature paths must share one horizon");
        }
    }

    CubatureFormula(int dimension, int degree, std::vector<double> weights, LieSupport lie, double horizon = 1.0)
        : dimension_(dimension), degree_(degree), horizon_(horizon), weights_(std::move(weights)),
          support_(std::move(lie)) {
        check_common(std::get<LieSupport>(support_).size());
        for (std::size_t j = 0; j < lie_support().size(); ++j) {
            const auto& l = lie_support()[j];
            if (l.dimension() != dimension_)
                throw StructuralError("cubature Lie polynomial " + std::to_string(j) + " has the wrong dimension");
            l.require_certified("cubature Lie support");
        }
    }

    int dimension() const noexcept { return dimension_; }
    int degree() const noexcept { return degree_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    bool has_path_support() const noexcept { return std::holds_alternative<PathSupport>(support_); }
    const PathSupport& path_support() const { return std::get<PathSupport>(support_); }
    const LieSupport& lie_support() const { return std::get<LieSupport>(support_); }

    /// Truncated signature of support point j (exp of the Lie element for Lie support).
    GradedTensor support_signature(std::size_t j, int truncation) const {
        if (has_path_support()) return signature(path_support()[j], truncation);
        return exp(embed(lie_support()[j].tensor(), truncation));
    }

private:
    void check_common(std::size_t support_size) const {
        if (dimension_ < 1) throw StructuralError("cubature dimension must be >= 1");
        if (degree_ < 1) throw StructuralError("cubature degree must be >= 1");
        if (weights_.empty()) throw StructuralError("cubature formula needs at least one support point");
        if (weights_.size() != support_size)
            throw StructuralError("cubature has " + std::to_string(weights_.size()) + " weights but " +
                                  std::to_string(support_size) + " support points");
        for (std::size_t j = 0; j < weights_.size(); ++j)
            if (!(weights_[j] > 0.0) || !std::isfinite(weights_[j]))
                throw StructuralError("cubature weight " + std::to_string(j) + " must be positive");
    }

    int dimension_;
    int degree_;
    double horizon_ = 1.0;
    std::vector<double> weights_;
    std::variant<PathSupport, LieSupport> support_;
};

struct ValidationRow {
    Word word;
    double expected;
    double computed;
    double defect;
};

struct ValidationReport {
    int degree = 0;
    double tolerance = 0.0;
    double max_defect = 0.0;
    Word worst_word;
    bool passed = false;
    std::vector<ValidationRow> rows;  // one per basis word, basis order
};

inline constexpr double kDefaultCubatureTolerance = 1e-10;

/// Compares sum_j w_j pi_m(S(omega_j)) with the expected Brownian signature at the
/// formula's horizon, word by word up to graded degree m. Failure is reported, not thrown.
inline ValidationReport validate(const CubatureFormula& q, int degree, double tol = kDefaultCubatureTolerance,
                                 unsigned threads = 0) {
    if (degree < 1) throw RangeError("validation degree must be >= 1");
    const GradedTensor expected = brownian_expected_signature(q.dimension(), degree, q.horizon());
    std::vector<std::vector<double>> per_point(q.size());
    detail::parallel_for(q.size(), threads, [&](std::size_t j) {
        auto s = q.support_signature(j, degree);
        per_point[j].assign(s.coefficients().begin(), s.coefficients().end());
    });
    std::vector<double> combined(expected.basis().size(), 0.0);
    for (std::size_t j = 0; j < q.size(); ++j)
        for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += q.weights()[j] * per_point[j][i];

    ValidationReport report;
    report.degree = degree;
    report.tolerance = tol;
    for (std::size_t i = 0; i < combined.size(); ++i) {
        const double defect = std::abs(combined[i] - expected.coeff_at(i));
        report.rows.push_back({expected.basis().word(i), expected.coeff_at(i), combined[i], defect});
        if (defect > report.max_defect) {
            report.max_defect = defect;
            report.worst_word = expected.basis().word(i);
        }
    }
    report.passed = report.max_defect <= tol;
    return report;
}

inline ValidationReport validate(const CubatureFormula& q) { return validate(q, q.degree()); }

/// Degree-3 formula in dimension d: straight lines with increments +-sqrt(d) e_i, weights 1/(2d).
inline CubatureFormula degree3(int dimension) {
    if (dimension < 1) throw RangeError("degree3 needs d >= 1");
    const double r = std::sqrt(static_cast<double>(dimension));
    std::vector<PiecewiseLinearPath> paths;
    for (int i = 0; i < dimension; ++i)
        for (double sign : {1.0, -1.0}) {
            std::vector<double> inc(static_cast<std::size_t>(dimension), 0.0);
            inc[static_cast<std::size_t>(i)] = sign * r;
            paths.push_back(PiecewiseLinearPath::straight_line(std::move(inc)));
        }
    std::vector<double> weights(paths.size(), 1.0 / (2.0 * dimension));
    return {dimension, 3, std::move(weights), std::move(paths)};
}

/// Degree-5 formula in dimension 1 with the Gauss-Hermite endpoints -sqrt3, 0, +sqrt3 and
/// weights 1/6, 2/3, 1/6. Straight lines only match the symmetrised moments, so the
/// outer paths are time-symmetric zig-zags (a, sqrt3 - 2a, a) on thirds of [0,1], with a
/// chosen so that the (1,0,1) iterated integral vanishes; the middle path is flat.
inline CubatureFormula degree5_d1() {
    const double root3 = std::sqrt(3.0);
    const double a = 2.0 / root3 - std::sqrt(66.0) / 6.0;
    const double b = root3 - 2.0 * a;
    const std::vector<double> thirds{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    auto zigzag = [&](double sign) {
        auto p = PiecewiseLinearPath::from_increments(thirds, {{sign * a}, {sign * b}, {sign * a}});
        auto knots = p.knots();
        knots.back() = 1.0;
        auto points = p.points();
        points.back() = {sign * root3};
        return PiecewiseLinearPath(std::move(knots), std::move(points));
    };
    std::vector<PiecewiseLinearPath> paths{zigzag(-1.0), PiecewiseLinearPath::straight_line({0.0}), zigzag(1.0)};
    return {1, 5, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, std::move(paths)};
}

/// Brownian rescaling of a formula on [0,1] to [0,s]; weights are unchanged.
inline CubatureFormula rescale(const CubatureFormula& q, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw RangeError("rescale horizon must be > 0");
    if (std::abs(q.horizon() - 1.0) > 1e-12) throw RangeError("rescale expects a formula over [0,1]");
    if (q.has_path_support()) {
        std::vector<PiecewiseLinearPath> paths;
        for (const auto& p : q.path_support()) paths.push_back(brownian_rescale(p, s));
        return {q.dimension(), q.degree(), q.weights(), std::move(paths)};
    }
    std::vector<LiePolynomial> lie;
    const double root = std::sqrt(s);
    for (const auto& l : q.lie_support()) lie.push_back(l.dilated(root));
    return {q.dimension(), q.degree(), q.weights(), std::move(lie), s};
}

/// Replaces each path by pi_m log S(path), giving the Lie-level form of the same formula.
inline CubatureFormula to_lie_support(const CubatureFormula& q, int truncation) {
    if (!q.has_path_support()) return q;
    std::vector<LiePolynomial> lie;
    for (const auto& p : q.path_support()) lie.push_back(log_signature(p, truncation));
    return {q.dimension(), q.degree(), q.weights(), std::move(lie), q.horizon()};
}

inline nlohmann::json cubature_to_json(const CubatureFormula& q) {
    nlohmann::json support;
    if (q.has_path_support()) {
        nlohmann::json paths = nlohmann::json::array();
        for (const auto& p : q.path_support()) paths.push_back(path_to_json(p));
        support["paths"] = paths;
    } else {
        nlohmann::json polys = nlohmann::json::array();
        for (const auto& l : q.lie_support()) polys.push_back(tensor_to_json(l.tensor()));
        support["lie_polys"] = polys;
    }
    nlohmann::json j = {{"dimension", q.dimension()}, {"degree", q.degree()}, {"weights", q.weights()},
                        {"support", support}};
    if (!q.has_path_support()) j["horizon"] = q.horizon();
    return j;
}

inline CubatureFormula cubature_from_json(const nlohmann::json& j, double dynkin_tol = kDefaultDynkinTolerance) {
    int d = 0, m = 0;
    std::vector<double> weights;
    try {
        d = j.at("dimension").get<int>();
        m = j.at("degree").get<int>();
        weights = j.at("weights").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("cubature header: ") + e.what());
    }
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (!(weights[i] > 0.0))
            throw LoadError("weights[" + std::to_string(i) + "]: weight " + std::to_string(weights[i]) +
                            " is not positive");
    if (!j.contains("support")) throw LoadError("support: missing");
    const auto& support = j.at("support");
    try {
        if (support.contains("paths")) {
            std::vector<PiecewiseLinearPath> paths;
            const auto& arr = support.at("paths");
            for (std::size_t i = 0; i < arr.size(); ++i)
                paths.push_back(path_from_json(arr[i], "support.paths[" + std::to_string(i) + "]"));
            return {d, m, std::move(weights), std::move(paths)};
        }
        if (support.contains("lie_polys")) {
            std::vector<LiePolynomial> lie;
            const auto& arr = support.at("lie_polys");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string where = "support.lie_polys[" + std::to_string(i) + "]";
                GradedTensor t = tensor_from_json(arr[i], where);
                if (std::abs(t.constant()) > kConstantTermTolerance)
                    throw LoadError(where + ": Lie polynomial has a nonzero constant term");
                const double defect = dynkin_defect(t);
                if (defect > dynkin_tol)
                    throw LoadError(where + ": not a Lie polynomial, Dynkin defect " + std::to_string(defect));
                lie.push_back(LiePolynomial::certify(std::move(t), dynkin_tol));
            }
            const double horizon = j.value("horizon", 1.0);
            return {d, m, std::move(weights), std::move(lie), horizon};
        }
    } catch (const StructuralError& e) {
        throw LoadError(std::string("cubature: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("support: ") + e.what());
    }
    throw LoadError("support: needs either 'paths' or 'lie_polys'");
}

inline void to_file(const CubatureFormula& q, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw LoadError(filename + ": cannot open for writing");
    out << cubature_to_json(q).dump(2) << '\n';
}

inline CubatureFormula from_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw LoadError(filename + ": cannot open");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(filename + ": " + e.what());
    }
    try {
        return cubature_from_json(j);
    } catch (const LoadError& e) {
        throw LoadError(filename + ": " + e.what());
    }
}

}  // namespace klv
