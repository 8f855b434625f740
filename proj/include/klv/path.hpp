#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "lie.hpp"
#include "tensor.hpp"

namespace klv {

/// Continuous piecewise-linear path in R^d starting at the origin. The time
/// coordinate omega^0(t) = t is implicit and never stored.
class PiecewiseLinearPath {
public:
    /// knots: 0 = t_0 < ... < t_q; points: q+1 vectors of size d with points[0] = 0.
    PiecewiseLinearPath(std::vector<double> knots, std::vector<std::vector<double>> points)
        : knots_(std::move(knots)), points_(std::move(points)) {
        if (knots_.empty()) throw StructuralError("path needs at least one knot");
        if (knots_.size() != points_.size())
            throw StructuralError("path has " + std::to_string(knots_.size()) + " knots but " +
                                  std::to_string(points_.size()) + " points");
        if (knots_.front() != 0.0) throw StructuralError("path knots must start at 0");
        dimension_ = static_cast<int>(points_.front().size());
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (static_cast<int>(points_[i].size()) != dimension_)
                throw StructuralError("path point " + std::to_string(i) + " has the wrong dimension");
            for (double v : points_[i])
                if (!std::isfinite(v)) throw StructuralError("path point " + std::to_string(i) + " is not finite");
        }
        for (double v : points_.front())
            if (v != 0.0) throw StructuralError("path must start at the origin");
        for (std::size_t i = 1; i < knots_.size(); ++i)
            if (!(knots_[i] > knots_[i - 1]) || !std::isfinite(knots_[i]))
                throw StructuralError("path knots must be strictly increasing (knot " + std::to_string(i) + ")");
    }

    /// The path with no segments (horizon 0); the unit for concatenation.
    static PiecewiseLinearPath trivial(int dimension) {
        return PiecewiseLinearPath({0.0}, {std::vector<double>(static_cast<std::size_t>(dimension), 0.0)});
    }

    static PiecewiseLinearPath straight_line(std::vector<double> increment, double horizon = 1.0) {
        std::vector<double> zero(increment.size(), 0.0);
        return PiecewiseLinearPath({0.0, horizon}, {std::move(zero), std::move(increment)});
    }

    /// Builds a path from per-segment durations and spatial increments.
    static PiecewiseLinearPath from_increments(std::span<const double> durations,
                                               const std::vector<std::vector<double>>& increments) {
        if (durations.size() != increments.size() || increments.empty())
            throw StructuralError("need one increment per segment");
        const std::size_t d = increments.front().size();
        std::vector<double> knots{0.0};
        std::vector<std::vector<double>> points{std::vector<double>(d, 0.0)};
        for (std::size_t i = 0; i < durations.size(); ++i) {
            if (increments[i].size() != d) throw StructuralError("increment dimension mismatch");
            knots.push_back(knots.back() + durations[i]);
            std::vector<double> p = points.back();
            for (std::size_t j = 0; j < d; ++j) p[j] += increments[i][j];
            points.push_back(std::move(p));
        }
        return {std::move(knots), std::move(points)};
    }

    int dimension() const noexcept { return dimension_; }
    double horizon() const noexcept { return knots_.back(); }
    std::size_t segment_count() const noexcept { return knots_.size() - 1; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<std::vector<double>>& points() const noexcept { return points_; }
    const std::vector<double>& endpoint() const noexcept { return points_.back(); }

    double segment_duration(std::size_t s) const { return knots_[s + 1] - knots_[s]; }
    std::vector<double> segment_increment(std::size_t s) const {
        std::vector<double> out(static_cast<std::size_t>(dimension_));
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = points_[s + 1][j] - points_[s][j];
        return out;
    }

    /// Spatial total variation (Euclidean length of the polygon).
    double total_variation() const {
        double tv = 0.0;
        for (std::size_t s = 0; s < segment_count(); ++s) {
            double sq = 0.0;
            for (double v : segment_increment(s)) sq += v * v;
            tv += std::sqrt(sq);
        }
        return tv;
    }

    bool operator==(const PiecewiseLinearPath&) const = default;

private:
    int dimension_ = 0;
    std::vector<double> knots_;
    std::vector<std::vector<double>> points_;
};

/// In place S <- S (x) exp(dt*e0 + sum_i dx_i*e_i). Exact at the truncation of S.
/// Uses (S exp(x))[w] = sum_j S[w minus its last j letters] * prod(x of those letters) / j!,
/// visiting words by descending degree so every prefix read is still unmodified.
inline void chen_extend(std::vector<double>& sig, const WordBasis& basis, double dt, std::span<const double> dx) {
    double letter_value[256];
    letter_value[0] = dt;
    for (std::size_t i = 0; i < dx.size(); ++i) letter_value[i + 1] = dx[i];
    static constexpr double inv_fact[] = {1.0,       1.0,        1.0 / 2,     1.0 / 6,      1.0 / 24,
                                          1.0 / 120, 1.0 / 720,  1.0 / 5040,  1.0 / 40320,  1.0 / 362880,
                                          1.0 / 3628800, 1.0 / 39916800, 1.0 / 479001600};
    for (std::size_t w = basis.size(); w-- > 1;) {
        double acc = sig[w];
        double prod = 1.0;
        std::size_t p = w;
        const int len = basis.length(w);
        for (int j = 1; j <= len; ++j) {
            prod *= letter_value[basis.last_letter(p)];
            p = basis.parent(p);
            acc += sig[p] * prod * (j < 13 ? inv_fact[j] : 1.0 / std::tgamma(j + 1.0));
        }
        sig[w] = acc;
    }
}

/// Truncated signature with the time coordinate as letter 0, via Chen's identity.
inline GradedTensor signature(const PiecewiseLinearPath& path, int truncation) {
    if (truncation < 1) throw RangeError("signature truncation must be >= 1");
    auto basis = WordBasis::get(path.dimension(), truncation);
    std::vector<double> sig(basis->size(), 0.0);
    sig[0] = 1.0;
    for (std::size_t s = 0; s < path.segment_count(); ++s) {
        auto inc = path.segment_increment(s);
        chen_extend(sig, *basis, path.segment_duration(s), inc);
    }
    return GradedTensor(basis, std::move(sig));
}

/// log of the truncated signature, certified Lie.
inline LiePolynomial log_signature(const PiecewiseLinearPath& path, int truncation) {
    GradedTensor l = log(signature(path, truncation));
    auto out = LiePolynomial::try_certify(l);
    if (!out)
        throw InternalError("log-signature failed the Dynkin check (defect " + std::to_string(dynkin_defect(l)) +
                            ")");
    return *out;
}

/// Runs `second` after `first`, translated to start at first's endpoint.
inline PiecewiseLinearPath concat(const PiecewiseLinearPath& first, const PiecewiseLinearPath& second) {
    if (first.dimension() != second.dimension()) throw StructuralError("concat of paths with different dimension");
    std::vector<double> knots = first.knots();
    std::vector<std::vector<double>> points = first.points();
    const double t0 = first.horizon();
    const auto& origin = first.endpoint();
    for (std::size_t i = 1; i < second.knots().size(); ++i) {
        knots.push_back(t0 + second.knots()[i]);
        std::vector<double> p = second.points()[i];
        for (std::size_t j = 0; j < p.size(); ++j) p[j] += origin[j];
        points.push_back(std::move(p));
    }
    return {std::move(knots), std::move(points)};
}

/// Brownian scaling of a path on [0,1] to [0,T]: omega_T(t) = sqrt(T) omega(t/T).
inline PiecewiseLinearPath brownian_rescale(const PiecewiseLinearPath& path, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw RangeError("rescale horizon must be > 0");
    if (std::abs(path.horizon() - 1.0) > 1e-12) throw RangeError("brownian_rescale expects a path over [0,1]");
    const double root = std::sqrt(horizon);
    std::vector<double> knots = path.knots();
    for (double& t : knots) t *= horizon;
    knots.back() = horizon;
    std::vector<std::vector<double>> points = path.points();
    for (auto& p : points)
        for (double& v : p) v *= root;
    return {std::move(knots), std::move(points)};
}

/// Expected Stratonovich signature of Brownian motion with time coordinate:
/// exp(T (e0 + 1/2 sum_i e_i e_i)), projected to the truncation.
inline GradedTensor brownian_expected_signature(int dimension, int truncation, double horizon = 1.0) {
    if (truncation < 1) throw RangeError("expected signature truncation must be >= 1");
    std::vector<std::pair<Word, double>> terms;
    if (truncation >= 2) terms.emplace_back(Word{0}, horizon);
    if (truncation >= 2)
        for (int i = 1; i <= dimension; ++i) terms.emplace_back(Word{i, i}, 0.5 * horizon);
    return exp(GradedTensor::from_terms(dimension, truncation, terms));
}

inline nlohmann::json path_to_json(const PiecewiseLinearPath& p) {
    return {{"horizon", p.horizon()}, {"knots", p.knots()}, {"points", p.points()}};
}

inline PiecewiseLinearPath path_from_json(const nlohmann::json& j, const std::string& where = "path") {
    try {
        auto knots = j.at("knots").get<std::vector<double>>();
        auto points = j.at("points").get<std::vector<std::vector<double>>>();
        PiecewiseLinearPath p(std::move(knots), std::move(points));
        if (j.contains("horizon") && std::abs(j.at("horizon").get<double>() - p.horizon()) > 1e-12)
            throw LoadError(where + ": horizon does not match the last knot");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(where + ": " + e.what());
    } catch (const StructuralError& e) {
        throw LoadError(where + ": " + e.what());
    }
}

}  // namespace klv
