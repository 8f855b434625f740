#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "errors.hpp"
#include "tensor.hpp"

namespace klv {

inline GradedTensor bracket(const GradedTensor& a, const GradedTensor& b) {
    a.require_same_shape(b, "bracket");
    return mul(a, b) - mul(b, a);
}

/// Applies right-nested bracketing word by word: w = a1...ak -> [a1,[a2,[...,ak]]].
inline GradedTensor dynkin_map(const GradedTensor& a) {
    const WordBasis& basis = a.basis();
    std::vector<double> out(basis.size(), 0.0);
    for (std::size_t i = 1; i < basis.size(); ++i) {
        const double x = a.coeff_at(i);
        if (x == 0.0) continue;
        for (const auto& [j, c] : basis.dynkin_row(i)) out[j] += c * x;
    }
    return GradedTensor(a.basis_ptr(), std::move(out));
}

/// Largest |D(P_k)/k - P_k| over all coefficients, where P_k is the word-length-k part.
/// Zero exactly for Lie elements (Dynkin-Specht-Wever).
inline double dynkin_defect(const GradedTensor& a) {
    if (std::abs(a.constant()) > kConstantTermTolerance)
        throw DomainError("Lie membership test requires zero constant term (got " +
                          std::to_string(a.constant()) + ")");
    const GradedTensor d = dynkin_map(a);
    double worst = 0.0;
    for (std::size_t i = 1; i < a.basis().size(); ++i)
        worst = std::max(worst, std::abs(d.coeff_at(i) / a.basis().length(i) - a.coeff_at(i)));
    return worst;
}

inline constexpr double kDefaultDynkinTolerance = 1e-10;

/// Projection onto the free Lie algebra: sum_k D(P_k)/k. Fixes Lie elements.
inline GradedTensor lie_projection(const GradedTensor& a) {
    const GradedTensor d = dynkin_map(a);
    std::vector<double> out(a.basis().size(), 0.0);
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = d.coeff_at(i) / a.basis().length(i);
    return GradedTensor(a.basis_ptr(), std::move(out));
}

inline bool dynkin_is_lie(const GradedTensor& a, double tol = kDefaultDynkinTolerance) {
    return dynkin_defect(a) <= tol;
}

/// Tensor expansion of an element of the free Lie algebra. Only certified
/// polynomials (ones that passed the Dynkin test) may be mapped to vector fields.
class LiePolynomial {
public:
    explicit LiePolynomial(GradedTensor tensor) : tensor_(std::move(tensor)) {}

    /// Runs the Dynkin test and returns a certified copy; throws DomainError with the defect otherwise.
    static LiePolynomial certify(GradedTensor tensor, double tol = kDefaultDynkinTolerance) {
        const double defect = dynkin_defect(tensor);
        if (defect > tol)
            throw DomainError("tensor is not a Lie polynomial: Dynkin defect " + std::to_string(defect) +
                              " exceeds " + std::to_string(tol));
        LiePolynomial out(std::move(tensor));
        out.certified_ = true;
        return out;
    }

    static std::optional<LiePolynomial> try_certify(GradedTensor tensor, double tol = kDefaultDynkinTolerance) {
        if (std::abs(tensor.constant()) > kConstantTermTolerance || dynkin_defect(tensor) > tol)
            return std::nullopt;
        LiePolynomial out(std::move(tensor));
        out.certified_ = true;
        return out;
    }

    const GradedTensor& tensor() const noexcept { return tensor_; }
    bool certified() const noexcept { return certified_; }
    int dimension() const noexcept { return tensor_.dimension(); }
    int truncation() const noexcept { return tensor_.truncation(); }

    /// Dilation is an algebra automorphism, so certification carries over.
    LiePolynomial dilated(double lambda) const {
        LiePolynomial out(dilate(tensor_, lambda));
        out.certified_ = certified_;
        return out;
    }

    /// Graded projection; a Lie element stays Lie since brackets preserve graded degree.
    LiePolynomial projected(int j) const {
        LiePolynomial out(project(tensor_, j));
        out.certified_ = certified_;
        return out;
    }

    void require_certified(const char* op) const {
        if (!certified_) throw DomainError(std::string(op) + " requires a certified Lie polynomial");
    }

private:
    GradedTensor tensor_;
    bool certified_ = false;
};

/// Truncated Baker-Campbell-Hausdorff product log(exp(a) exp(b)).
inline LiePolynomial bch(const LiePolynomial& a, const LiePolynomial& b) {
    a.require_certified("bch");
    b.require_certified("bch");
    GradedTensor z = log(mul(exp(a.tensor()), exp(b.tensor())));
    auto out = LiePolynomial::try_certify(z);
    if (!out)
        throw InternalError("BCH output failed the Dynkin check (defect " + std::to_string(dynkin_defect(z)) +
                            ")");
    return *out;
}

}  // namespace klv
