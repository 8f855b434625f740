#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "word.hpp"

namespace klv {

/// Enumeration of every word over {0..d} with graded degree <= m, shared by all
/// tensors of that shape. Words are ordered by graded degree, then lexicographically,
/// so "graded degree <= j" is always a prefix of the basis.
class WordBasis {
public:
    static std::shared_ptr<const WordBasis> get(int dimension, int truncation) {
        if (dimension < 0) throw RangeError("tensor dimension must be >= 0");
        if (truncation < 0) throw RangeError("tensor truncation must be >= 0");
        static std::mutex mutex;
        static std::map<std::pair<int, int>, std::shared_ptr<const WordBasis>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[{dimension, truncation}];
        if (!slot) slot = std::shared_ptr<const WordBasis>(new WordBasis(dimension, truncation));
        return slot;
    }

    int dimension() const noexcept { return dimension_; }
    int truncation() const noexcept { return truncation_; }
    std::size_t size() const noexcept { return words_.size(); }

    const Word& word(std::size_t i) const { return words_[i]; }
    int degree(std::size_t i) const { return degree_[i]; }
    int length(std::size_t i) const { return static_cast<int>(words_[i].length()); }
    /// Index of the word with its last letter removed; meaningless for the empty word.
    std::uint32_t parent(std::size_t i) const { return parent_[i]; }
    Letter last_letter(std::size_t i) const { return words_[i].back(); }

    /// Number of words whose graded degree is at most g.
    std::size_t prefix_count(int g) const {
        if (g < 0) return 0;
        return prefix_count_[static_cast<std::size_t>(std::min(g, truncation_))];
    }

    std::optional<std::size_t> index_of(const Word& w) const {
        if (w.max_letter() > dimension_ || w.graded_degree() > truncation_) return std::nullopt;
        auto it = index_.find(w);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// concat_row(i)[j] is the index of word(i)+word(j) for j < prefix_count(m - degree(i)).
    std::span<const std::uint32_t> concat_row(std::size_t i) const {
        return {concat_.data() + row_offset_[i], row_offset_[i + 1] - row_offset_[i]};
    }

    /// Right-nested bracketing [a1,[a2,[...,ak]]] of each basis word, expanded in the basis.
    const std::vector<std::pair<std::uint32_t, int>>& dynkin_row(std::size_t i) const {
        std::call_once(dynkin_once_, [this] { build_dynkin(); });
        return dynkin_[i];
    }

private:
    WordBasis(int dimension, int truncation) : dimension_(dimension), truncation_(truncation) {
        // Words of degree g extend words of degree g-1 by a spatial letter or g-2 by letter 0.
        std::vector<std::vector<Word>> by_degree(static_cast<std::size_t>(truncation) + 1);
        by_degree[0].push_back(Word{});
        std::size_t total = 1;
        for (int g = 1; g <= truncation; ++g) {
            auto& cur = by_degree[static_cast<std::size_t>(g)];
            for (const Word& w : by_degree[static_cast<std::size_t>(g - 1)])
                for (int l = 1; l <= dimension; ++l) {
                    Word x = w;
                    x.push_back(l);
                    cur.push_back(std::move(x));
                }
            if (g >= 2)
                for (const Word& w : by_degree[static_cast<std::size_t>(g - 2)]) {
                    Word x = w;
                    x.push_back(0);
                    cur.push_back(std::move(x));
                }
            std::sort(cur.begin(), cur.end());
            total += cur.size();
            if (total > kMaxWords)
                throw RangeError("tensor basis for d=" + std::to_string(dimension) + ", m=" +
                                 std::to_string(truncation) + " is too large");
        }
        prefix_count_.resize(by_degree.size());
        for (std::size_t g = 0; g < by_degree.size(); ++g) {
            for (Word& w : by_degree[g]) words_.push_back(std::move(w));
            prefix_count_[g] = words_.size();
        }
        degree_.resize(words_.size());
        parent_.resize(words_.size(), 0);
        for (std::size_t i = 0; i < words_.size(); ++i) {
            degree_[i] = words_[i].graded_degree();
            index_.emplace(words_[i], static_cast<std::uint32_t>(i));
        }
        for (std::size_t i = 1; i < words_.size(); ++i) {
            auto l = words_[i].letters();
            parent_[i] = index_.at(Word(std::vector<Letter>(l.begin(), l.end() - 1)));
        }
        row_offset_.resize(words_.size() + 1, 0);
        for (std::size_t i = 0; i < words_.size(); ++i)
            row_offset_[i + 1] = row_offset_[i] + prefix_count(truncation_ - degree_[i]);
        concat_.resize(row_offset_.back());
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::size_t n = row_offset_[i + 1] - row_offset_[i];
            for (std::size_t j = 0; j < n; ++j)
                concat_[row_offset_[i] + j] = index_.at(words_[i].concat(words_[j]));
        }
    }

    void build_dynkin() const {
        dynkin_.resize(words_.size());
        for (std::size_t i = 1; i < words_.size(); ++i) {
            // r(a) = a;  r(a w) = a r(w) - r(w) a
            std::map<Word, int> acc{{Word{words_[i].back()}, 1}};
            auto letters = words_[i].letters();
            for (std::size_t p = letters.size() - 1; p-- > 0;) {
                Word a{letters[p]};
                std::map<Word, int> next;
                for (const auto& [w, c] : acc) {
                    next[a.concat(w)] += c;
                    next[w.concat(a)] -= c;
                }
                acc = std::move(next);
            }
            for (const auto& [w, c] : acc)
                if (c != 0) dynkin_[i].emplace_back(index_.at(w), c);
        }
    }

    static constexpr std::size_t kMaxWords = 4'000'000;

    int dimension_;
    int truncation_;
    std::vector<Word> words_;
    std::vector<int> degree_;
    std::vector<std::uint32_t> parent_;
    std::vector<std::size_t> prefix_count_;
    std::map<Word, std::uint32_t> index_;
    std::vector<std::size_t> row_offset_;
    std::vector<std::uint32_t> concat_;
    mutable std::once_flag dynkin_once_;
    mutable std::vector<std::vector<std::pair<std::uint32_t, int>>> dynkin_;
};

/// Element of the truncated tensor algebra T^(m)(R + R^d) under the grading in
/// which the time letter 0 has degree two. Immutable value type.
class GradedTensor {
public:
    GradedTensor(int dimension, int truncation)
        : GradedTensor(WordBasis::get(dimension, truncation)) {}

    explicit GradedTensor(std::shared_ptr<const WordBasis> basis)
        : basis_(std::move(basis)), coeffs_(basis_->size(), 0.0) {}

    GradedTensor(std::shared_ptr<const WordBasis> basis, std::vector<double> coeffs)
        : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != basis_->size())
            throw StructuralError("coefficient vector does not match tensor basis size");
    }

    static GradedTensor unit(int dimension, int truncation) {
        GradedTensor t(dimension, truncation);
        t.coeffs_[0] = 1.0;
        return t;
    }

    /// Single basis word with the given coefficient; the word must fit the truncation.
    static GradedTensor word(int dimension, int truncation, const Word& w, double coeff = 1.0) {
        return from_terms(dimension, truncation, {{w, coeff}});
    }

    /// The generator epsilon_letter.
    static GradedTensor letter(int dimension, int truncation, int l, double coeff = 1.0) {
        return word(dimension, truncation, Word{l}, coeff);
    }

    static GradedTensor from_terms(int dimension, int truncation,
                                   const std::vector<std::pair<Word, double>>& terms) {
        GradedTensor t(dimension, truncation);
        for (const auto& [w, c] : terms) {
            if (w.max_letter() > dimension)
                throw RangeError("word " + w.to_string() + " uses a letter above dimension " +
                                 std::to_string(dimension));
            auto idx = t.basis_->index_of(w);
            if (!idx)
                throw RangeError("word " + w.to_string() + " exceeds graded truncation " +
                                 std::to_string(truncation));
            t.coeffs_[*idx] += c;
        }
        return t;
    }

    int dimension() const noexcept { return basis_->dimension(); }
    int truncation() const noexcept { return basis_->truncation(); }
    const WordBasis& basis() const noexcept { return *basis_; }
    const std::shared_ptr<const WordBasis>& basis_ptr() const noexcept { return basis_; }
    std::span<const double> coefficients() const noexcept { return coeffs_; }

    /// Coefficient of w; 0 for words not representable at this truncation.
    double operator[](const Word& w) const {
        auto idx = basis_->index_of(w);
        return idx ? coeffs_[*idx] : 0.0;
    }
    double coeff_at(std::size_t i) const { return coeffs_[i]; }
    double constant() const { return coeffs_[0]; }

    bool same_shape(const GradedTensor& o) const noexcept { return basis_ == o.basis_; }

    GradedTensor& operator+=(const GradedTensor& o) {
        require_same_shape(o, "+");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    GradedTensor& operator-=(const GradedTensor& o) {
        require_same_shape(o, "-");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    GradedTensor& operator*=(double s) {
        for (double& c : coeffs_) c *= s;
        return *this;
    }

    friend GradedTensor operator+(GradedTensor a, const GradedTensor& b) { return a += b; }
    friend GradedTensor operator-(GradedTensor a, const GradedTensor& b) { return a -= b; }
    friend GradedTensor operator-(GradedTensor a) { return a *= -1.0; }
    friend GradedTensor operator*(GradedTensor a, double s) { return a *= s; }
    friend GradedTensor operator*(double s, GradedTensor a) { return a *= s; }
    friend GradedTensor operator/(GradedTensor a, double s) { return a *= 1.0 / s; }

    void require_same_shape(const GradedTensor& o, const char* op) const {
        if (!same_shape(o))
            throw StructuralError(std::string("tensor operation '") + op + "' on mismatched shapes (d=" +
                                  std::to_string(dimension()) + ",m=" + std::to_string(truncation()) +
                                  ") vs (d=" + std::to_string(o.dimension()) + ",m=" +
                                  std::to_string(o.truncation()) + ")");
    }

    /// Nonzero terms in basis order.
    std::vector<std::pair<Word, double>> terms() const {
        std::vector<std::pair<Word, double>> out;
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            if (coeffs_[i] != 0.0) out.emplace_back(basis_->word(i), coeffs_[i]);
        return out;
    }

private:
    std::shared_ptr<const WordBasis> basis_;
    std::vector<double> coeffs_;
};

/// Concatenation product; words beyond the graded truncation are dropped.
inline GradedTensor mul(const GradedTensor& a, const GradedTensor& b) {
    a.require_same_shape(b, "mul");
    const WordBasis& basis = a.basis();
    std::vector<double> out(basis.size(), 0.0);
    auto ac = a.coefficients();
    auto bc = b.coefficients();
    for (std::size_t i = 0; i < ac.size(); ++i) {
        const double x = ac[i];
        if (x == 0.0) continue;
        auto row = basis.concat_row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out[row[j]] += x * bc[j];
    }
    return GradedTensor(a.basis_ptr(), std::move(out));
}

inline GradedTensor operator*(const GradedTensor& a, const GradedTensor& b) { return mul(a, b); }

/// Graded projection: keeps the words of graded degree <= j (shape unchanged).
inline GradedTensor project(const GradedTensor& a, int j) {
    if (j < 0 || j > a.truncation())
        throw RangeError("projection degree " + std::to_string(j) + " outside [0," +
                         std::to_string(a.truncation()) + "]");
    std::vector<double> c(a.coefficients().begin(), a.coefficients().end());
    std::fill(c.begin() + static_cast<std::ptrdiff_t>(a.basis().prefix_count(j)), c.end(), 0.0);
    return GradedTensor(a.basis_ptr(), std::move(c));
}

/// Tensor-level component: words of length exactly k.
inline GradedTensor level(const GradedTensor& a, int k) {
    std::vector<double> c(a.basis().size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
        if (a.basis().length(i) == k) c[i] = a.coeff_at(i);
    return GradedTensor(a.basis_ptr(), std::move(c));
}

/// Homogeneous scaling: the coefficient of w is multiplied by lambda^graded_degree(w).
inline GradedTensor dilate(const GradedTensor& a, double lambda) {
    const WordBasis& basis = a.basis();
    std::vector<double> pow(static_cast<std::size_t>(a.truncation()) + 1, 1.0);
    for (std::size_t g = 1; g < pow.size(); ++g) pow[g] = pow[g - 1] * lambda;
    std::vector<double> c(basis.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a.coeff_at(i) * pow[static_cast<std::size_t>(basis.degree(i))];
    return GradedTensor(a.basis_ptr(), std::move(c));
}

/// Re-expresses a in the basis of another truncation; words that no longer fit are dropped.
inline GradedTensor embed(const GradedTensor& a, int truncation) {
    GradedTensor out(a.dimension(), truncation);
    std::vector<double> c(out.basis().size(), 0.0);
    const std::size_t n = std::min(c.size(), a.basis().size());
    // Both bases list words in the same (degree, lexicographic) order, so the
    // smaller one is a prefix of the larger.
    for (std::size_t i = 0; i < n; ++i) c[i] = a.coeff_at(i);
    return GradedTensor(out.basis_ptr(), std::move(c));
}

inline constexpr double kConstantTermTolerance = 1e-12;

/// Truncated power series; requires a zero constant term.
inline GradedTensor exp(const GradedTensor& a) {
    if (std::abs(a.constant()) > kConstantTermTolerance)
        throw DomainError("exp requires a tensor with zero constant term (got " +
                          std::to_string(a.constant()) + ")");
    std::vector<double> c(a.coefficients().begin(), a.coefficients().end());
    c[0] = 0.0;
    const GradedTensor x(a.basis_ptr(), std::move(c));
    const GradedTensor one = GradedTensor::unit(a.dimension(), a.truncation());
    // Horner: 1 + x(1 + x/2(1 + x/3(...)))
    GradedTensor r = one;
    for (int k = a.truncation(); k >= 1; --k) r = one + mul(x, r) / static_cast<double>(k);
    return r;
}

/// Truncated logarithm; requires a constant term of 1.
inline GradedTensor log(const GradedTensor& g) {
    if (std::abs(g.constant() - 1.0) > kConstantTermTolerance)
        throw DomainError("log requires a tensor with constant term 1 (got " + std::to_string(g.constant()) +
                          ")");
    std::vector<double> c(g.coefficients().begin(), g.coefficients().end());
    c[0] = 0.0;
    const GradedTensor x(g.basis_ptr(), std::move(c));
    const int m = std::max(g.truncation(), 1);
    auto coef = [](int k) { return (k % 2 == 1 ? 1.0 : -1.0) / k; };
    const GradedTensor one = GradedTensor::unit(g.dimension(), g.truncation());
    GradedTensor p = one * coef(m);
    for (int k = m - 1; k >= 1; --k) p = one * coef(k) + mul(x, p);
    return mul(x, p);
}

inline double inner(const GradedTensor& a, const GradedTensor& b) {
    a.require_same_shape(b, "inner");
    auto ac = a.coefficients();
    auto bc = b.coefficients();
    return std::inner_product(ac.begin(), ac.end(), bc.begin(), 0.0);
}

inline double norm2(const GradedTensor& a) { return std::sqrt(inner(a, a)); }

inline double max_abs_difference(const GradedTensor& a, const GradedTensor& b) {
    a.require_same_shape(b, "compare");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.basis().size(); ++i)
        worst = std::max(worst, std::abs(a.coeff_at(i) - b.coeff_at(i)));
    return worst;
}

inline constexpr double kDefaultTensorTolerance = 1e-12;

/// Coefficient-wise equality within an absolute tolerance.
inline bool approx_equal(const GradedTensor& a, const GradedTensor& b, double tol = kDefaultTensorTolerance) {
    return a.same_shape(b) && max_abs_difference(a, b) <= tol;
}

}  // namespace klv
