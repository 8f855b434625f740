#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace klv {

/// Real polynomial in N variables, stored as exponent vector -> coefficient.
class MultiPoly {
public:
    using Exponents = std::vector<int>;

    explicit MultiPoly(int variables) : vars_(variables) {
        if (variables < 1) throw RangeError("polynomial needs at least one variable");
    }

    static MultiPoly constant(int variables, double c) {
        MultiPoly p(variables);
        p.add_term(Exponents(static_cast<std::size_t>(variables), 0), c);
        return p;
    }

    static MultiPoly variable(int variables, int j) {
        MultiPoly p(variables);
        Exponents e(static_cast<std::size_t>(variables), 0);
        e.at(static_cast<std::size_t>(j)) = 1;
        p.add_term(e, 1.0);
        return p;
    }

    static MultiPoly monomial(Exponents e, double c) {
        MultiPoly p(static_cast<int>(e.size()));
        p.add_term(e, c);
        return p;
    }

    int variables() const noexcept { return vars_; }
    const std::map<Exponents, double>& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }

    int degree() const {
        int deg = -1;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int k : e) s += k;
            deg = std::max(deg, s);
        }
        return deg;
    }

    double coefficient(const Exponents& e) const {
        auto it = terms_.find(e);
        return it == terms_.end() ? 0.0 : it->second;
    }

    void add_term(const Exponents& e, double c) {
        if (static_cast<int>(e.size()) != vars_) throw StructuralError("monomial has the wrong number of variables");
        if (c == 0.0) return;
        auto [it, inserted] = terms_.emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    template <class Vec>
    double evaluate(const Vec& x) const {
        double total = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = c;
            for (int j = 0; j < vars_; ++j)
                for (int k = 0; k < e[static_cast<std::size_t>(j)]; ++k) m *= x[j];
            total += m;
        }
        return total;
    }

    MultiPoly derivative(int j) const {
        MultiPoly out(vars_);
        for (const auto& [e, c] : terms_) {
            const int k = e[static_cast<std::size_t>(j)];
            if (k == 0) continue;
            Exponents d = e;
            d[static_cast<std::size_t>(j)] -= 1;
            out.add_term(d, c * k);
        }
        return out;
    }

    /// Multiplies by x_j.
    MultiPoly times_variable(int j) const {
        MultiPoly out(vars_);
        for (const auto& [e, c] : terms_) {
            Exponents d = e;
            d[static_cast<std::size_t>(j)] += 1;
            out.add_term(d, c);
        }
        return out;
    }

    MultiPoly& operator+=(const MultiPoly& o) {
        check(o);
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }
    MultiPoly& operator-=(const MultiPoly& o) {
        check(o);
        for (const auto& [e, c] : o.terms_) add_term(e, -c);
        return *this;
    }
    MultiPoly& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
            return *this;
        }
        for (auto& [e, c] : terms_) c *= s;
        return *this;
    }
    friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) { return a += b; }
    friend MultiPoly operator-(MultiPoly a, const MultiPoly& b) { return a -= b; }
    friend MultiPoly operator*(MultiPoly a, double s) { return a *= s; }
    friend MultiPoly operator*(double s, MultiPoly a) { return a *= s; }

    friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
        a.check(b);
        MultiPoly out(a.vars_);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) {
                Exponents e = ea;
                for (std::size_t j = 0; j < e.size(); ++j) e[j] += eb[j];
                out.add_term(e, ca * cb);
            }
        return out;
    }

    double max_abs_coefficient() const {
        double m = 0.0;
        for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    /// Upper bound for sup |p| over [-r, r]^N: sum |c| r^deg.
    double crude_sup_bound(double r) const {
        double b = 0.0;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int k : e) s += k;
            b += std::abs(c) * std::pow(r, s);
        }
        return b;
    }

    /// Rigorous upper bound for sup |p| over [-r, r]^N: maximum over a uniform grid with
    /// `points` nodes per axis, plus (spacing/2) * sum_j (bound on |dp/dx_j|).
    double sup_abs_on_box(double r, int points = 41) const {
        if (points < 2) throw RangeError("box grid needs at least 2 points per axis");
        const double spacing = 2.0 * r / (points - 1);
        std::vector<int> idx(static_cast<std::size_t>(vars_), 0);
        std::vector<double> x(static_cast<std::size_t>(vars_));
        double best = 0.0;
        for (;;) {
            for (int j = 0; j < vars_; ++j) x[static_cast<std::size_t>(j)] = -r + spacing * idx[static_cast<std::size_t>(j)];
            best = std::max(best, std::abs(evaluate(x)));
            int j = 0;
            while (j < vars_ && ++idx[static_cast<std::size_t>(j)] == points) idx[static_cast<std::size_t>(j++)] = 0;
            if (j == vars_) break;
        }
        double slope = 0.0;
        for (int j = 0; j < vars_; ++j) slope += derivative(j).crude_sup_bound(r);
        return best + 0.5 * spacing * slope;
    }

    friend bool approx_equal(const MultiPoly& a, const MultiPoly& b, double tol) {
        return (a - b).max_abs_coefficient() <= tol;
    }

private:
    void check(const MultiPoly& o) const {
        if (o.vars_ != vars_) throw StructuralError("polynomials in different numbers of variables");
    }

    int vars_;
    std::map<Exponents, double> terms_;
};

}  // namespace klv
