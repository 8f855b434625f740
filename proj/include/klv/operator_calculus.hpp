#pragma once

#include <cmath>
#include <functional>
#include <map>

#include "lie.hpp"
#include "polynomial.hpp"
#include "tensor.hpp"
#include "vector_fields.hpp"

namespace klv {

/// (Vf)(x) = sum_j V^j(x) df/dx_j for an affine field V(x) = Ax + b. Exact.
inline MultiPoly lie_derivative(const AffineMap& v, const MultiPoly& f) {
    const int n = f.variables();
    if (v.offset.size() != n) throw StructuralError("field and polynomial live in different dimensions");
    MultiPoly out(n);
    for (int j = 0; j < n; ++j) {
        const MultiPoly df = f.derivative(j);
        if (df.is_zero()) continue;
        MultiPoly coeff = MultiPoly::constant(n, v.offset[j]);
        for (int k = 0; k < n; ++k)
            if (v.matrix(j, k) != 0.0) coeff += v.matrix(j, k) * MultiPoly::variable(n, k);
        out += coeff * df;
    }
    return out;
}

inline MultiPoly lie_derivative(const VectorField& v, const MultiPoly& f) { return lie_derivative(v.affine_map(), f); }

/// V_alpha f = V_a1(V_a2(...(V_ak f))): composition of differential operators, the
/// rightmost letter acting first. This is the order that makes Gamma a homomorphism
/// compatible with Chen's identity (first path segment = leftmost tensor factor).
inline MultiPoly word_operator(const Word& w, const VectorFieldSystem& sys, const MultiPoly& f) {
    if (!sys.is_affine()) throw DomainError("word_operator needs an affine system");
    MultiPoly g = f;
    for (std::size_t p = w.length(); p-- > 0;) g = lie_derivative(sys.field(w[p]).affine_map(), g);
    return g;
}

/// Gamma(w) f = sum_words w[alpha] V_alpha f, as a polynomial.
inline MultiPoly taylor_operator(const GradedTensor& w, const VectorFieldSystem& sys, const MultiPoly& f) {
    if (!sys.is_affine()) throw DomainError("taylor_operator needs an affine system");
    if (w.dimension() != sys.noise_dimension())
        throw StructuralError("tensor dimension does not match the system");
    // V_alpha f depends on alpha's suffixes; memoise by suffix.
    std::map<Word, MultiPoly> memo;
    std::function<const MultiPoly&(const Word&)> apply = [&](const Word& a) -> const MultiPoly& {
        if (auto it = memo.find(a); it != memo.end()) return it->second;
        MultiPoly value = f;
        if (!a.empty()) {
            auto l = a.letters();
            const MultiPoly& inner_value = apply(Word(std::vector<Letter>(l.begin() + 1, l.end())));
            value = lie_derivative(sys.field(l[0]).affine_map(), inner_value);
        }
        return memo.emplace(a, std::move(value)).first->second;
    };
    MultiPoly out(f.variables());
    for (std::size_t i = 0; i < w.basis().size(); ++i) {
        const double c = w.coeff_at(i);
        if (c == 0.0) continue;
        out += c * apply(w.basis().word(i));
    }
    return out;
}

/// |f(Exp[Gamma <sqrt s, w>](x)) - (Gamma(pi_m exp <sqrt s, w>) f)(x)| with m the truncation of w.
/// Flow uses `cfg`; pass a tight configuration so integration error is negligible.
inline double flow_tensor_gap(const LiePolynomial& w, const VectorFieldSystem& sys, const MultiPoly& f,
                              const State& x, double s, const FlowConfig& cfg = {512, 0.0}) {
    w.require_certified("flow_tensor_gap");
    if (!(s > 0.0)) throw RangeError("gap scale s must be > 0");
    const LiePolynomial scaled = w.dilated(std::sqrt(s));
    const State y = flow_exp(gamma_field(scaled, sys), 1.0, x, cfg);
    const double flow_value = f.evaluate(y);
    const double tensor_value = taylor_operator(exp(scaled.tensor()), sys, f).evaluate(x);
    return std::abs(flow_value - tensor_value);
}

/// sum_{j=1..m} sup_box |Gamma((pi_2m - pi_m) w^j) f| over [-r, r]^N.
inline double flow_tensor_gap_bound(const LiePolynomial& w, const VectorFieldSystem& sys, const MultiPoly& f,
                                    double r = 2.0, int grid = 41) {
    const int m = w.truncation();
    const GradedTensor wide = embed(w.tensor(), 2 * m);
    GradedTensor power = wide;
    double total = 0.0;
    for (int j = 1; j <= m; ++j) {
        if (j > 1) power = mul(power, wide);
        const GradedTensor tail = power - project(power, m);
        total += taylor_operator(tail, sys, f).sup_abs_on_box(r, grid);
    }
    return total;
}

}  // namespace klv
