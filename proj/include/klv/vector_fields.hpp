#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lie.hpp"
#include "path.hpp"

namespace klv {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct AffineMap {
    Matrix matrix;
    State offset;
};

/// Integration and differentiation settings for flows.
struct FlowConfig {
    /// RK4 steps per unit of flow time (one linear path segment is one unit).
    int substeps = 32;
    /// Central-difference step for Jacobians of generic fields; 0 selects cbrt(eps) * (1 + |x|).
    double fd_step = 0.0;

    void check() const {
        if (substeps < 1) throw RangeError("flow substeps must be >= 1");
        if (!(fd_step >= 0.0)) throw RangeError("finite-difference step must be >= 0");
    }
};

/// A vector field on R^N: either affine x -> Ax + b (exact algebra) or a callback.
class VectorField {
public:
    using Evaluator = std::function<State(const State&)>;
    using JacobianEvaluator = std::function<Matrix(const State&)>;

    static VectorField affine(Matrix matrix, State offset) {
        if (matrix.rows() != matrix.cols() || matrix.rows() != offset.size())
            throw StructuralError("affine field needs an N x N matrix and an N-vector");
        VectorField v;
        v.dim_ = static_cast<int>(offset.size());
        v.affine_ = AffineMap{std::move(matrix), std::move(offset)};
        return v;
    }

    static VectorField zero(int n) { return affine(Matrix::Zero(n, n), State::Zero(n)); }

    /// Callback field. Without a Jacobian, brackets fall back to central differences.
    static VectorField generic(int n, Evaluator eval, JacobianEvaluator jacobian = {}) {
        if (!eval) throw StructuralError("generic field needs an evaluator");
        VectorField v;
        v.dim_ = n;
        v.eval_ = std::move(eval);
        v.jac_ = std::move(jacobian);
        return v;
    }

    int state_dimension() const noexcept { return dim_; }
    bool is_affine() const noexcept { return affine_.has_value(); }
    const AffineMap& affine_map() const {
        if (!affine_) throw DomainError("vector field is not affine");
        return *affine_;
    }
    bool has_jacobian() const noexcept { return is_affine() || static_cast<bool>(jac_); }
    /// Set when the field was built from finite-difference brackets.
    bool approximate() const noexcept { return approximate_; }

    State operator()(const State& x) const {
        State y = affine_ ? State(affine_->matrix * x + affine_->offset) : eval_(x);
        if (!y.allFinite()) throw DivergenceError("vector field evaluated to a non-finite value");
        return y;
    }

    Matrix jacobian(const State& x, double fd_step = 0.0) const {
        if (affine_) return affine_->matrix;
        if (jac_) return jac_(x);
        const double h = fd_step > 0.0 ? fd_step
                                       : std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
        Matrix jac(dim_, dim_);
        State xp = x, xm = x;
        for (int j = 0; j < dim_; ++j) {
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            jac.col(j) = (eval_(xp) - eval_(xm)) / (2.0 * h);
            xp[j] = xm[j] = x[j];
        }
        return jac;
    }

    /// sum_k c_k V_k; affine if every term is affine.
    static VectorField combination(const std::vector<std::pair<double, VectorField>>& terms, int n) {
        bool all_affine = true;
        for (const auto& [c, v] : terms) {
            if (v.dim_ != n) throw StructuralError("vector fields live on different state spaces");
            all_affine = all_affine && v.is_affine();
        }
        if (all_affine) {
            Matrix a = Matrix::Zero(n, n);
            State b = State::Zero(n);
            for (const auto& [c, v] : terms) {
                if (c == 0.0) continue;
                a += c * v.affine_->matrix;
                b += c * v.affine_->offset;
            }
            return affine(std::move(a), std::move(b));
        }
        auto shared = std::make_shared<std::vector<std::pair<double, VectorField>>>(terms);
        bool exact_jac = true, approx = false;
        for (const auto& [c, v] : terms) {
            exact_jac = exact_jac && v.has_jacobian();
            approx = approx || v.approximate_;
        }
        JacobianEvaluator jac;
        if (exact_jac)
            jac = [shared, n](const State& x) {
                Matrix out = Matrix::Zero(n, n);
                for (const auto& [c, v] : *shared)
                    if (c != 0.0) out += c * v.jacobian(x);
                return out;
            };
        VectorField out = generic(
            n,
            [shared, n](const State& x) {
                State y = State::Zero(n);
                for (const auto& [c, v] : *shared)
                    if (c != 0.0) y += c * v(x);
                return y;
            },
            std::move(jac));
        out.approximate_ = approx;
        return out;
    }

    friend VectorField operator+(const VectorField& a, const VectorField& b) {
        return combination({{1.0, a}, {1.0, b}}, a.dim_);
    }
    friend VectorField operator*(double c, const VectorField& v) { return combination({{c, v}}, v.dim_); }

private:
    friend VectorField bracket_field(const VectorField&, const VectorField&, double);

    int dim_ = 0;
    std::optional<AffineMap> affine_;
    Evaluator eval_;
    JacobianEvaluator jac_;
    bool approximate_ = false;
};

/// Lie bracket [V,W] = DW.V - DV.W, i.e. the commutator VW - WV of first-order operators.
/// Exact for affine fields; otherwise uses Jacobians (finite differences when absent).
inline VectorField bracket_field(const VectorField& v, const VectorField& w, double fd_step = 0.0) {
    if (v.state_dimension() != w.state_dimension()) throw StructuralError("bracket of fields on different spaces");
    if (v.is_affine() && w.is_affine()) {
        const auto& [a, av] = v.affine_map();
        const auto& [b, bw] = w.affine_map();
        return VectorField::affine(b * a - a * b, b * av - a * bw);
    }
    VectorField out = VectorField::generic(v.state_dimension(), [v, w, fd_step](const State& x) {
        return State(w.jacobian(x, fd_step) * v(x) - v.jacobian(x, fd_step) * w(x));
    });
    out.approximate_ = !v.has_jacobian() || !w.has_jacobian() || v.approximate_ || w.approximate_;
    return out;
}

/// The driving fields V_0 (drift), V_1..V_d of a Stratonovich SDE on R^N.
class VectorFieldSystem {
public:
    explicit VectorFieldSystem(std::vector<VectorField> fields) : fields_(std::move(fields)) {
        if (fields_.size() < 2) throw StructuralError("system needs a drift and at least one diffusion field");
        for (const auto& f : fields_)
            if (f.state_dimension() != fields_.front().state_dimension())
                throw StructuralError("system fields live on different state spaces");
    }

    int state_dimension() const noexcept { return fields_.front().state_dimension(); }
    /// Number of Brownian drivers d.
    int noise_dimension() const noexcept { return static_cast<int>(fields_.size()) - 1; }
    const VectorField& field(int i) const { return fields_.at(static_cast<std::size_t>(i)); }
    const std::vector<VectorField>& fields() const noexcept { return fields_; }
    bool is_affine() const noexcept {
        for (const auto& f : fields_)
            if (!f.is_affine()) return false;
        return true;
    }

private:
    std::vector<VectorField> fields_;
};

/// Gamma(L) as a vector field. The level-k part P_k of a Lie element equals D(P_k)/k with D
/// the right-nested bracketing, so Gamma(L) = sum_w L[w]/|w| [V_w1,[V_w2,[...,V_wk]]];
/// only brackets of the driving fields are ever evaluated.
inline VectorField gamma_field(const LiePolynomial& lie, const VectorFieldSystem& sys, double fd_step = 0.0) {
    lie.require_certified("gamma_field");
    if (lie.dimension() != sys.noise_dimension())
        throw StructuralError("Lie polynomial dimension " + std::to_string(lie.dimension()) +
                              " does not match the system's " + std::to_string(sys.noise_dimension()) +
                              " Brownian drivers");
    const GradedTensor& t = lie.tensor();
    const WordBasis& basis = t.basis();
    std::map<Word, VectorField> nested;
    std::function<const VectorField&(const Word&, std::size_t)> right_nested =
        [&](const Word& w, std::size_t from) -> const VectorField& {
        auto l = w.letters();
        Word suffix(std::vector<Letter>(l.begin() + static_cast<std::ptrdiff_t>(from), l.end()));
        if (auto it = nested.find(suffix); it != nested.end()) return it->second;
        VectorField f = (from + 1 == l.size())
                            ? sys.field(l[from])
                            : bracket_field(sys.field(l[from]), right_nested(w, from + 1), fd_step);
        return nested.emplace(std::move(suffix), std::move(f)).first->second;
    };
    std::vector<std::pair<double, VectorField>> terms;
    for (std::size_t i = 1; i < basis.size(); ++i) {
        const double c = t.coeff_at(i);
        if (c == 0.0) continue;
        terms.emplace_back(c / basis.length(i), right_nested(basis.word(i), 0));
    }
    return VectorField::combination(terms, sys.state_dimension());
}

/// Exp(tV) with classical RK4 over ceil(|t| * substeps) equal steps, set up once and
/// applied to many starting points.
class PreparedFlow {
public:
    PreparedFlow(VectorField v, double t, const FlowConfig& cfg = {}) : field_(std::move(v)), t_(t) {
        cfg.check();
        if (!std::isfinite(t)) throw RangeError("flow time must be finite");
        steps_ = std::max(1, static_cast<int>(std::ceil(std::abs(t) * cfg.substeps - 1e-9)));
        h_ = t / steps_;
        if (field_.is_affine()) {
            // RK4 on y' = Ay + b collapses to y <- My + c with the degree-4 Taylor polynomial of e^{hA}.
            const auto& [a, b] = field_.affine_map();
            const Matrix ha = h_ * a;
            const Matrix id = Matrix::Identity(a.rows(), a.cols());
            const Matrix ha2 = ha * ha;
            const Matrix ha3 = ha2 * ha;
            step_ = id + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 * ha / 24.0;
            shift_ = h_ * ((id + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) * b);
        }
    }

    int steps() const noexcept { return steps_; }
    double time() const noexcept { return t_; }
    const VectorField& field() const noexcept { return field_; }

    State operator()(const State& x) const {
        if (!x.allFinite()) throw DivergenceError("flow started from a non-finite state");
        if (x.size() != field_.state_dimension()) throw StructuralError("state dimension does not match the field");
        State y = x;
        for (int i = 0; i < steps_; ++i) {
            if (field_.is_affine()) {
                y = step_ * y + shift_;
            } else {
                try {
                    const State k1 = field_(y);
                    const State k2 = field_(y + 0.5 * h_ * k1);
                    const State k3 = field_(y + 0.5 * h_ * k2);
                    const State k4 = field_(y + h_ * k3);
                    y += (h_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                } catch (const DivergenceError&) {
                    y.setConstant(std::numeric_limits<double>::quiet_NaN());
                }
            }
            if (!y.allFinite())
                throw DivergenceError("flow diverged at substep " + std::to_string(i + 1) + " of " +
                                      std::to_string(steps_));
        }
        return y;
    }

private:
    VectorField field_;
    double t_;
    int steps_ = 1;
    double h_ = 0.0;
    Matrix step_;
    State shift_;
};

/// Exp(tV)(x).
inline State flow_exp(const VectorField& v, double t, const State& x, const FlowConfig& cfg = {}) {
    return PreparedFlow(v, t, cfg)(x);
}

/// The field dt V_0 + sum_i dw^i V_i driving one linear segment over unit parameter time.
inline VectorField segment_field(const VectorFieldSystem& sys, double dt, std::span<const double> dw) {
    std::vector<std::pair<double, VectorField>> terms{{dt, sys.field(0)}};
    for (std::size_t i = 0; i < dw.size(); ++i) terms.emplace_back(dw[i], sys.field(static_cast<int>(i) + 1));
    return VectorField::combination(terms, sys.state_dimension());
}

/// Solution of dX = sum_{i=0..d} V_i(X) d omega^i along a piecewise-linear path (omega^0 = t).
inline State flow_along_path(const PiecewiseLinearPath& path, const VectorFieldSystem& sys, const State& x,
                             const FlowConfig& cfg = {}) {
    if (path.dimension() != sys.noise_dimension())
        throw StructuralError("path dimension does not match the system's Brownian drivers");
    State y = x;
    for (std::size_t s = 0; s < path.segment_count(); ++s) {
        const auto inc = path.segment_increment(s);
        y = flow_exp(segment_field(sys, path.segment_duration(s), inc), 1.0, y, cfg);
    }
    return y;
}

}  // namespace klv
