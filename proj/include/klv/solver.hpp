#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cubature.hpp"
#include "detail/parallel.hpp"
#include "detail/summation.hpp"
#include "errors.hpp"
#include "vector_fields.hpp"

namespace klv {

/// 0 = t_0 < t_1 < ... < t_k = T.
class Partition {
public:
    explicit Partition(std::vector<double> times) : times_(std::move(times)) {
        if (times_.size() < 2) throw RangeError("partition needs at least one step");
        if (times_.front() != 0.0) throw RangeError("partition must start at 0");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i]))
                throw RangeError("partition times must be finite and strictly increasing (t_" + std::to_string(i) +
                                 " = " + std::to_string(times_[i]) + ")");
    }

    static Partition uniform(double horizon, int steps) { return gamma(horizon, steps, 1.0); }

    /// t_j = T (1 - (1 - j/k)^gamma): steps shrink towards the horizon.
    static Partition gamma(double horizon, int steps, double gamma_exponent) {
        if (!(horizon > 0.0)) throw RangeError("horizon must be > 0");
        if (steps < 1) throw RangeError("partition needs k >= 1 steps");
        if (!(gamma_exponent >= 1.0)) throw RangeError("partition exponent gamma must be >= 1");
        std::vector<double> t(static_cast<std::size_t>(steps) + 1);
        for (int j = 0; j < steps; ++j)
            t[static_cast<std::size_t>(j)] = horizon * (1.0 - std::pow(1.0 - double(j) / steps, gamma_exponent));
        t.back() = horizon;
        return Partition(std::move(t));
    }

    const std::vector<double>& times() const noexcept { return times_; }
    std::size_t steps() const noexcept { return times_.size() - 1; }
    double horizon() const noexcept { return times_.back(); }
    double gap(std::size_t j) const { return times_.at(j + 1) - times_.at(j); }
    std::vector<double> gaps() const {
        std::vector<double> g(steps());
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = gap(j);
        return g;
    }

private:
    std::vector<double> times_;
};

inline Partition gamma_partition(double horizon, int steps, double gamma_exponent) {
    return Partition::gamma(horizon, steps, gamma_exponent);
}

using Payoff = std::function<double(const State&)>;

enum class SolverMode { full, sampled };

inline const char* to_string(SolverMode m) { return m == SolverMode::full ? "full" : "sampled"; }

struct SolverOptions {
    FlowConfig flow;
    /// Full enumeration refuses trees with more leaves than this.
    double leaf_cap = 1e7;
    unsigned threads = 0;
    /// Walks cubature branches in reverse order; the result must not change beyond rounding.
    bool reverse_branch_order = false;
    /// Sampled mode only.
    std::uint64_t samples = 100000;
    std::uint64_t seed = 1;
};

struct SolverResult {
    double value = 0.0;
    std::uint64_t leaves_evaluated = 0;
    SolverMode mode = SolverMode::full;
    std::vector<double> partition;
    /// Running Neumaier compensation of the final sum.
    double compensation = 0.0;
    double min_leaf = std::numeric_limits<double>::infinity();
    double max_leaf = -std::numeric_limits<double>::infinity();
    /// Sampled mode: standard error of the mean. Zero in full mode.
    double standard_error = 0.0;
};

namespace detail {

/// One cubature branch at one partition level, as a sequence of prepared flows.
struct Branch {
    double weight;
    std::vector<PreparedFlow> flows;

    State apply(const State& x) const {
        State y = x;
        for (const auto& f : flows) y = f(y);
        return y;
    }
};

inline std::vector<std::vector<Branch>> build_levels(const CubatureFormula& q, const VectorFieldSystem& sys,
                                                    const Partition& part, const FlowConfig& cfg) {
    if (q.dimension() != sys.noise_dimension())
        throw StructuralError("cubature dimension " + std::to_string(q.dimension()) + " does not match the system's " +
                              std::to_string(sys.noise_dimension()) + " Brownian drivers");
    if (q.horizon() != 1.0) throw RangeError("cubature formula must live on [0,1]");
    std::vector<std::vector<Branch>> levels;
    levels.reserve(part.steps());
    std::vector<double> seen_gaps;
    for (std::size_t j = 0; j < part.steps(); ++j) {
        const double s = part.gap(j);
        // Uniform stretches of the partition reuse the previous level.
        if (j > 0 && s == seen_gaps.back()) {
            levels.push_back(levels.back());
            seen_gaps.push_back(s);
            continue;
        }
        std::vector<Branch> level;
        for (std::size_t i = 0; i < q.size(); ++i) {
            Branch b{q.weights()[i], {}};
            if (q.has_path_support()) {
                const PiecewiseLinearPath p = brownian_rescale(q.path_support()[i], s);
                for (std::size_t seg = 0; seg < p.segment_count(); ++seg)
                    b.flows.emplace_back(segment_field(sys, p.segment_duration(seg), p.segment_increment(seg)), 1.0,
                                         cfg);
            } else {
                b.flows.emplace_back(gamma_field(q.lie_support()[i].dilated(std::sqrt(s)), sys, cfg.fd_step), 1.0,
                                     cfg);
            }
            level.push_back(std::move(b));
        }
        levels.push_back(std::move(level));
        seen_gaps.push_back(s);
    }
    return levels;
}

inline std::string branch_label(const std::vector<std::size_t>& branch) {
    std::string s = "(";
    for (std::size_t i = 0; i < branch.size(); ++i) s += (i ? "," : "") + std::to_string(branch[i]);
    return s + ")";
}

}  // namespace detail

/// E_nu f(X_T^x) by walking the whole cubature tree: n^k leaves.
/// The tree is cut at a fixed prefix depth into tasks; each task sums its leaves in
/// depth-first order, and task sums are combined in task order, so the result does not
/// depend on the thread count.
inline SolverResult klv_full(const CubatureFormula& q, const VectorFieldSystem& sys, const Payoff& f, const State& x,
                             const Partition& part, const SolverOptions& opt = {}) {
    const auto levels = detail::build_levels(q, sys, part, opt.flow);
    const std::size_t n = q.size();
    const std::size_t k = part.steps();
    const double leaves = std::pow(double(n), double(k));
    if (leaves > opt.leaf_cap) throw LeafCapExceeded(leaves, opt.leaf_cap);

    std::size_t depth = 0;
    std::size_t tasks = 1;
    while (depth < k && tasks < 64) {
        tasks *= n;
        ++depth;
    }
    auto branch_at = [&](std::size_t pos) { return opt.reverse_branch_order ? n - 1 - pos : pos; };

    struct TaskResult {
        detail::CompensatedSum sum;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
    };
    std::vector<TaskResult> results(tasks);

    detail::parallel_for(tasks, opt.threads ? opt.threads : default_thread_count(), [&](std::size_t task) {
        std::vector<std::size_t> branch(k);
        std::size_t rest = task;
        for (std::size_t j = depth; j-- > 0;) {
            branch[j] = branch_at(rest % n);
            rest /= n;
        }
        TaskResult& r = results[task];
        try {
            State y = x;
            double w = 1.0;
            for (std::size_t j = 0; j < depth; ++j) {
                const auto& b = levels[j][branch[j]];
                y = b.apply(y);
                w *= b.weight;
            }
            std::function<void(std::size_t, const State&, double)> walk = [&](std::size_t j, const State& z,
                                                                                double wz) {
                if (j == k) {
                    const double v = f(z);
                    if (!std::isfinite(v)) throw DivergenceError("payoff is not finite");
                    r.sum.add(wz * v);
                    r.lo = std::min(r.lo, v);
                    r.hi = std::max(r.hi, v);
                    return;
                }
                for (std::size_t pos = 0; pos < n; ++pos) {
                    branch[j] = branch_at(pos);
                    const auto& b = levels[j][branch[j]];
                    walk(j + 1, b.apply(z), wz * b.weight);
                }
            };
            walk(depth, y, w);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " on branch " + detail::branch_label(branch));
        }
    });

    SolverResult out;
    out.mode = SolverMode::full;
    out.partition = part.times();
    out.leaves_evaluated = static_cast<std::uint64_t>(leaves);
    detail::CompensatedSum total;
    for (const auto& r : results) {
        total.add(r.sum);
        out.min_leaf = std::min(out.min_leaf, r.lo);
        out.max_leaf = std::max(out.max_leaf, r.hi);
    }
    out.value = total.value();
    out.compensation = total.compensation();
    return out;
}

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; portable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t chunk) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
    return std::mt19937_64(seq);
}

inline constexpr std::uint64_t kSampleChunk = 1024;

}  // namespace detail

/// Monte Carlo over the cubature tree: at each level one branch is drawn with probability
/// lambda_i / sum(lambda). Samples are split into fixed chunks with their own seeds.
inline SolverResult klv_sampled(const CubatureFormula& q, const VectorFieldSystem& sys, const Payoff& f,
                                const State& x, const Partition& part, const SolverOptions& opt = {}) {
    if (opt.samples < 2) throw RangeError("sampled mode needs at least 2 samples");
    const auto levels = detail::build_levels(q, sys, part, opt.flow);
    const std::size_t n = q.size();
    double mass = 0.0;
    for (double w : q.weights()) mass += w;
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cdf[i] = (acc += q.weights()[i] / mass);
    const double scale = std::pow(mass, double(part.steps()));

    const std::uint64_t chunks = (opt.samples + detail::kSampleChunk - 1) / detail::kSampleChunk;
    struct ChunkResult {
        detail::CompensatedSum sum, sum_sq;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
    };
    std::vector<ChunkResult> results(chunks);
    detail::parallel_for(chunks, opt.threads ? opt.threads : default_thread_count(), [&](std::size_t c) {
        auto rng = detail::chunk_rng(opt.seed, c);
        const std::uint64_t begin = c * detail::kSampleChunk;
        const std::uint64_t end = std::min(opt.samples, begin + detail::kSampleChunk);
        std::vector<std::size_t> branch(part.steps());
        for (std::uint64_t s = begin; s < end; ++s) {
            State y = x;
            for (std::size_t j = 0; j < part.steps(); ++j) {
                const double u = detail::unit_uniform(rng);
                std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
                branch[j] = std::min(i, n - 1);
            }
            try {
                for (std::size_t j = 0; j < part.steps(); ++j) y = levels[j][branch[j]].apply(y);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " on branch " + detail::branch_label(branch));
            }
            const double v = f(y) * scale;
            if (!std::isfinite(v)) throw DivergenceError("payoff is not finite on branch " + detail::branch_label(branch));
            results[c].sum.add(v);
            results[c].sum_sq.add(v * v);
            results[c].lo = std::min(results[c].lo, v / scale);
            results[c].hi = std::max(results[c].hi, v / scale);
        }
    });

    SolverResult out;
    out.mode = SolverMode::sampled;
    out.partition = part.times();
    out.leaves_evaluated = opt.samples;
    detail::CompensatedSum sum, sum_sq;
    for (const auto& r : results) {
        sum.add(r.sum);
        sum_sq.add(r.sum_sq);
        out.min_leaf = std::min(out.min_leaf, r.lo);
        out.max_leaf = std::max(out.max_leaf, r.hi);
    }
    const double count = double(opt.samples);
    out.value = sum.value() / count;
    out.compensation = sum.compensation() / count;
    const double var = std::max(0.0, (sum_sq.value() - count * out.value * out.value) / (count - 1.0));
    out.standard_error = std::sqrt(var / count);
    return out;
}

inline SolverResult klv_solve(const CubatureFormula& q, const VectorFieldSystem& sys, const Payoff& f,
                              const State& x, const Partition& part, SolverMode mode, const SolverOptions& opt = {}) {
    return mode == SolverMode::full ? klv_full(q, sys, f, x, part, opt) : klv_sampled(q, sys, f, x, part, opt);
}

/// One step of the flow-level operator: sum_j lambda_j f(Exp[Gamma <sqrt s, pi_m L_j>](x)).
/// The formula must carry Lie-polynomial support on [0,1].
inline double kusuoka_step(const CubatureFormula& q, const VectorFieldSystem& sys, const Payoff& f, const State& x,
                           double s, const FlowConfig& cfg = {}) {
    if (q.has_path_support()) throw DomainError("kusuoka_step needs a formula with Lie-polynomial support");
    if (q.horizon() != 1.0) throw RangeError("cubature formula must live on [0,1]");
    if (!(s > 0.0)) throw RangeError("step size must be > 0");
    detail::CompensatedSum sum;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const auto& l = q.lie_support()[j];
        const LiePolynomial lj = l.truncation() > q.degree() ? l.projected(q.degree()) : l;
        sum.add(q.weights()[j] * f(flow_exp(gamma_field(lj.dilated(std::sqrt(s)), sys, cfg.fd_step), 1.0, x, cfg)));
    }
    return sum.value();
}

struct McEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::uint64_t paths = 0;
    int steps = 0;
};

/// Euler-Maruyama reference for the Stratonovich system, run in Ito form with drift
/// V_0 + 1/2 sum_i DV_i . V_i. Paths are chunked with per-chunk seeds.
inline McEstimate euler_mc(const VectorFieldSystem& sys, const Payoff& f, const State& x, double horizon, int steps,
                           std::uint64_t paths, std::uint64_t seed, unsigned threads = 0, double fd_step = 0.0) {
    if (steps < 1) throw RangeError("Euler scheme needs at least one step");
    if (paths < 2) throw RangeError("Monte Carlo needs at least 2 paths");
    if (!(horizon > 0.0)) throw RangeError("horizon must be > 0");
    const int d = sys.noise_dimension();
    const int n = sys.state_dimension();
    // Affine systems get the correction as a fixed affine map.
    std::optional<AffineMap> ito;
    if (sys.is_affine()) {
        AffineMap m = sys.field(0).affine_map();
        for (int i = 1; i <= d; ++i) {
            const auto& [a, b] = sys.field(i).affine_map();
            m.matrix += 0.5 * a * a;
            m.offset += 0.5 * a * b;
        }
        ito = std::move(m);
    }
    auto drift = [&](const State& y) -> State {
        if (ito) return ito->matrix * y + ito->offset;
        State out = sys.field(0)(y);
        for (int i = 1; i <= d; ++i) out += 0.5 * sys.field(i).jacobian(y, fd_step) * sys.field(i)(y);
        return out;
    };
    const double h = horizon / steps;
    const double sqrt_h = std::sqrt(h);
    const std::uint64_t chunks = (paths + detail::kSampleChunk - 1) / detail::kSampleChunk;
    std::vector<detail::CompensatedSum> sums(chunks), squares(chunks);
    detail::parallel_for(chunks, threads ? threads : default_thread_count(), [&](std::size_t c) {
        auto rng = detail::chunk_rng(seed, c);
        std::normal_distribution<double> normal;
        const std::uint64_t begin = c * detail::kSampleChunk;
        const std::uint64_t end = std::min(paths, begin + detail::kSampleChunk);
        State y(n);
        for (std::uint64_t p = begin; p < end; ++p) {
            y = x;
            for (int s = 0; s < steps; ++s) {
                State next = y + h * drift(y);
                for (int i = 1; i <= d; ++i) next += (sqrt_h * normal(rng)) * sys.field(i)(y);
                y = std::move(next);
                if (!y.allFinite())
                    throw DivergenceError("Euler path " + std::to_string(p) + " diverged at step " +
                                          std::to_string(s + 1));
            }
            const double v = f(y);
            sums[c].add(v);
            squares[c].add(v * v);
        }
    });
    detail::CompensatedSum sum, sq;
    for (std::size_t c = 0; c < chunks; ++c) {
        sum.add(sums[c]);
        sq.add(squares[c]);
    }
    McEstimate out;
    out.paths = paths;
    out.steps = steps;
    const double count = double(paths);
    out.mean = sum.value() / count;
    const double var = std::max(0.0, (sq.value() - count * out.mean * out.mean) / (count - 1.0));
    out.standard_error = std::sqrt(var / count);
    return out;
}

}  // namespace klv
