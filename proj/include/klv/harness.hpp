#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubature.hpp"
#include "operator_calculus.hpp"
#include "solver.hpp"
#include "systems.hpp"

namespace klv {

struct SlopeFit {
    double slope = 0.0;
    double standard_error = 0.0;
    std::size_t points = 0;
    std::vector<std::string> warnings;
};

/// Least-squares slope of log(error) against log(x). Points with error <= 0 are dropped
/// with a warning; fewer than 3 usable points is an error.
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pairs) {
    SlopeFit fit;
    std::vector<double> lx, ly;
    for (const auto& [x, e] : pairs) {
        if (!(x > 0.0)) throw RangeError("fit_slope: abscissa must be > 0");
        if (!(e > 0.0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "dropped point x=%g with nonpositive error %g", x, e);
            fit.warnings.emplace_back(buf);
            continue;
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(e));
    }
    fit.points = lx.size();
    if (lx.size() < 3) throw DomainError("fit_slope needs at least 3 positive errors, got " + std::to_string(lx.size()));
    const double n = double(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw DomainError("fit_slope needs distinct abscissae");
    fit.slope = sxy / sxx;
    double ssr = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - my - fit.slope * (lx[i] - mx);
        ssr += r * r;
    }
    fit.standard_error = std::sqrt(ssr / (n - 2.0) / sxx);
    return fit;
}

/// Shortest round-trip decimal form, so CSV output is stable and lossless.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ExperimentConfig {
    std::string system = "gbm(0.05,0.3)";
    std::string payoff = "identity";
    std::vector<double> x0{1.0};
    double horizon = 1.0;
    /// Built-in name ("degree3", "degree3(d)", "degree5_d1") or a JSON file.
    std::string cubature = "degree3";
    bool cubature_is_file = false;
    /// Unset selects m - 1 for a degree-m formula (at least 1).
    std::optional<double> gamma;
    std::vector<int> k_list{2, 4, 6, 8, 10, 12};
    SolverMode mode = SolverMode::full;
    std::uint64_t seed = 1;
    double leaf_cap = 1e7;
    std::uint64_t samples = 100000;
    int substeps = 32;
    int mc_steps = 1000;
    std::uint64_t mc_paths = 200000;
    unsigned threads = 0;
    std::filesystem::path base_dir;
    std::filesystem::path out_dir;

    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
        ExperimentConfig c;
        c.base_dir = base_dir;
        auto field = [&](const char* key, auto& dst) {
            if (!j.contains(key)) return;
            try {
                j.at(key).get_to(dst);
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(std::string("config.") + key + ": " + e.what());
            }
        };
        if (!j.is_object()) throw LoadError("config: expected a JSON object");
        field("system", c.system);
        field("payoff", c.payoff);
        if (j.contains("x0")) {
            if (j["x0"].is_number())
                c.x0 = {j["x0"].get<double>()};
            else
                field("x0", c.x0);
        }
        field("T", c.horizon);
        if (!(c.horizon > 0.0)) throw LoadError("config.T: must be > 0");
        if (j.contains("cubature")) {
            const auto& q = j["cubature"];
            if (q.contains("builtin")) {
                c.cubature = q["builtin"].get<std::string>();
            } else if (q.contains("file")) {
                std::filesystem::path file = q["file"].get<std::string>();
                if (file.is_relative()) file = base_dir / file;
                if (!std::filesystem::exists(file)) throw LoadError("config.cubature.file: " + file.string() + " not found");
                c.cubature = file.string();
                c.cubature_is_file = true;
            } else {
                throw LoadError("config.cubature: needs 'builtin' or 'file'");
            }
        }
        if (j.contains("partition")) {
            const auto& p = j["partition"];
            if (p.contains("gamma") && !p["gamma"].is_null()) c.gamma = p["gamma"].get<double>();
            if (p.contains("k_list")) c.k_list = p["k_list"].get<std::vector<int>>();
        }
        if (c.k_list.empty()) throw LoadError("config.partition.k_list: must not be empty");
        for (std::size_t i = 0; i < c.k_list.size(); ++i)
            if (c.k_list[i] < 1 || (i > 0 && c.k_list[i] <= c.k_list[i - 1]))
                throw LoadError("config.partition.k_list: must be positive and strictly increasing");
        if (c.gamma && !(*c.gamma >= 1.0)) throw LoadError("config.partition.gamma: must be >= 1");
        if (j.contains("mode")) {
            const auto m = j["mode"].get<std::string>();
            if (m == "full")
                c.mode = SolverMode::full;
            else if (m == "sampled")
                c.mode = SolverMode::sampled;
            else
                throw LoadError("config.mode: expected 'full' or 'sampled', got '" + m + "'");
        }
        field("seed", c.seed);
        if (j.contains("caps")) {
            const auto& caps = j["caps"];
            try {
                if (caps.contains("leaf_cap")) c.leaf_cap = caps["leaf_cap"].get<double>();
                if (caps.contains("samples")) c.samples = caps["samples"].get<std::uint64_t>();
                if (caps.contains("substeps")) c.substeps = caps["substeps"].get<int>();
                if (caps.contains("mc_steps")) c.mc_steps = caps["mc_steps"].get<int>();
                if (caps.contains("mc_paths")) c.mc_paths = caps["mc_paths"].get<std::uint64_t>();
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(std::string("config.caps: ") + e.what());
            }
        }
        // Fail on a bad system or payoff now rather than mid-run.
        parse_system(c.system, c.base_dir);
        parse_payoff(c.payoff);
        return c;
    }

    static ExperimentConfig from_file(const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) throw LoadError("cannot open config " + file.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(file.string() + ": " + e.what());
        }
        return from_json(j, file.parent_path());
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"system", system},
                         {"payoff", payoff},
                         {"x0", x0},
                         {"T", horizon},
                         {"partition", {{"k_list", k_list}}},
                         {"mode", to_string(mode)},
                         {"seed", seed},
                         {"caps",
                          {{"leaf_cap", leaf_cap},
                           {"samples", samples},
                           {"substeps", substeps},
                           {"mc_steps", mc_steps},
                           {"mc_paths", mc_paths}}}};
        j["cubature"] = cubature_is_file ? nlohmann::json{{"file", cubature}} : nlohmann::json{{"builtin", cubature}};
        j["partition"]["gamma"] = gamma ? nlohmann::json(*gamma) : nlohmann::json(nullptr);
        return j;
    }

    State initial_state() const { return Eigen::Map<const State>(x0.data(), static_cast<Eigen::Index>(x0.size())); }
};

/// Resolves a built-in cubature name; `noise_dimension` fills in d for plain "degree3".
inline CubatureFormula builtin_cubature(const std::string& name, int noise_dimension) {
    auto [base, args] = detail::split_call(name);
    if (base == "degree3") {
        if (args.empty()) return degree3(noise_dimension);
        const auto d = detail::numeric_args(name, args, 1);
        return degree3(static_cast<int>(d[0]));
    }
    if (base == "degree5_d1" && args.empty()) return degree5_d1();
    throw LoadError("unknown built-in cubature '" + name + "' (expected degree3, degree3(d) or degree5_d1)");
}

struct Experiment {
    ExperimentConfig config;
    SystemSpec system;
    PayoffSpec payoff;
    CubatureFormula cubature;
    double gamma;

    explicit Experiment(ExperimentConfig cfg)
        : config(std::move(cfg)),
          system(parse_system(config.system, config.base_dir)),
          payoff(parse_payoff(config.payoff)),
          cubature(config.cubature_is_file ? from_file(config.cubature)
                                           : builtin_cubature(config.cubature, system.system.noise_dimension())),
          gamma(config.gamma.value_or(std::max(1.0, double(cubature.degree() - 1)))) {
        if (static_cast<int>(config.x0.size()) != system.system.state_dimension())
            throw LoadError("config.x0: expected " + std::to_string(system.system.state_dimension()) + " entries");
    }

    SolverOptions options() const {
        SolverOptions o;
        o.flow.substeps = config.substeps;
        o.leaf_cap = config.leaf_cap;
        o.threads = config.threads;
        o.samples = config.samples;
        o.seed = config.seed;
        return o;
    }

    Partition partition(int k) const { return gamma_partition(config.horizon, k, gamma); }

    SolverResult solve(int k) const {
        return klv_solve(cubature, system.system, payoff.fn, config.initial_state(), partition(k), config.mode,
                         options());
    }

    McEstimate monte_carlo() const {
        return euler_mc(system.system, payoff.fn, config.initial_state(), config.horizon, config.mc_steps,
                        config.mc_paths, config.seed, config.threads);
    }
};

struct ConvergeRow {
    int k;
    double value;
    double abs_error;
    double standard_error;
    std::uint64_t leaves;
    std::vector<double> gaps;
};

struct ConvergeReport {
    std::vector<ConvergeRow> rows;
    double reference = 0.0;
    std::string reference_source;
    double reference_standard_error = 0.0;
    std::optional<SlopeFit> fit;
    std::string fit_error;
    nlohmann::json config;
    int degree = 0;
    double gamma = 0.0;

    std::string csv() const {
        std::string out = "k,value,reference,abs_error\n";
        for (const auto& r : rows)
            out += std::to_string(r.k) + "," + format_double(r.value) + "," + format_double(reference) + "," +
                   format_double(r.abs_error) + "\n";
        return out;
    }

    nlohmann::json summary() const {
        nlohmann::json j{{"config", config},
                         {"cubature_degree", degree},
                         {"gamma", gamma},
                         {"reference", reference},
                         {"reference_source", reference_source},
                         {"reference_standard_error", reference_standard_error},
                         {"expected_slope", -(degree - 1) / 2.0}};
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& r : rows)
            rs.push_back({{"k", r.k},
                          {"value", r.value},
                          {"abs_error", r.abs_error},
                          {"standard_error", r.standard_error},
                          {"leaves", r.leaves},
                          {"gaps", r.gaps}});
        j["rows"] = rs;
        if (fit) {
            j["slope"] = fit->slope;
            j["slope_standard_error"] = fit->standard_error;
            j["slope_points"] = fit->points;
            j["warnings"] = fit->warnings;
        } else {
            j["slope"] = nullptr;
            j["warnings"] = nlohmann::json::array({fit_error});
        }
        return j;
    }
};

/// Sweeps k over the configured list against a closed-form reference when one exists,
/// else an Euler-Maruyama estimate.
inline ConvergeReport run_converge(const ExperimentConfig& cfg) {
    const Experiment ex(cfg);
    ConvergeReport rep;
    rep.config = cfg.to_json();
    rep.degree = ex.cubature.degree();
    rep.gamma = ex.gamma;
    if (auto exact = closed_form_reference(ex.system, ex.payoff, cfg.initial_state(), cfg.horizon)) {
        rep.reference = *exact;
        rep.reference_source = "closed_form";
    } else {
        const McEstimate mc = ex.monte_carlo();
        rep.reference = mc.mean;
        rep.reference_standard_error = mc.standard_error;
        rep.reference_source = "euler_mc(steps=" + std::to_string(mc.steps) + ",paths=" + std::to_string(mc.paths) +
                               ",seed=" + std::to_string(cfg.seed) + ")";
    }
    std::vector<std::pair<double, double>> pairs;
    for (int k : cfg.k_list) {
        const SolverResult r = ex.solve(k);
        ConvergeRow row{k, r.value, std::abs(r.value - rep.reference), r.standard_error, r.leaves_evaluated,
                        ex.partition(k).gaps()};
        pairs.emplace_back(double(k), row.abs_error);
        rep.rows.push_back(std::move(row));
    }
    try {
        rep.fit = fit_slope(pairs);
    } catch (const DomainError& e) {
        rep.fit_error = e.what();
    }
    return rep;
}

struct LemmaGapRow {
    double s;
    double gap;
    double bound;
};

struct LemmaGapReport {
    int degree = 0;
    std::uint64_t seed = 0;
    std::vector<LemmaGapRow> rows;
    SlopeFit fit;
    double threshold = 0.0;

    bool passed() const { return fit.slope >= threshold; }
    bool bound_holds() const {
        for (const auto& r : rows)
            if (r.gap > r.bound) return false;
        return true;
    }

    std::string csv() const {
        std::string out = "s,gap,bound\n";
        for (const auto& r : rows) out += format_double(r.s) + "," + format_double(r.gap) + "," + format_double(r.bound) + "\n";
        return out;
    }

    nlohmann::json summary() const {
        return {{"degree", degree},
                {"seed", seed},
                {"slope", fit.slope},
                {"slope_standard_error", fit.standard_error},
                {"threshold", threshold},
                {"passed", passed()},
                {"bound_holds", bound_holds()},
                {"box", "[-2,2]^2"}};
    }
};

/// Random two-field affine system on R^2 with a non-vanishing commutator, entries in [-0.5, 0.5].
inline VectorFieldSystem random_noncommuting_system(std::mt19937_64& rng) {
    auto u = [&] { return detail::unit_uniform(rng) - 0.5; };
    for (;;) {
        std::vector<VectorField> fields;
        for (int i = 0; i < 2; ++i) {
            Matrix a(2, 2);
            State b(2);
            for (int r = 0; r < 2; ++r) {
                b[r] = u();
                for (int c = 0; c < 2; ++c) a(r, c) = u();
            }
            fields.push_back(VectorField::affine(a, b));
        }
        const auto comm = bracket_field(fields[0], fields[1]).affine_map();
        if (comm.matrix.norm() + comm.offset.norm() > 0.05) return VectorFieldSystem(std::move(fields));
    }
}

/// Random Lie element of graded degree <= m over {0,1} without a bare e_0 term.
inline LiePolynomial random_lie_without_drift(int m, std::mt19937_64& rng) {
    GradedTensor t(1, m);
    std::vector<double> c(t.basis().size(), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i) c[i] = detail::unit_uniform(rng) - 0.5;
    c[*t.basis().index_of(Word{0})] = 0.0;
    return LiePolynomial::certify(lie_projection(GradedTensor(t.basis_ptr(), std::move(c))));
}

/// Random cubic in two variables with coefficients in [-1, 1].
inline MultiPoly random_cubic(std::mt19937_64& rng) {
    MultiPoly f(2);
    for (int a = 0; a <= 3; ++a)
        for (int b = 0; a + b <= 3; ++b) f.add_term({a, b}, 2.0 * detail::unit_uniform(rng) - 1.0);
    return f;
}

/// Flow-vs-tensor gap |f(Exp[Gamma <sqrt s, w>] x) - Gamma(pi_m exp <sqrt s, w>) f(x)| over s,
/// for a random system, Lie element, cubic f and x in [-1,1]^2, with the box bound on [-2,2]^2.
inline LemmaGapReport run_lemma_gap(int m, std::uint64_t seed, std::vector<double> s_grid = {0.4, 0.2, 0.1, 0.05}) {
    if (m < 1) throw RangeError("lemma-gap needs degree >= 1");
    std::mt19937_64 rng(seed);
    const VectorFieldSystem sys = random_noncommuting_system(rng);
    const LiePolynomial w = random_lie_without_drift(m, rng);
    const MultiPoly f = random_cubic(rng);
    State x(2);
    x << 2.0 * detail::unit_uniform(rng) - 1.0, 2.0 * detail::unit_uniform(rng) - 1.0;

    LemmaGapReport rep;
    rep.degree = m;
    rep.seed = seed;
    rep.threshold = (m + 1) / 2.0 - 0.3;
    std::vector<std::pair<double, double>> pairs;
    for (double s : s_grid) {
        const double gap = flow_tensor_gap(w, sys, f, x, s);
        const double bound = flow_tensor_gap_bound(w.dilated(std::sqrt(s)), sys, f, 2.0);
        rep.rows.push_back({s, gap, bound});
        pairs.emplace_back(s, gap);
    }
    rep.fit = fit_slope(pairs);
    return rep;
}

}  // namespace klv
