#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cubature.hpp"
#include "harness.hpp"
#include "path.hpp"
#include "tensor_json.hpp"

namespace klv::cli {

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2 };

namespace detail {

/// Usage problems that CLI11 cannot see (missing --config, bad combinations).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

inline void write_file(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw LoadError("cannot write " + file.string());
    out << text;
}

/// "builtin:<name>" or a cubature JSON file.
inline CubatureFormula load_formula(const std::string& source) {
    const std::string prefix = "builtin:";
    if (source.rfind(prefix, 0) == 0) return builtin_cubature(source.substr(prefix.size()), 1);
    return from_file(source);
}

}  // namespace detail

/// Entry point for the klv command-line tool. Output goes to `out`; every failure prints a
/// single "error: <kind>: <reason>" line on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Cubature-on-Wiener-space weak approximation of SDEs"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_file, out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::optional<double> tol;
    app.add_option("--config", config_file, "experiment config (JSON)");
    app.add_option("--out", out_dir, "directory for CSV/JSON artifacts");
    app.add_option("--seed", seed, "random seed, overrides the config");
    app.add_option("--threads", threads, "worker threads (default: $KLV_THREADS or all cores)");
    app.add_option("--tol", tol, "tolerance for validation");

    auto* validate_cmd = app.add_subcommand("validate-cubature", "check a formula against the expected signature");
    std::string source;
    std::optional<int> degree;
    std::string emit;
    validate_cmd->add_option("source", source, "cubature JSON file or builtin:<name>")->required();
    validate_cmd->add_option("--degree", degree, "graded degree to check (default: the formula's)");
    validate_cmd->add_option("--emit", emit, "also write the formula as JSON");

    auto* expected_cmd = app.add_subcommand("expected-signature", "print E S(B)_{0,T} as JSON");
    int dim = 1, trunc = 3;
    double horizon = 1.0;
    expected_cmd->add_option("--dim", dim, "Brownian dimension d")->check(CLI::PositiveNumber);
    expected_cmd->add_option("--degree", trunc, "truncation m")->check(CLI::PositiveNumber);
    expected_cmd->add_option("--horizon", horizon, "time horizon T")->check(CLI::PositiveNumber);

    auto* solve_cmd = app.add_subcommand("solve", "one cubature-tree run");
    std::optional<int> solve_k;
    solve_cmd->add_option("--k", solve_k, "number of steps (default: last of k_list)")->check(CLI::PositiveNumber);

    auto* converge_cmd = app.add_subcommand("converge", "error against k with a fitted rate");
    std::vector<double> expect_slope;
    converge_cmd->add_option("--expect-slope", expect_slope, "fail unless lo <= slope <= hi")->expected(2)->delimiter(',');

    auto* mc_cmd = app.add_subcommand("mc-reference", "Euler-Maruyama Monte Carlo estimate");
    std::optional<int> mc_steps;
    std::optional<std::uint64_t> mc_paths;
    mc_cmd->add_option("--steps", mc_steps, "time steps per path")->check(CLI::PositiveNumber);
    mc_cmd->add_option("--paths", mc_paths, "number of paths")->check(CLI::PositiveNumber);

    auto* gap_cmd = app.add_subcommand("lemma-gap", "flow-vs-tensor gap rate on a random affine system");
    int gap_degree = 3;
    gap_cmd->add_option("--degree", gap_degree, "truncation m")->check(CLI::Range(1, 6));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << detail::one_line(e.what()) << '\n';
        return kUsage;
    }

    auto load_config = [&]() {
        if (config_file.empty()) throw detail::UsageError("--config is required");
        ExperimentConfig c = ExperimentConfig::from_file(config_file);
        if (seed) c.seed = *seed;
        c.threads = threads;
        if (!out_dir.empty()) c.out_dir = out_dir;
        return c;
    };

    try {
        if (*validate_cmd) {
            const CubatureFormula q = detail::load_formula(source);
            const int m = degree.value_or(q.degree());
            const ValidationReport r = validate(q, m, tol.value_or(kDefaultCubatureTolerance), threads);
            out << "word,expected,computed,defect\n";
            for (const auto& row : r.rows)
                out << row.word.to_string() << ',' << format_double(row.expected) << ','
                    << format_double(row.computed) << ',' << format_double(row.defect) << '\n';
            out << "# degree=" << m << " max_defect=" << format_double(r.max_defect)
                << " worst_word=" << r.worst_word.to_string() << " tolerance=" << format_double(r.tolerance)
                << " result=" << (r.passed ? "PASS" : "FAIL") << '\n';
            if (!emit.empty()) detail::write_file(emit, cubature_to_json(q).dump(2) + "\n");
            if (!out_dir.empty())
                detail::write_file(std::filesystem::path(out_dir) / "validation.json",
                                   nlohmann::json{{"degree", m},
                                                  {"max_defect", r.max_defect},
                                                  {"worst_word", r.worst_word.to_string()},
                                                  {"tolerance", r.tolerance},
                                                  {"passed", r.passed}}
                                           .dump(2) +
                                       "\n");
            if (!r.passed) {
                err << "error: validation: defect " << format_double(r.max_defect) << " at word "
                    << r.worst_word.to_string() << " exceeds " << format_double(r.tolerance) << '\n';
                return kFailed;
            }
            return kOk;
        }

        if (*expected_cmd) {
            out << tensor_to_json(brownian_expected_signature(dim, trunc, horizon)).dump(2) << '\n';
            return kOk;
        }

        if (*solve_cmd) {
            const ExperimentConfig cfg = load_config();
            const Experiment ex(cfg);
            const int k = solve_k.value_or(cfg.k_list.back());
            const SolverResult r = ex.solve(k);
            nlohmann::json j{{"k", k},
                             {"value", r.value},
                             {"mode", to_string(r.mode)},
                             {"leaves_evaluated", r.leaves_evaluated},
                             {"partition", r.partition},
                             {"gamma", ex.gamma},
                             {"compensation", r.compensation},
                             {"min_leaf", r.min_leaf},
                             {"max_leaf", r.max_leaf},
                             {"standard_error", r.standard_error}};
            if (auto exact = closed_form_reference(ex.system, ex.payoff, cfg.initial_state(), cfg.horizon)) {
                j["reference"] = *exact;
                j["abs_error"] = std::abs(r.value - *exact);
            }
            const std::string text = j.dump(2) + "\n";
            out << text;
            if (!cfg.out_dir.empty()) detail::write_file(cfg.out_dir / "solve.json", text);
            return kOk;
        }

        if (*converge_cmd) {
            const ExperimentConfig cfg = load_config();
            const ConvergeReport rep = run_converge(cfg);
            const std::string csv = rep.csv();
            out << csv;
            if (!cfg.out_dir.empty()) {
                detail::write_file(cfg.out_dir / "converge.csv", csv);
                detail::write_file(cfg.out_dir / "converge.json", rep.summary().dump(2) + "\n");
            }
            if (!expect_slope.empty()) {
                if (!rep.fit) {
                    err << "error: assertion: no slope could be fitted: " << detail::one_line(rep.fit_error) << '\n';
                    return kFailed;
                }
                if (rep.fit->slope < expect_slope[0] || rep.fit->slope > expect_slope[1]) {
                    err << "error: assertion: fitted slope " << format_double(rep.fit->slope) << " outside ["
                        << format_double(expect_slope[0]) << ", " << format_double(expect_slope[1]) << "]\n";
                    return kFailed;
                }
            }
            return kOk;
        }

        if (*mc_cmd) {
            ExperimentConfig cfg = load_config();
            if (mc_steps) cfg.mc_steps = *mc_steps;
            if (mc_paths) cfg.mc_paths = *mc_paths;
            const Experiment ex(cfg);
            const McEstimate mc = ex.monte_carlo();
            nlohmann::json j{{"mean", mc.mean},
                             {"standard_error", mc.standard_error},
                             {"steps", mc.steps},
                             {"paths", mc.paths},
                             {"seed", cfg.seed}};
            if (auto exact = closed_form_reference(ex.system, ex.payoff, cfg.initial_state(), cfg.horizon))
                j["closed_form"] = *exact;
            const std::string text = j.dump(2) + "\n";
            out << text;
            if (!cfg.out_dir.empty()) detail::write_file(cfg.out_dir / "mc_reference.json", text);
            return kOk;
        }

        if (*gap_cmd) {
            const LemmaGapReport rep = run_lemma_gap(gap_degree, seed.value_or(1));
            out << rep.csv();
            if (!out_dir.empty()) {
                detail::write_file(std::filesystem::path(out_dir) / "lemma_gap.csv", rep.csv());
                detail::write_file(std::filesystem::path(out_dir) / "lemma_gap.json", rep.summary().dump(2) + "\n");
            }
            if (!rep.passed()) {
                err << "error: assertion: gap slope " << format_double(rep.fit.slope) << " below "
                    << format_double(rep.threshold) << '\n';
                return kFailed;
            }
            return kOk;
        }
    } catch (const detail::UsageError& e) {
        err << "error: usage: " << detail::one_line(e.what()) << '\n';
        return kUsage;
    } catch (const LoadError& e) {
        err << "error: input: " << detail::one_line(e.what()) << '\n';
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        // Type errors inside config or formula files.
        err << "error: input: " << detail::one_line(e.what()) << '\n';
        return kUsage;
    } catch (const LeafCapExceeded& e) {
        err << "error: leaf_cap: " << detail::one_line(e.what()) << '\n';
        return kFailed;
    } catch (const DivergenceError& e) {
        err << "error: divergence: " << detail::one_line(e.what()) << '\n';
        return kFailed;
    } catch (const std::exception& e) {
        err << "error: runtime: " << detail::one_line(e.what()) << '\n';
        return kFailed;
    }
    return kUsage;
}

}  // namespace klv::cli
