#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "solver.hpp"
#include "vector_fields.hpp"

namespace klv {

/// A named built-in model or an affine system read from file.
struct SystemSpec {
    std::string kind;  // "gbm", "ou" or "affine"
    std::vector<double> params;
    VectorFieldSystem system;
};

struct PayoffSpec {
    std::string kind;  // "identity", "square", "exp", "softplus", "component"
    std::vector<double> params;
    Payoff fn;
};

namespace detail {

/// Splits "name(a,b)" into name and raw argument strings.
inline std::pair<std::string, std::vector<std::string>> split_call(const std::string& text) {
    static const std::regex call(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, call)) throw LoadError("cannot parse '" + text + "'");
    std::vector<std::string> args;
    if (m[2].matched) {
        std::string rest = m[2].str();
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = rest.find(',', start);
            std::string a = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            a.erase(0, a.find_first_not_of(" \t"));
            a.erase(a.find_last_not_of(" \t") + 1);
            if (!a.empty()) args.push_back(a);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return {m[1].str(), args};
}

inline std::vector<double> numeric_args(const std::string& text, const std::vector<std::string>& args,
                                        std::size_t expected) {
    if (args.size() != expected)
        throw LoadError("'" + text + "' takes " + std::to_string(expected) + " argument(s)");
    std::vector<double> out;
    for (const auto& a : args) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(a, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != a.size() || !std::isfinite(v)) throw LoadError("'" + text + "': bad number '" + a + "'");
        out.push_back(v);
    }
    return out;
}

inline Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }
inline State scalar_state(double v) { return State::Constant(1, v); }

}  // namespace detail

/// Affine system file: {"state_dimension": N, "fields": [{"matrix": [[..]..], "offset": [..]}, ...]},
/// fields[0] being the drift.
inline VectorFieldSystem affine_system_from_json(const nlohmann::json& j, const std::string& where) {
    try {
        const int n = j.at("state_dimension").get<int>();
        if (n < 1) throw LoadError(where + ".state_dimension: must be >= 1");
        const auto& fields = j.at("fields");
        if (!fields.is_array() || fields.size() < 2) throw LoadError(where + ".fields: need a drift and >= 1 diffusion");
        std::vector<VectorField> out;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const std::string at = where + ".fields[" + std::to_string(i) + "]";
            const auto rows = fields[i].at("matrix").get<std::vector<std::vector<double>>>();
            const auto offset = fields[i].at("offset").get<std::vector<double>>();
            if (rows.size() != static_cast<std::size_t>(n) || offset.size() != static_cast<std::size_t>(n))
                throw LoadError(at + ": expected " + std::to_string(n) + " rows and offsets");
            Matrix a(n, n);
            for (int r = 0; r < n; ++r) {
                if (rows[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(n))
                    throw LoadError(at + ".matrix[" + std::to_string(r) + "]: expected " + std::to_string(n) + " entries");
                for (int c = 0; c < n; ++c) a(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
            out.push_back(VectorField::affine(std::move(a), Eigen::Map<const State>(offset.data(), n)));
        }
        return VectorFieldSystem(std::move(out));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(where + ": " + e.what());
    }
}

/// Parses "gbm(mu,sigma)", "ou(theta,sigma)" or "affine(path)". Relative paths resolve against base_dir.
/// gbm: dX = mu X dt + sigma X o dB; ou: dX = -theta X dt + sigma dB (both Stratonovich, d = N = 1).
inline SystemSpec parse_system(const std::string& text, const std::filesystem::path& base_dir = {}) {
    auto [name, args] = detail::split_call(text);
    if (name == "gbm") {
        auto p = detail::numeric_args(text, args, 2);
        return {name, p,
                VectorFieldSystem({VectorField::affine(detail::scalar_matrix(p[0]), detail::scalar_state(0.0)),
                                   VectorField::affine(detail::scalar_matrix(p[1]), detail::scalar_state(0.0))})};
    }
    if (name == "ou") {
        auto p = detail::numeric_args(text, args, 2);
        return {name, p,
                VectorFieldSystem({VectorField::affine(detail::scalar_matrix(-p[0]), detail::scalar_state(0.0)),
                                   VectorField::affine(detail::scalar_matrix(0.0), detail::scalar_state(p[1]))})};
    }
    if (name == "affine") {
        if (args.size() != 1) throw LoadError("'" + text + "' takes a file name");
        std::filesystem::path file = args[0];
        if (file.is_relative()) file = base_dir / file;
        std::ifstream in(file);
        if (!in) throw LoadError("cannot open system file " + file.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(file.string() + ": " + e.what());
        }
        return {name, {}, affine_system_from_json(j, file.string())};
    }
    throw LoadError("unknown system '" + name + "' (expected gbm, ou or affine)");
}

/// Parses "identity", "square", "exp", "component(i)" or "softplus(K,beta)"; all act on
/// component 0 unless stated.
inline PayoffSpec parse_payoff(const std::string& text) {
    auto [name, args] = detail::split_call(text);
    if (name == "identity") {
        detail::numeric_args(text, args, 0);
        return {name, {}, [](const State& x) { return x[0]; }};
    }
    if (name == "square") {
        detail::numeric_args(text, args, 0);
        return {name, {}, [](const State& x) { return x[0] * x[0]; }};
    }
    if (name == "exp") {
        detail::numeric_args(text, args, 0);
        return {name, {}, [](const State& x) { return std::exp(x[0]); }};
    }
    if (name == "component") {
        auto p = detail::numeric_args(text, args, 1);
        if (p[0] < 0 || p[0] != std::floor(p[0])) throw LoadError("component index must be a non-negative integer");
        const auto i = static_cast<Eigen::Index>(p[0]);
        return {name, p, [i](const State& x) {
                    if (i >= x.size()) throw RangeError("payoff component out of range");
                    return x[i];
                }};
    }
    if (name == "softplus") {
        // Smooth call payoff log(1 + e^{beta (x - K)}) / beta.
        auto p = detail::numeric_args(text, args, 2);
        if (!(p[1] > 0.0)) throw LoadError("softplus sharpness must be > 0");
        const double strike = p[0], beta = p[1];
        return {name, p, [strike, beta](const State& x) {
                    const double z = beta * (x[0] - strike);
                    return (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) / beta;
                }};
    }
    throw LoadError("unknown payoff '" + name + "'");
}

/// E f(X_T^x) in closed form where available.
inline std::optional<double> closed_form_reference(const SystemSpec& sys, const PayoffSpec& f, const State& x,
                                                   double horizon) {
    if (x.size() != 1) return std::nullopt;
    const double x0 = x[0], t = horizon;
    const bool first = f.kind == "identity" || (f.kind == "component" && f.params[0] == 0.0);
    if (sys.kind == "gbm") {
        // X_T = x exp(mu T + sigma B_T).
        const double mu = sys.params[0], sigma = sys.params[1];
        if (first) return x0 * std::exp((mu + 0.5 * sigma * sigma) * t);
        if (f.kind == "square") return x0 * x0 * std::exp((2.0 * mu + 2.0 * sigma * sigma) * t);
    }
    if (sys.kind == "ou") {
        const double theta = sys.params[0], sigma = sys.params[1];
        const double mean = x0 * std::exp(-theta * t);
        const double var = theta == 0.0 ? sigma * sigma * t
                                        : sigma * sigma * -std::expm1(-2.0 * theta * t) / (2.0 * theta);
        if (first) return mean;
        if (f.kind == "square") return mean * mean + var;
    }
    return std::nullopt;
}

}  // namespace klv
