#pragma once

#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "tensor.hpp"

namespace klv {

/// {dimension, truncation, terms: [{word: [...], coeff}]}; only nonzero terms are written.
inline nlohmann::json tensor_to_json(const GradedTensor& t) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [w, c] : t.terms()) {
        nlohmann::json letters = nlohmann::json::array();
        for (Letter l : w.letters()) letters.push_back(static_cast<int>(l));
        terms.push_back({{"word", letters}, {"coeff", c}});
    }
    return {{"dimension", t.dimension()}, {"truncation", t.truncation()}, {"terms", terms}};
}

/// Parses the tensor format; `where` prefixes error messages with the document location.
inline GradedTensor tensor_from_json(const nlohmann::json& j, const std::string& where = "tensor") {
    try {
        const int d = j.at("dimension").get<int>();
        const int m = j.at("truncation").get<int>();
        if (d < 0 || m < 0) throw LoadError(where + ": dimension and truncation must be non-negative");
        std::vector<std::pair<Word, double>> terms;
        const auto& arr = j.at("terms");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Word w;
            for (int l : arr[i].at("word").get<std::vector<int>>()) {
                if (l < 0 || l > d)
                    throw LoadError(where + ".terms[" + std::to_string(i) + "]: letter " + std::to_string(l) +
                                    " outside [0," + std::to_string(d) + "]");
                w.push_back(l);
            }
            if (w.graded_degree() > m)
                throw LoadError(where + ".terms[" + std::to_string(i) + "]: word " + w.to_string() +
                                " exceeds truncation " + std::to_string(m));
            terms.emplace_back(std::move(w), arr[i].at("coeff").get<double>());
        }
        return GradedTensor::from_terms(d, m, terms);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(where + ": " + e.what());
    }
}

}  // namespace klv
