#pragma once

#include <string>
#include <vector>

#include "llmcal/types.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(LLMCAL_SOURCE_DIR) + "/tests/fixtures/" + name;
}

// Two-label record with the given confidence on the predicted label.
inline llmcal::PredictionRecord rec2(double confidence, bool correct, int true_label = 0) {
    const int predicted = correct ? true_label : 1 - true_label;
    std::vector<double> probs(2, 0.0);
    probs[predicted] = confidence;
    probs[1 - predicted] = confidence >= 0.5 ? 1.0 - confidence : confidence * 0.5;
    llmcal::PredictionRecord r;
    r.sample_id = "r";
    r.estimate = llmcal::make_estimate(std::move(probs), confidence >= 0.5);
    r.true_label = true_label;
    return r;
}

inline llmcal::LabelSpace binary_space() {
    llmcal::LabelSpace s;
    s.labels = {"Positive", "Negative"};
    s.token_variants = {{"Positive", "Pos"}, {"Negative", "Neg"}};
    return s;
}

inline llmcal::LabelSpace trec_space() {
    llmcal::LabelSpace s;
    s.labels = {"Abbreviation", "Entity",   "Description and abstract concept",
                "Human being",  "Location", "Numeric value"};
    for (const auto& name : s.labels) s.token_variants.push_back({name.substr(0, name.find(' '))});
    return s;
}

}  // namespace testutil
