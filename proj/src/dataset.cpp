#include "llmcal/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "llmcal/errors.hpp"
#include "llmcal/rng.hpp"

namespace llmcal {

std::vector<LabelSpaceViolation> validate_label_space(const LabelSpace& space) {
    std::vector<LabelSpaceViolation> out;
    if (space.labels.size() < 2) {
        out.push_back({"", "label space needs at least 2 labels, got " +
                               std::to_string(space.labels.size())});
    }
    if (space.token_variants.size() != space.labels.size()) {
        out.push_back({"", "token_variants size does not match label count"});
        return out;
    }
    std::set<std::string> seen_names;
    for (const auto& name : space.labels) {
        if (!seen_names.insert(name).second) {
            out.push_back({name, "duplicate label name"});
        }
    }
    std::unordered_map<std::string, std::string> variant_owner;
    for (std::size_t i = 0; i < space.labels.size(); ++i) {
        if (space.token_variants[i].empty()) {
            out.push_back({space.labels[i], "empty token variant list"});
        }
        for (const auto& variant : space.token_variants[i]) {
            auto [it, inserted] = variant_owner.emplace(variant, space.labels[i]);
            if (!inserted && it->second != space.labels[i]) {
                out.push_back({space.labels[i],
                               "token variant '" + variant + "' shared with label '" +
                                   it->second + "'"});
            }
        }
    }
    return out;
}

void require_valid(const LabelSpace& space) {
    auto violations = validate_label_space(space);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid label space:";
        for (const auto& v : violations) msg << " [" << v.label << "] " << v.message << ";";
        throw Error(ErrorCode::Schema, msg.str());
    }
}

DatasetSplits split_samples(std::vector<Sample> samples, const ExperimentConfig& config,
                            std::uint64_t rng_seed) {
    const int total = static_cast<int>(samples.size());
    const int minimum = 2 + config.n_references;  // 1 test, 1 validation, refs
    if (total < minimum) {
        throw Error(ErrorCode::InsufficientData,
                    "dataset has " + std::to_string(total) + " samples; need at least " +
                        std::to_string(minimum));
    }
    {
        std::unordered_set<std::string> ids;
        for (const auto& s : samples) {
            if (!ids.insert(s.id).second) {
                throw Error(ErrorCode::Schema, "duplicate sample id: " + s.id);
            }
        }
    }

    Rng rng(derive_seed(rng_seed, "split"));
    rng.shuffle(samples);

    const int test_n = std::min(config.test_cap, total - 1 - config.n_references);
    const int val_n = std::min(config.val_cap, total - test_n - config.n_references);
    const int rem = total - test_n - val_n;
    // Reference pool always keeps enough for one comparative draw; the rest of
    // the remainder is split evenly with the demo pool.
    const int ref_n = std::min(rem, std::max(config.n_references, (rem + 1) / 2));
    const int demo_n = rem - ref_n;

    DatasetSplits splits;
    auto take = [&](int offset, int count) {
        return std::vector<Sample>(samples.begin() + offset, samples.begin() + offset + count);
    };
    splits.test = take(0, test_n);
    splits.validation = take(test_n, val_n);
    splits.reference_pool = take(test_n + val_n, ref_n);
    splits.demo_pool = take(test_n + val_n + ref_n, demo_n);
    return splits;
}

DatasetSplits load_dataset(const std::string& path, const LabelSpace& space,
                           const ExperimentConfig& config, std::uint64_t rng_seed) {
    require_valid(space);
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open dataset: " + path);

    std::unordered_map<std::string, int> label_index;
    for (int i = 0; i < space.k(); ++i) label_index[space.labels[i]] = i;

    std::vector<Sample> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Schema,
                        "line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!row.contains("text") || !row["text"].is_string() || !row.contains("label") ||
            !row["label"].is_string()) {
            throw Error(ErrorCode::Schema, "line " + std::to_string(line_no) +
                                               ": expected string fields 'text' and 'label'");
        }
        const std::string label_name = row["label"].get<std::string>();
        auto it = label_index.find(label_name);
        if (it == label_index.end()) {
            throw Error(ErrorCode::Schema, "line " + std::to_string(line_no) +
                                               ": unknown label '" + label_name + "'");
        }
        Sample s;
        s.id = row.contains("id") && row["id"].is_string() ? row["id"].get<std::string>()
                                                           : "line-" + std::to_string(line_no);
        s.text = row["text"].get<std::string>();
        s.label = it->second;
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw Error(ErrorCode::Schema, "dataset is empty: " + path);
    return split_samples(std::move(samples), config, rng_seed);
}

}  // namespace llmcal
