#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace llmcal {

// Ordered label names plus the surface tokens that count as each label.
struct LabelSpace {
    std::vector<std::string> labels;
    std::vector<std::vector<std::string>> token_variants;

    int k() const { return static_cast<int>(labels.size()); }
};

struct Sample {
    std::string id;
    std::string text;
    std::optional<int> label;
};

struct DatasetSplits {
    std::vector<Sample> test;
    std::vector<Sample> validation;
    std::vector<Sample> reference_pool;
    std::vector<Sample> demo_pool;
};

// K-vector of label probabilities with its argmax and confidence.
// `normalized` distinguishes raw extracted mass (sum <= 1) from a proper
// distribution.
struct ProbabilityEstimate {
    std::vector<double> probs;
    bool normalized = false;
    int predicted = 0;
    double confidence = 0.0;
    bool degenerate = false;  // all-zero mass in raw mode
};

// Builds an estimate, recomputing predicted/confidence with lowest-index
// tie-break.
ProbabilityEstimate make_estimate(std::vector<double> probs, bool normalized,
                                  bool degenerate = false);

enum class InferenceMode { Independent, Comparative };

struct ConditionTag {
    InferenceMode mode = InferenceMode::Independent;
    int shots = 0;
    std::optional<int> reference_set_id;
    int target_position = 1;
    std::uint64_t replicate_seed = 0;
    bool aggregated = false;
};

struct PredictionRecord {
    std::string sample_id;
    ProbabilityEstimate estimate;
    int true_label = 0;
    ConditionTag condition;
    std::optional<std::string> failure;  // set when scoring/extraction failed
};

struct ExperimentConfig {
    int n_bins = 10;
    int n_references = 2;
    int aggregation_j = 10;
    int n_replicates = 10;
    int test_cap = 500;
    int val_cap = 200;
    int dkl_bins = 10;
    double dkl_smoothing = 1e-3;
    std::uint64_t master_seed = 0;
};

}  // namespace llmcal
