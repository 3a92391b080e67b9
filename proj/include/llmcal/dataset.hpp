#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmcal/types.hpp"

namespace llmcal {

struct LabelSpaceViolation {
    std::string label;
    std::string message;
};

// Returns every violated LabelSpace invariant; empty list means valid.
std::vector<LabelSpaceViolation> validate_label_space(const LabelSpace& space);

void require_valid(const LabelSpace& space);

// Loads a JSONL dataset ({"text": ..., "label": ...} per line) and splits it
// into test / validation / reference_pool / demo_pool by a single seeded
// shuffle followed by contiguous slicing, in that order.
DatasetSplits load_dataset(const std::string& path, const LabelSpace& space,
                           const ExperimentConfig& config, std::uint64_t rng_seed);

// Split logic on in-memory samples; load_dataset delegates here.
DatasetSplits split_samples(std::vector<Sample> samples, const ExperimentConfig& config,
                            std::uint64_t rng_seed);

}  // namespace llmcal
