#pragma once

#include <cstdint>
#include <vector>

#include "llmcal/types.hpp"

namespace llmcal {

enum class AccuracyProfile {
    Indiscriminate,  // correctness independent of confidence
    Conventional,    // correctness probability tied to the confidence bin
};

struct ConfidenceDist {
    double mean = 0.7;           // in (0,1)
    double concentration = 10.0; // > 0; Beta(mean*c, (1-mean)*c)
};

struct ScenarioSpec {
    long n = 0;
    ConfidenceDist correct_conf;
    ConfidenceDist incorrect_conf;
    AccuracyProfile profile = AccuracyProfile::Indiscriminate;
    double p_correct = 0.5;                 // Indiscriminate
    std::vector<double> per_bin_accuracy;   // Conventional; equal-width bins over [0,1]
    std::uint64_t seed = 0;
};

// Synthesizes two-label prediction records with the requested miscalibration
// shape. Confidences are Beta draws; records satisfy the estimate invariants
// (raw mode when the drawn confidence is below 1/2).
std::vector<PredictionRecord> generate_scenario(const ScenarioSpec& spec);

struct MatchedPair {
    std::vector<PredictionRecord> records_a;
    std::vector<PredictionRecord> records_b;
    ScenarioSpec tuned_a;
    ScenarioSpec tuned_b;
    double ece_gap = 0.0;
    double accuracy_gap = 0.0;
};

// Tunes spec_b's accuracy parameters (and spec_a's p_correct) by bounded
// bisection until both populations agree on ECE and accuracy within
// target_tolerance.
MatchedPair match_ece_pair(const ScenarioSpec& spec_a, const ScenarioSpec& spec_b,
                           double target_tolerance, int n_bins = 10);

}  // namespace llmcal
