#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "llmcal/backend.hpp"
#include "llmcal/metrics.hpp"
#include "llmcal/prompting.hpp"
#include "llmcal/types.hpp"

namespace llmcal {

struct RunOptions {
    InferenceMode mode = InferenceMode::Independent;
    int shots = 0;
    DecodeStrategy decode = DecodeStrategy::FirstToken;
    bool normalize_extraction = false;  // default raw, as extracted
    int parallelism = 1;
    int target_position = 1;
    int j_sets = 1;  // comparative reference sets evaluated per sample
    // One reference set per (replicate, j) shared across samples, instead of
    // per-(replicate, sample, j) draws.
    bool fixed_refs_per_replicate = false;
    int max_attempts = 4;
    int backoff_base_ms = 250;
};

struct EvaluationRun {
    std::vector<PredictionRecord> records;  // j = 1 view
    std::map<int, std::vector<PredictionRecord>> per_reference_runs;  // keys 1..J when retained
    ConditionTag condition;
    ExperimentConfig config;
    LabelSpace label_space;
    std::string backend;
    std::string decode;           // "first_token" | "per_label"
    std::string extraction_mode;  // "raw" | "normalized"
    long n_failures = 0;
};

// Records with no failure tag; the metric denominator.
std::vector<PredictionRecord> ok_records(const std::vector<PredictionRecord>& records);

EvaluationRun run_condition(const DatasetSplits& splits, const TaskTemplate& tmpl,
                            const LabelSpace& space, Backend& backend, const RunOptions& options,
                            const ExperimentConfig& config, std::uint64_t replicate_seed);

// Element-wise mean of per-reference probability vectors; argmax recomputed.
std::vector<PredictionRecord> aggregate_comparative(
    const std::map<int, std::vector<PredictionRecord>>& per_reference_runs);

struct PositionAccuracy {
    int position = 1;
    double accuracy = 0.0;
    long n = 0;
    long failures = 0;
};

std::vector<PositionAccuracy> position_decay_diagnostic(const DatasetSplits& splits,
                                                        const TaskTemplate& tmpl,
                                                        const LabelSpace& space, Backend& backend,
                                                        const RunOptions& options,
                                                        const ExperimentConfig& config,
                                                        std::uint64_t replicate_seed);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;
    long n_defined = 0;
};

struct ReplicateSummary {
    std::map<std::string, MetricSummary> metrics;
    int n_replicates = 0;
    bool single_replicate = false;
};

std::map<std::string, MetricValue> metric_map(const CalibrationReport& report);

ReplicateSummary summarize_reports(const std::vector<CalibrationReport>& reports);

using RunFactory = std::function<CalibrationReport(std::uint64_t replicate_seed, int replicate)>;

ReplicateSummary replicate_and_summarize(const RunFactory& factory, int n_replicates,
                                         std::uint64_t master_seed);

}  // namespace llmcal
