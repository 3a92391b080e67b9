#pragma once

#include <string>
#include <vector>

#include "llmcal/types.hpp"

namespace llmcal {

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
    long count = 0;
    bool empty = true;
};

struct ReliabilityDiagram {
    std::vector<ReliabilityBin> bins;
    int n_bins = 0;
    long n = 0;
};

// A metric that may be undefined (e.g. no incorrect predictions to compare
// against); undefined values carry a reason code instead of NaN.
struct MetricValue {
    bool defined = false;
    double value = 0.0;
    std::string reason;  // "ONE_SIDED", ... when undefined

    static MetricValue ok(double v) { return {true, v, ""}; }
    static MetricValue undefined(std::string why) { return {false, 0.0, std::move(why)}; }
};

struct MacroCeResult {
    MetricValue ice_pos;
    MetricValue ice_neg;
    MetricValue macro_ce;
    long n_correct = 0;
    long n_incorrect = 0;
};

struct CalibrationReport {
    double ece = 0.0;
    double ice = 0.0;
    MetricValue ice_pos;
    MetricValue ice_neg;
    MetricValue macro_ce;
    MetricValue dkl;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    long n = 0;
    long n_correct = 0;
    long n_incorrect = 0;
};

ReliabilityDiagram bin_predictions(const std::vector<PredictionRecord>& records, int n_bins);

double ece(const ReliabilityDiagram& diagram);

double ice(const std::vector<PredictionRecord>& records);

MacroCeResult macro_ce(const std::vector<PredictionRecord>& records);

// Smoothed-histogram KL from the correct-prediction confidence distribution to
// the incorrect one; natural log.
MetricValue dkl(const std::vector<PredictionRecord>& records, int dkl_bins, double smoothing);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records, int k);

// Full report with the default metric set.
CalibrationReport compute_report(const std::vector<PredictionRecord>& records, int k,
                                 const ExperimentConfig& config);

}  // namespace llmcal
