#pragma once

#include <map>
#include <string>
#include <vector>

#include "llmcal/types.hpp"

namespace llmcal {

enum class CalibratorKind { Temperature, Vector, Matrix };

std::string kind_name(CalibratorKind kind);
CalibratorKind kind_from_name(const std::string& name);

// softmax(W p + b) on probability vectors. For temperature, W = (1/T) I and
// b = 0; for vector, W is diagonal.
struct AffineCalibrator {
    CalibratorKind kind = CalibratorKind::Vector;
    int k = 0;
    std::vector<double> weight;  // row-major K x K
    std::vector<double> bias;    // K
    double temperature = 1.0;    // only meaningful for the temperature kind

    static AffineCalibrator identity(CalibratorKind kind, int k);
};

struct ComparativeCalibrator {
    std::map<int, AffineCalibrator> per_reference;  // keys 1..J
};

struct FitConfig {
    int max_iters = 500;
    double learning_rate = 0.1;
    double tolerance = 1e-7;
    double l2_weight = 0.0;
};

ProbabilityEstimate apply_affine(const AffineCalibrator& cal, const ProbabilityEstimate& est);

// Cross-entropy (+ optional L2 pull toward identity) and its analytic
// gradient in the kind's free parameters. Exposed so finite-difference checks
// can hit it directly.
struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_weight;  // K x K; diagonal-only content for vector kind
    std::vector<double> grad_bias;    // K
    double grad_temperature = 0.0;
};

LossGrad loss_and_gradient(const AffineCalibrator& cal,
                           const std::vector<ProbabilityEstimate>& estimates,
                           const std::vector<int>& labels, double l2_weight);

struct FitResult {
    AffineCalibrator calibrator;
    std::vector<double> loss_trace;  // accepted losses, starting at the identity
    std::string warning;
};

FitResult fit_affine(const std::vector<ProbabilityEstimate>& estimates,
                     const std::vector<int>& labels, CalibratorKind kind, const FitConfig& cfg);

struct ReferenceFitData {
    std::vector<ProbabilityEstimate> estimates;
    std::vector<int> labels;
};

ComparativeCalibrator fit_comparative(const std::map<int, ReferenceFitData>& per_reference,
                                      CalibratorKind kind, const FitConfig& cfg);

// softmax( sum_j (W_j p_j + b_j) ): one softmax after the sum.
ProbabilityEstimate apply_comparative(const ComparativeCalibrator& cal,
                                      const std::map<int, ProbabilityEstimate>& per_reference);

std::vector<double> softmax(const std::vector<double>& z);

}  // namespace llmcal
