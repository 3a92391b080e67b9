#include "llmcal/posthoc.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "llmcal/errors.hpp"

namespace llmcal {

namespace {

constexpr double kMinTemperature = 1e-6;

void require_normalized(const ProbabilityEstimate& est) {
    if (!est.normalized) {
        throw Error(ErrorCode::Argument, "calibrators take normalized estimates; renormalize first");
    }
}

std::vector<double> affine_logits(const AffineCalibrator& cal, const std::vector<double>& p) {
    if (static_cast<int>(p.size()) != cal.k) {
        throw Error(ErrorCode::Argument, "estimate dimension does not match calibrator K");
    }
    std::vector<double> z(cal.k, 0.0);
    for (int r = 0; r < cal.k; ++r) {
        double acc = cal.bias[r];
        for (int c = 0; c < cal.k; ++c) acc += cal.weight[r * cal.k + c] * p[c];
        z[r] = acc;
    }
    return z;
}

// packs the kind's free parameters for the GD loop
std::vector<double> pack(const AffineCalibrator& cal) {
    switch (cal.kind) {
        case CalibratorKind::Temperature:
            return {cal.temperature};
        case CalibratorKind::Vector: {
            std::vector<double> theta(2 * cal.k);
            for (int i = 0; i < cal.k; ++i) theta[i] = cal.weight[i * cal.k + i];
            for (int i = 0; i < cal.k; ++i) theta[cal.k + i] = cal.bias[i];
            return theta;
        }
        case CalibratorKind::Matrix: {
            std::vector<double> theta(cal.k * cal.k + cal.k);
            std::copy(cal.weight.begin(), cal.weight.end(), theta.begin());
            std::copy(cal.bias.begin(), cal.bias.end(), theta.begin() + cal.k * cal.k);
            return theta;
        }
    }
    throw Error(ErrorCode::Argument, "unknown calibrator kind");
}

AffineCalibrator unpack(CalibratorKind kind, int k, const std::vector<double>& theta) {
    AffineCalibrator cal = AffineCalibrator::identity(kind, k);
    switch (kind) {
        case CalibratorKind::Temperature: {
            cal.temperature = std::max(theta[0], kMinTemperature);
            for (int i = 0; i < k; ++i) cal.weight[i * k + i] = 1.0 / cal.temperature;
            break;
        }
        case CalibratorKind::Vector:
            for (int i = 0; i < k; ++i) cal.weight[i * k + i] = theta[i];
            for (int i = 0; i < k; ++i) cal.bias[i] = theta[k + i];
            break;
        case CalibratorKind::Matrix:
            std::copy(theta.begin(), theta.begin() + k * k, cal.weight.begin());
            std::copy(theta.begin() + k * k, theta.end(), cal.bias.begin());
            break;
    }
    return cal;
}

std::vector<double> pack_gradient(const AffineCalibrator& cal, const LossGrad& lg) {
    switch (cal.kind) {
        case CalibratorKind::Temperature:
            return {lg.grad_temperature};
        case CalibratorKind::Vector: {
            std::vector<double> g(2 * cal.k);
            for (int i = 0; i < cal.k; ++i) g[i] = lg.grad_weight[i * cal.k + i];
            for (int i = 0; i < cal.k; ++i) g[cal.k + i] = lg.grad_bias[i];
            return g;
        }
        case CalibratorKind::Matrix: {
            std::vector<double> g(cal.k * cal.k + cal.k);
            std::copy(lg.grad_weight.begin(), lg.grad_weight.end(), g.begin());
            std::copy(lg.grad_bias.begin(), lg.grad_bias.end(), g.begin() + cal.k * cal.k);
            return g;
        }
    }
    throw Error(ErrorCode::Argument, "unknown calibrator kind");
}

}  // namespace

std::string kind_name(CalibratorKind kind) {
    switch (kind) {
        case CalibratorKind::Temperature: return "temperature";
        case CalibratorKind::Vector: return "vector";
        case CalibratorKind::Matrix: return "matrix";
    }
    return "unknown";
}

CalibratorKind kind_from_name(const std::string& name) {
    if (name == "temperature") return CalibratorKind::Temperature;
    if (name == "vector") return CalibratorKind::Vector;
    if (name == "matrix") return CalibratorKind::Matrix;
    throw Error(ErrorCode::Argument, "unknown calibrator kind: " + name);
}

AffineCalibrator AffineCalibrator::identity(CalibratorKind kind, int k) {
    AffineCalibrator cal;
    cal.kind = kind;
    cal.k = k;
    cal.weight.assign(k * k, 0.0);
    for (int i = 0; i < k; ++i) cal.weight[i * k + i] = 1.0;
    cal.bias.assign(k, 0.0);
    cal.temperature = 1.0;
    return cal;
}

std::vector<double> softmax(const std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

ProbabilityEstimate apply_affine(const AffineCalibrator& cal, const ProbabilityEstimate& est) {
    require_normalized(est);
    return make_estimate(softmax(affine_logits(cal, est.probs)), true);
}

LossGrad loss_and_gradient(const AffineCalibrator& cal,
                           const std::vector<ProbabilityEstimate>& estimates,
                           const std::vector<int>& labels, double l2_weight) {
    if (estimates.empty() || estimates.size() != labels.size()) {
        throw Error(ErrorCode::Argument, "estimates and labels must be non-empty and aligned");
    }
    const int k = cal.k;
    const double n = static_cast<double>(estimates.size());

    LossGrad lg;
    lg.grad_weight.assign(k * k, 0.0);
    lg.grad_bias.assign(k, 0.0);

    for (std::size_t i = 0; i < estimates.size(); ++i) {
        require_normalized(estimates[i]);
        const int y = labels[i];
        if (y < 0 || y >= k) throw Error(ErrorCode::Argument, "label outside [0,K)");
        const auto& p = estimates[i].probs;
        const auto z = affine_logits(cal, p);
        const auto s = softmax(z);
        lg.loss += -std::log(std::max(s[y], 1e-300)) / n;
        for (int r = 0; r < k; ++r) {
            const double dz = (s[r] - (r == y ? 1.0 : 0.0)) / n;
            lg.grad_bias[r] += dz;
            for (int c = 0; c < k; ++c) lg.grad_weight[r * k + c] += dz * p[c];
        }
    }

    if (cal.kind == CalibratorKind::Temperature) {
        // z = p / T, so dz_r/dT = -p_r / T^2
        const double t2 = cal.temperature * cal.temperature;
        for (int r = 0; r < k; ++r) {
            // grad_weight holds dL/dW; chain through W_rr = 1/T
            lg.grad_temperature += lg.grad_weight[r * k + r] * (-1.0 / t2);
        }
        return lg;
    }

    if (l2_weight > 0.0) {
        for (int r = 0; r < k; ++r) {
            for (int c = 0; c < k; ++c) {
                const double dev = cal.weight[r * k + c] - (r == c ? 1.0 : 0.0);
                if (cal.kind == CalibratorKind::Vector && r != c) continue;
                lg.loss += l2_weight * dev * dev;
                lg.grad_weight[r * k + c] += 2.0 * l2_weight * dev;
            }
            lg.loss += l2_weight * cal.bias[r] * cal.bias[r];
            lg.grad_bias[r] += 2.0 * l2_weight * cal.bias[r];
        }
    }
    return lg;
}

FitResult fit_affine(const std::vector<ProbabilityEstimate>& estimates,
                     const std::vector<int>& labels, CalibratorKind kind, const FitConfig& cfg) {
    if (estimates.empty() || estimates.size() != labels.size()) {
        throw Error(ErrorCode::Argument, "estimates and labels must be non-empty and aligned");
    }
    const int k = static_cast<int>(estimates.front().probs.size());
    if (static_cast<int>(estimates.size()) < k) {
        throw Error(ErrorCode::Argument, "need at least K fitting examples");
    }

    FitResult result;
    {
        std::set<int> distinct(labels.begin(), labels.end());
        if (distinct.size() < 2) {
            result.warning = "single-class validation labels; fit may be degenerate";
        }
    }

    AffineCalibrator cal = AffineCalibrator::identity(kind, k);
    std::vector<double> theta = pack(cal);
    LossGrad lg = loss_and_gradient(cal, estimates, labels, cfg.l2_weight);
    if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::Divergence, "non-finite loss at initialization");
    }
    std::vector<double> grad = pack_gradient(cal, lg);
    double loss = lg.loss;
    result.loss_trace.push_back(loss);

    double lr = cfg.learning_rate;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<double> candidate(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) candidate[i] = theta[i] - lr * grad[i];
        AffineCalibrator cand_cal = unpack(kind, k, candidate);
        LossGrad cand_lg = loss_and_gradient(cand_cal, estimates, labels, cfg.l2_weight);

        if (!std::isfinite(cand_lg.loss) || cand_lg.loss > loss) {
            lr *= 0.5;
            if (lr < 1e-14) {
                if (!std::isfinite(cand_lg.loss)) {
                    throw Error(ErrorCode::Divergence,
                                "non-finite loss at iteration " + std::to_string(iter));
                }
                break;
            }
            continue;
        }

        const double delta = loss - cand_lg.loss;
        theta = std::move(candidate);
        cal = std::move(cand_cal);
        grad = pack_gradient(cal, cand_lg);
        loss = cand_lg.loss;
        result.loss_trace.push_back(loss);
        if (delta < cfg.tolerance) break;
    }

    result.calibrator = std::move(cal);
    return result;
}

ComparativeCalibrator fit_comparative(const std::map<int, ReferenceFitData>& per_reference,
                                      CalibratorKind kind, const FitConfig& cfg) {
    if (per_reference.empty()) {
        throw Error(ErrorCode::EmptyInput, "no per-reference fit data");
    }
    ComparativeCalibrator cal;
    for (const auto& [j, data] : per_reference) {
        try {
            cal.per_reference[j] = fit_affine(data.estimates, data.labels, kind, cfg).calibrator;
        } catch (const Error& e) {
            throw Error(e.code(), "reference set " + std::to_string(j) + ": " + e.what());
        }
    }
    return cal;
}

ProbabilityEstimate apply_comparative(const ComparativeCalibrator& cal,
                                      const std::map<int, ProbabilityEstimate>& per_reference) {
    if (cal.per_reference.empty()) throw Error(ErrorCode::Argument, "empty comparative calibrator");
    if (per_reference.size() != cal.per_reference.size()) {
        throw Error(ErrorCode::Argument, "estimate keys do not match calibrator keys");
    }
    const int k = cal.per_reference.begin()->second.k;
    std::vector<double> z(k, 0.0);
    for (const auto& [j, sub] : cal.per_reference) {
        auto it = per_reference.find(j);
        if (it == per_reference.end()) {
            throw Error(ErrorCode::Argument, "missing estimate for reference set " +
                                                 std::to_string(j));
        }
        require_normalized(it->second);
        const auto zj = affine_logits(sub, it->second.probs);
        for (int c = 0; c < k; ++c) z[c] += zj[c];
    }
    return make_estimate(softmax(z), true);
}

}  // namespace llmcal
