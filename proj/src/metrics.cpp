#include "llmcal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "llmcal/errors.hpp"

namespace llmcal {

namespace {

bool is_correct(const PredictionRecord& r) {
    return r.estimate.predicted == r.true_label;
}

void require_nonempty(const std::vector<PredictionRecord>& records, const char* op) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptyInput, std::string(op) + ": no prediction records");
    }
}

int bin_index(double confidence, int n_bins) {
    int b = static_cast<int>(std::floor(confidence * n_bins));
    if (b >= n_bins) b = n_bins - 1;  // confidence 1.0 goes to the top bin
    if (b < 0) b = 0;
    return b;
}

}  // namespace

ReliabilityDiagram bin_predictions(const std::vector<PredictionRecord>& records, int n_bins) {
    require_nonempty(records, "bin_predictions");
    if (n_bins < 1) throw Error(ErrorCode::Argument, "n_bins must be >= 1");

    ReliabilityDiagram diagram;
    diagram.n_bins = n_bins;
    diagram.n = static_cast<long>(records.size());
    diagram.bins.resize(n_bins);
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<long> correct(n_bins, 0);
    for (int b = 0; b < n_bins; ++b) {
        diagram.bins[b].lower = static_cast<double>(b) / n_bins;
        diagram.bins[b].upper = static_cast<double>(b + 1) / n_bins;
    }
    for (const auto& r : records) {
        const double c = r.estimate.confidence;
        if (c < 0.0 || c > 1.0) {
            throw Error(ErrorCode::Argument, "confidence outside [0,1] for " + r.sample_id);
        }
        const int b = bin_index(c, n_bins);
        diagram.bins[b].count += 1;
        conf_sum[b] += c;
        if (is_correct(r)) correct[b] += 1;
    }
    for (int b = 0; b < n_bins; ++b) {
        auto& bin = diagram.bins[b];
        bin.empty = bin.count == 0;
        if (!bin.empty) {
            bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
            bin.accuracy = static_cast<double>(correct[b]) / static_cast<double>(bin.count);
        }
    }
    return diagram;
}

double ece(const ReliabilityDiagram& diagram) {
    if (diagram.n == 0) throw Error(ErrorCode::EmptyInput, "ece: empty diagram");
    double total = 0.0;
    for (const auto& bin : diagram.bins) {
        if (bin.empty) continue;
        total += static_cast<double>(bin.count) / static_cast<double>(diagram.n) *
                 std::abs(bin.accuracy - bin.mean_confidence);
    }
    return total;
}

double ice(const std::vector<PredictionRecord>& records) {
    require_nonempty(records, "ice");
    double total = 0.0;
    for (const auto& r : records) {
        const double indicator = is_correct(r) ? 1.0 : 0.0;
        total += std::abs(indicator - r.estimate.confidence);
    }
    return total / static_cast<double>(records.size());
}

MacroCeResult macro_ce(const std::vector<PredictionRecord>& records) {
    require_nonempty(records, "macro_ce");
    MacroCeResult res;
    double pos_sum = 0.0;
    double neg_sum = 0.0;
    for (const auto& r : records) {
        if (is_correct(r)) {
            res.n_correct += 1;
            pos_sum += 1.0 - r.estimate.confidence;
        } else {
            res.n_incorrect += 1;
            neg_sum += r.estimate.confidence;
        }
    }
    res.ice_pos = res.n_correct > 0 ? MetricValue::ok(pos_sum / res.n_correct)
                                    : MetricValue::undefined("ONE_SIDED");
    res.ice_neg = res.n_incorrect > 0 ? MetricValue::ok(neg_sum / res.n_incorrect)
                                      : MetricValue::undefined("ONE_SIDED");
    if (res.ice_pos.defined && res.ice_neg.defined) {
        res.macro_ce = MetricValue::ok(0.5 * (res.ice_pos.value + res.ice_neg.value));
    } else {
        res.macro_ce = MetricValue::undefined("ONE_SIDED");
    }
    return res;
}

MetricValue dkl(const std::vector<PredictionRecord>& records, int dkl_bins, double smoothing) {
    require_nonempty(records, "dkl");
    if (dkl_bins < 1) throw Error(ErrorCode::Argument, "dkl_bins must be >= 1");
    if (!(smoothing > 0.0)) throw Error(ErrorCode::Argument, "dkl smoothing must be > 0");

    std::vector<double> correct_hist(dkl_bins, smoothing);
    std::vector<double> incorrect_hist(dkl_bins, smoothing);
    long n_correct = 0;
    long n_incorrect = 0;
    for (const auto& r : records) {
        const int b = bin_index(r.estimate.confidence, dkl_bins);
        if (is_correct(r)) {
            correct_hist[b] += 1.0;
            ++n_correct;
        } else {
            incorrect_hist[b] += 1.0;
            ++n_incorrect;
        }
    }
    if (n_correct == 0 || n_incorrect == 0) return MetricValue::undefined("ONE_SIDED");

    double correct_total = 0.0;
    double incorrect_total = 0.0;
    for (int b = 0; b < dkl_bins; ++b) {
        correct_total += correct_hist[b];
        incorrect_total += incorrect_hist[b];
    }
    double kl = 0.0;
    for (int b = 0; b < dkl_bins; ++b) {
        const double p = correct_hist[b] / correct_total;
        const double q = incorrect_hist[b] / incorrect_total;
        kl += p * std::log(p / q);
    }
    if (kl < 0.0 && kl > -1e-15) kl = 0.0;  // clamp rounding residue
    return MetricValue::ok(kl);
}

ClassificationMetrics classification_metrics(const std::vector<PredictionRecord>& records, int k) {
    require_nonempty(records, "classification_metrics");
    if (k < 2) throw Error(ErrorCode::Argument, "k must be >= 2");

    long correct = 0;
    std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
    for (const auto& r : records) {
        if (r.true_label < 0 || r.true_label >= k || r.estimate.predicted < 0 ||
            r.estimate.predicted >= k) {
            throw Error(ErrorCode::Argument, "label index outside [0,K) for " + r.sample_id);
        }
        if (is_correct(r)) {
            ++correct;
            ++tp[r.true_label];
        } else {
            ++fp[r.estimate.predicted];
            ++fn[r.true_label];
        }
    }
    ClassificationMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
    double f1_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        // Absent labels (no truth, no predictions) contribute F1 = 0.
        f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    out.macro_f1 = f1_sum / k;
    return out;
}

CalibrationReport compute_report(const std::vector<PredictionRecord>& records, int k,
                                 const ExperimentConfig& config) {
    require_nonempty(records, "compute_report");
    CalibrationReport report;
    report.n = static_cast<long>(records.size());
    report.ece = ece(bin_predictions(records, config.n_bins));
    report.ice = ice(records);
    auto mc = macro_ce(records);
    report.ice_pos = mc.ice_pos;
    report.ice_neg = mc.ice_neg;
    report.macro_ce = mc.macro_ce;
    report.n_correct = mc.n_correct;
    report.n_incorrect = mc.n_incorrect;
    report.dkl = dkl(records, config.dkl_bins, config.dkl_smoothing);
    auto cm = classification_metrics(records, k);
    report.accuracy = cm.accuracy;
    report.macro_f1 = cm.macro_f1;
    return report;
}

}  // namespace llmcal
