#include "llmcal/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "llmcal/errors.hpp"
#include "llmcal/metrics.hpp"
#include "llmcal/rng.hpp"

namespace llmcal {

namespace {

void validate_dist(const ConfidenceDist& d, const char* what) {
    if (!(d.mean > 0.0 && d.mean < 1.0)) {
        throw Error(ErrorCode::Argument, std::string(what) + ": mean must be in (0,1)");
    }
    if (!(d.concentration > 0.0)) {
        throw Error(ErrorCode::Argument, std::string(what) + ": concentration must be > 0");
    }
}

void validate(const ScenarioSpec& spec) {
    if (spec.n < 1) throw Error(ErrorCode::Argument, "scenario n must be >= 1");
    validate_dist(spec.correct_conf, "correct_conf");
    validate_dist(spec.incorrect_conf, "incorrect_conf");
    if (spec.profile == AccuracyProfile::Indiscriminate) {
        if (spec.p_correct < 0.0 || spec.p_correct > 1.0) {
            throw Error(ErrorCode::Argument, "p_correct must be in [0,1]");
        }
    } else {
        if (spec.per_bin_accuracy.empty()) {
            throw Error(ErrorCode::Argument, "conventional profile needs per-bin accuracies");
        }
        for (double a : spec.per_bin_accuracy) {
            if (a < 0.0 || a > 1.0) {
                throw Error(ErrorCode::Argument, "per-bin accuracy must be in [0,1]");
            }
        }
    }
}

PredictionRecord synth_record(long index, double confidence, bool correct, Rng& rng) {
    confidence = std::min(std::max(confidence, 1e-9), 1.0 - 1e-9);
    const int true_label = rng.bernoulli(0.5) ? 1 : 0;
    const int predicted = correct ? true_label : 1 - true_label;
    // two-label estimate: confidence on the predicted label; raw (sub-unit
    // mass) when confidence < 1/2 so predicted stays the argmax
    std::vector<double> probs(2, 0.0);
    probs[predicted] = confidence;
    const bool normalized = confidence >= 0.5;
    probs[1 - predicted] = normalized ? 1.0 - confidence : confidence * 0.5;
    PredictionRecord rec;
    rec.sample_id = "synth-" + std::to_string(index);
    rec.estimate = make_estimate(std::move(probs), normalized);
    rec.true_label = true_label;
    return rec;
}

}  // namespace

std::vector<PredictionRecord> generate_scenario(const ScenarioSpec& spec) {
    validate(spec);
    Rng rng(derive_seed(spec.seed, "scenario"));
    std::vector<PredictionRecord> records;
    records.reserve(spec.n);
    const int n_bins = static_cast<int>(spec.per_bin_accuracy.size());
    for (long i = 0; i < spec.n; ++i) {
        bool correct;
        double conf;
        if (spec.profile == AccuracyProfile::Indiscriminate) {
            correct = rng.bernoulli(spec.p_correct);
            const auto& d = correct ? spec.correct_conf : spec.incorrect_conf;
            conf = rng.beta_mean_conc(d.mean, d.concentration);
        } else {
            conf = rng.beta_mean_conc(spec.correct_conf.mean, spec.correct_conf.concentration);
            int bin = static_cast<int>(std::floor(conf * n_bins));
            bin = std::min(std::max(bin, 0), n_bins - 1);
            correct = rng.bernoulli(spec.per_bin_accuracy[bin]);
        }
        records.push_back(synth_record(i, conf, correct, rng));
    }
    return records;
}

namespace {

struct PairEval {
    std::vector<PredictionRecord> records_a;
    std::vector<PredictionRecord> records_b;
    ScenarioSpec spec_a;
    ScenarioSpec spec_b;
    double ece_gap = 0.0;
    double accuracy_gap = 0.0;
};

double population_accuracy(const std::vector<PredictionRecord>& records) {
    long correct = 0;
    for (const auto& r : records) {
        if (r.estimate.predicted == r.true_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

// generate conventional b with accuracies shifted down by delta, then match
// indiscriminate a's p_correct to b's realized accuracy
PairEval eval_pair(const ScenarioSpec& ind, const ScenarioSpec& conv, double delta, int n_bins) {
    PairEval out;
    out.spec_b = conv;
    for (double& a : out.spec_b.per_bin_accuracy) {
        a = std::min(std::max(a - delta, 0.0), 1.0);
    }
    out.records_b = generate_scenario(out.spec_b);
    out.spec_a = ind;
    out.spec_a.p_correct = population_accuracy(out.records_b);
    out.records_a = generate_scenario(out.spec_a);

    const double ece_a = ece(bin_predictions(out.records_a, n_bins));
    const double ece_b = ece(bin_predictions(out.records_b, n_bins));
    out.ece_gap = ece_a - ece_b;
    out.accuracy_gap = population_accuracy(out.records_a) - out.spec_a.p_correct;
    return out;
}

}  // namespace

MatchedPair match_ece_pair(const ScenarioSpec& spec_a, const ScenarioSpec& spec_b,
                           double target_tolerance, int n_bins) {
    validate(spec_a);
    validate(spec_b);

    auto as_result = [](PairEval&& e) {
        MatchedPair m;
        m.records_a = std::move(e.records_a);
        m.records_b = std::move(e.records_b);
        m.tuned_a = e.spec_a;
        m.tuned_b = e.spec_b;
        m.ece_gap = std::abs(e.ece_gap);
        m.accuracy_gap = std::abs(e.accuracy_gap);
        return m;
    };

    // direct comparison first; identical specs match at gap ~0
    {
        auto ra = generate_scenario(spec_a);
        auto rb = generate_scenario(spec_b);
        const double gap_e = std::abs(ece(bin_predictions(ra, n_bins)) -
                                      ece(bin_predictions(rb, n_bins)));
        const double gap_acc = std::abs(population_accuracy(ra) - population_accuracy(rb));
        if (gap_e <= target_tolerance && gap_acc <= target_tolerance) {
            MatchedPair m;
            m.records_a = std::move(ra);
            m.records_b = std::move(rb);
            m.tuned_a = spec_a;
            m.tuned_b = spec_b;
            m.ece_gap = gap_e;
            m.accuracy_gap = gap_acc;
            return m;
        }
    }

    const bool tunable = spec_a.profile == AccuracyProfile::Indiscriminate &&
                         spec_b.profile == AccuracyProfile::Conventional;
    if (!tunable || target_tolerance <= 0.0) {
        throw Error(ErrorCode::NoMatch,
                    "populations do not match at the requested tolerance and no tunable "
                    "indiscriminate/conventional parameter pair is available");
    }

    // coarse scan over the accuracy shift, then bisection on the ECE gap
    double best_score = 1e9;
    double best_delta = 0.0;
    double lo = -0.4, hi = 0.4;
    double lo_gap = 0.0;
    bool bracketed = false;
    double prev_delta = 0.0, prev_gap = 0.0;
    for (int i = 0; i <= 16; ++i) {
        const double delta = -0.4 + 0.05 * i;
        PairEval e = eval_pair(spec_a, spec_b, delta, n_bins);
        const double score = std::abs(e.ece_gap) + std::abs(e.accuracy_gap);
        if (score < best_score) {
            best_score = score;
            best_delta = delta;
        }
        if (i > 0 && !bracketed && prev_gap * e.ece_gap <= 0.0) {
            lo = prev_delta;
            hi = delta;
            lo_gap = prev_gap;
            bracketed = true;
        }
        prev_delta = delta;
        prev_gap = e.ece_gap;
    }

    if (bracketed) {
        for (int iter = 0; iter < 24; ++iter) {
            const double mid = 0.5 * (lo + hi);
            PairEval e = eval_pair(spec_a, spec_b, mid, n_bins);
            if (std::abs(e.ece_gap) <= target_tolerance &&
                std::abs(e.accuracy_gap) <= target_tolerance) {
                return as_result(std::move(e));
            }
            if (e.ece_gap * lo_gap <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
                lo_gap = e.ece_gap;
            }
        }
    }

    PairEval e = eval_pair(spec_a, spec_b, best_delta, n_bins);
    if (std::abs(e.ece_gap) <= target_tolerance && std::abs(e.accuracy_gap) <= target_tolerance) {
        return as_result(std::move(e));
    }
    throw Error(ErrorCode::NoMatch,
                "no parameterization reached tolerance " + std::to_string(target_tolerance) +
                    "; closest gaps: ece " + std::to_string(std::abs(e.ece_gap)) + ", accuracy " +
                    std::to_string(std::abs(e.accuracy_gap)));
}

}  // namespace llmcal
