#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "llmcal/errors.hpp"
#include "llmcal/extraction.hpp"
#include "llmcal/metrics.hpp"
#include "llmcal/posthoc.hpp"
#include "llmcal/rng.hpp"

using namespace llmcal;

namespace {

ProbabilityEstimate est(std::vector<double> probs) { return make_estimate(std::move(probs), true); }

// random normalized K-vector
ProbabilityEstimate random_est(Rng& rng, int k) {
    std::vector<double> p(k);
    double total = 0.0;
    for (double& v : p) {
        v = rng.uniform(0.02, 1.0);
        total += v;
    }
    for (double& v : p) v /= total;
    return est(std::move(p));
}

AffineCalibrator random_cal(Rng& rng, CalibratorKind kind, int k) {
    AffineCalibrator cal = AffineCalibrator::identity(kind, k);
    switch (kind) {
        case CalibratorKind::Temperature: {
            cal.temperature = rng.uniform(0.5, 2.5);
            for (int i = 0; i < k; ++i) cal.weight[i * k + i] = 1.0 / cal.temperature;
            break;
        }
        case CalibratorKind::Vector:
            for (int i = 0; i < k; ++i) {
                cal.weight[i * k + i] = rng.uniform(0.3, 2.0);
                cal.bias[i] = rng.uniform(-0.5, 0.5);
            }
            break;
        case CalibratorKind::Matrix:
            for (int i = 0; i < k * k; ++i) cal.weight[i] = rng.uniform(-1.0, 1.5);
            for (int i = 0; i < k; ++i) cal.bias[i] = rng.uniform(-0.5, 0.5);
            break;
    }
    return cal;
}

double loss_at(const AffineCalibrator& base, CalibratorKind kind, int k,
               const std::vector<double>& theta_shift, int shift_index, double eps,
               const std::vector<ProbabilityEstimate>& ests, const std::vector<int>& labels,
               double l2) {
    // rebuild a calibrator with one packed parameter nudged by eps
    AffineCalibrator cal = base;
    switch (kind) {
        case CalibratorKind::Temperature: {
            cal.temperature = base.temperature + eps;
            for (int i = 0; i < k; ++i) cal.weight[i * k + i] = 1.0 / cal.temperature;
            break;
        }
        case CalibratorKind::Vector:
            if (shift_index < k) {
                cal.weight[shift_index * k + shift_index] += eps;
            } else {
                cal.bias[shift_index - k] += eps;
            }
            break;
        case CalibratorKind::Matrix:
            if (shift_index < k * k) {
                cal.weight[shift_index] += eps;
            } else {
                cal.bias[shift_index - k * k] += eps;
            }
            break;
    }
    (void)theta_shift;
    return loss_and_gradient(cal, ests, labels, l2).loss;
}

}  // namespace

TEST_CASE("identity calibration is one softmax, not a no-op") {
    const auto out = apply_affine(AffineCalibrator::identity(CalibratorKind::Vector, 2),
                                  est({0.7, 0.3}));
    // softmax(0.7, 0.3) = (e^0.4/(1+e^0.4) applied symmetrically)
    const double expected = std::exp(0.7) / (std::exp(0.7) + std::exp(0.3));
    CHECK(out.probs[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(out.probs[0] == doctest::Approx(0.598687660).epsilon(1e-8));
    CHECK(out.predicted == 0);
}

TEST_CASE("calibrators require normalized inputs") {
    const auto raw = make_estimate({0.5, 0.2}, false);
    CHECK_THROWS_AS(apply_affine(AffineCalibrator::identity(CalibratorKind::Vector, 2), raw),
                    Error);
    CHECK_NOTHROW(apply_affine(AffineCalibrator::identity(CalibratorKind::Vector, 2),
                               renormalize(raw)));
}

TEST_CASE("temperature scaling preserves the argmax and softens with T") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_est(rng, 3);
        AffineCalibrator hot = AffineCalibrator::identity(CalibratorKind::Temperature, 3);
        hot.temperature = 4.0;
        for (int i = 0; i < 3; ++i) hot.weight[i * 3 + i] = 0.25;
        const auto cold = apply_affine(AffineCalibrator::identity(CalibratorKind::Temperature, 3),
                                       p);
        const auto soft = apply_affine(hot, p);
        CHECK(soft.predicted == p.predicted);
        CHECK(soft.confidence <= cold.confidence + 1e-12);
    }
}

TEST_CASE("uniform input stays uniform under identity calibration") {
    const auto out = apply_affine(AffineCalibrator::identity(CalibratorKind::Matrix, 4),
                                  est({0.25, 0.25, 0.25, 0.25}));
    for (double p : out.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng.bounded(3));
        const int n = 2 + static_cast<int>(rng.bounded(7));
        const auto kind = static_cast<CalibratorKind>(rng.bounded(3));
        const double l2 = trial % 3 == 0 ? 0.05 : 0.0;

        std::vector<ProbabilityEstimate> ests;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            ests.push_back(random_est(rng, k));
            labels.push_back(static_cast<int>(rng.bounded(k)));
        }
        const auto cal = random_cal(rng, kind, k);
        const auto lg = loss_and_gradient(cal, ests, labels, l2);

        const int n_params = kind == CalibratorKind::Temperature ? 1
                             : kind == CalibratorKind::Vector    ? 2 * k
                                                                 : k * k + k;
        const double eps = 1e-6;
        for (int i = 0; i < n_params; ++i) {
            const double up = loss_at(cal, kind, k, {}, i, eps, ests, labels, l2);
            const double dn = loss_at(cal, kind, k, {}, i, -eps, ests, labels, l2);
            const double fd = (up - dn) / (2 * eps);
            double analytic;
            if (kind == CalibratorKind::Temperature) {
                analytic = lg.grad_temperature;
            } else if (kind == CalibratorKind::Vector) {
                analytic = i < k ? lg.grad_weight[i * k + i] : lg.grad_bias[i - k];
            } else {
                analytic = i < k * k ? lg.grad_weight[i] : lg.grad_bias[i - k * k];
            }
            const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-4});
            CHECK(std::abs(fd - analytic) / scale < 1e-4);
        }
    }
}

TEST_CASE("fitting walks the loss downhill") {
    Rng rng(17);
    std::vector<ProbabilityEstimate> ests;
    std::vector<int> labels;
    // systematically overconfident generator: true label only 60% of the time
    for (int i = 0; i < 300; ++i) {
        const int y = static_cast<int>(rng.bounded(2));
        const int shown = rng.bernoulli(0.6) ? y : 1 - y;
        std::vector<double> p(2, 0.05);
        p[shown] = 0.95;
        ests.push_back(est(std::move(p)));
        labels.push_back(y);
    }
    for (const auto kind :
         {CalibratorKind::Temperature, CalibratorKind::Vector, CalibratorKind::Matrix}) {
        const auto fit = fit_affine(ests, labels, kind, FitConfig{});
        REQUIRE(fit.loss_trace.size() >= 2);
        for (std::size_t i = 1; i < fit.loss_trace.size(); ++i) {
            CHECK(fit.loss_trace[i] <= fit.loss_trace[i - 1] + 1e-12);
        }
        CHECK(fit.loss_trace.back() < fit.loss_trace.front());
        CHECK(fit.warning.empty());
        if (kind == CalibratorKind::Temperature) {
            CHECK(fit.calibrator.temperature > 1.0);  // overconfidence needs softening
        }
    }
}

TEST_CASE("fit guards: too few examples and single-class warnings") {
    std::vector<ProbabilityEstimate> two{est({0.6, 0.3, 0.1}), est({0.2, 0.5, 0.3})};
    CHECK_THROWS_AS(fit_affine(two, {0, 1}, CalibratorKind::Vector, FitConfig{}), Error);

    std::vector<ProbabilityEstimate> ests;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        ests.push_back(est({0.7, 0.3}));
        labels.push_back(0);
    }
    const auto fit = fit_affine(ests, labels, CalibratorKind::Vector, FitConfig{});
    CHECK(!fit.warning.empty());
}

TEST_CASE("vector scaling can invert a known distortion") {
    // generator: calibrated q distorted by fixed diagonal scaling + bias before display
    Rng rng(29);
    AffineCalibrator distortion = AffineCalibrator::identity(CalibratorKind::Vector, 3);
    distortion.weight[0] = 3.0;
    distortion.weight[4] = 0.7;
    distortion.weight[8] = 1.8;
    distortion.bias = {0.4, -0.2, 0.0};

    std::vector<ProbabilityEstimate> shown;
    std::vector<int> labels;
    for (int i = 0; i < 600; ++i) {
        const auto q = random_est(rng, 3);
        labels.push_back(rng.uniform() < q.probs[0] ? 0 : (rng.uniform() < 0.5 ? 1 : 2));
        // resample label faithfully from q
        const double u = rng.uniform();
        labels.back() = u < q.probs[0] ? 0 : (u < q.probs[0] + q.probs[1] ? 1 : 2);
        shown.push_back(apply_affine(distortion, q));
    }
    const auto identity_loss =
        loss_and_gradient(AffineCalibrator::identity(CalibratorKind::Vector, 3), shown, labels,
                          0.0)
            .loss;
    const auto fit = fit_affine(shown, labels, CalibratorKind::Vector, FitConfig{});
    CHECK(fit.loss_trace.back() < identity_loss - 0.01);
}

TEST_CASE("comparative fit produces one calibrator per reference set") {
    Rng rng(43);
    std::map<int, ReferenceFitData> data;
    for (int j = 1; j <= 2; ++j) {
        for (int i = 0; i < 40; ++i) {
            const auto e = random_est(rng, 2);
            data[j].labels.push_back(static_cast<int>(rng.bounded(2)));
            data[j].estimates.push_back(e);
        }
    }
    const auto cal = fit_comparative(data, CalibratorKind::Vector, FitConfig{});
    CHECK(cal.per_reference.size() == 2);
    CHECK(cal.per_reference.at(1).k == 2);

    // identical data per set -> identical calibrators
    std::map<int, ReferenceFitData> same{{1, data[1]}, {2, data[1]}};
    const auto cal_same = fit_comparative(same, CalibratorKind::Vector, FitConfig{});
    CHECK(cal_same.per_reference.at(1).weight == cal_same.per_reference.at(2).weight);
    CHECK(cal_same.per_reference.at(1).bias == cal_same.per_reference.at(2).bias);
    CHECK_THROWS_AS(fit_comparative({}, CalibratorKind::Vector, FitConfig{}), Error);
}

TEST_CASE("comparative application sums logits before one softmax") {
    ComparativeCalibrator cal;
    cal.per_reference[1] = AffineCalibrator::identity(CalibratorKind::Vector, 2);
    cal.per_reference[2] = AffineCalibrator::identity(CalibratorKind::Vector, 2);
    std::map<int, ProbabilityEstimate> inputs{{1, est({0.8, 0.2})}, {2, est({0.6, 0.4})}};
    const auto out = apply_comparative(cal, inputs);
    // z = (0.8 + 0.6, 0.2 + 0.4) = (1.4, 0.6); softmax gap e^0.8
    const double expected = std::exp(1.4) / (std::exp(1.4) + std::exp(0.6));
    CHECK(out.probs[0] == doctest::Approx(expected).epsilon(1e-12));

    std::map<int, ProbabilityEstimate> missing{{1, est({0.8, 0.2})}};
    CHECK_THROWS_AS(apply_comparative(cal, missing), Error);
}

TEST_CASE("temperature floor prevents blow-ups") {
    std::vector<ProbabilityEstimate> ests;
    std::vector<int> labels;
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        ests.push_back(random_est(rng, 2));
        labels.push_back(ests.back().predicted);  // perfectly separable -> wants T -> 0
    }
    FitConfig cfg;
    cfg.max_iters = 2000;
    const auto fit = fit_affine(ests, labels, CalibratorKind::Temperature, cfg);
    CHECK(fit.calibrator.temperature >= 1e-6);
    CHECK(std::isfinite(fit.loss_trace.back()));
}
