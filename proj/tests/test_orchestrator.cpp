#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "llmcal/backend.hpp"
#include "llmcal/errors.hpp"
#include "llmcal/metrics.hpp"
#include "llmcal/orchestrator.hpp"
#include "llmcal/serialize.hpp"

using namespace llmcal;

namespace {

DatasetSplits small_splits(int n_test, int n_refs = 6, int n_demos = 4) {
    DatasetSplits s;
    for (int i = 0; i < n_test; ++i) {
        s.test.push_back({"t" + std::to_string(i), "test question " + std::to_string(i), i % 2});
    }
    for (int i = 0; i < n_refs; ++i) {
        s.reference_pool.push_back({"r" + std::to_string(i), "ref " + std::to_string(i), i % 2});
    }
    for (int i = 0; i < n_demos; ++i) {
        s.demo_pool.push_back({"d" + std::to_string(i), "demo " + std::to_string(i), i % 2});
    }
    s.validation = {{"v0", "val", 0}};
    return s;
}

std::map<std::string, int> truth_of(const DatasetSplits& s) {
    std::map<std::string, int> m;
    for (const auto* part : {&s.test, &s.validation, &s.reference_pool, &s.demo_pool}) {
        for (const auto& x : *part) m[x.id] = *x.label;
    }
    return m;
}

MockBackend perfect_mock(const DatasetSplits& s) {
    MockModelSpec spec;
    const auto space = testutil::binary_space();
    for (const auto& [id, y] : truth_of(s)) {
        spec.samples[id] = {{space.token_variants[y].front(), 1.0}};
    }
    return MockBackend(spec, truth_of(s));
}

}  // namespace

TEST_CASE("perfectly confident mock yields accuracy 1 and zero ece") {
    const auto splits = small_splits(12);
    auto mock = perfect_mock(splits);
    RunOptions options;
    ExperimentConfig cfg;
    const auto run = run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                   options, cfg, 77);
    CHECK(run.n_failures == 0);
    CHECK(run.records.size() == 12);
    const auto report = compute_report(ok_records(run.records), 2, cfg);
    CHECK(report.accuracy == doctest::Approx(1.0));
    CHECK(report.ece == doctest::Approx(0.0));
    CHECK(report.macro_f1 == doctest::Approx(1.0));
    CHECK(run.condition.mode == InferenceMode::Independent);
    CHECK(run.condition.replicate_seed == 77);
}

TEST_CASE("comparative runs retain per-reference views with the target first") {
    const auto splits = small_splits(6);
    MockModelSpec spec;
    spec.seed = 4;
    spec.noise_amplitude = 0.05;
    MockBackend mock(spec, truth_of(splits));
    RunOptions options;
    options.mode = InferenceMode::Comparative;
    options.j_sets = 4;
    ExperimentConfig cfg;
    const auto run = run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                   options, cfg, 5);
    CHECK(run.per_reference_runs.size() == 4);
    CHECK(run.condition.target_position == 1);
    for (const auto& [j, records] : run.per_reference_runs) {
        REQUIRE(records.size() == 6);
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(records[i].sample_id == splits.test[i].id);
            CHECK(records[i].condition.reference_set_id == j);
        }
    }
    // j = 1 view mirrors the first per-reference run
    for (std::size_t i = 0; i < run.records.size(); ++i) {
        CHECK(run.records[i].estimate.probs == run.per_reference_runs.at(1)[i].estimate.probs);
    }
}

TEST_CASE("insufficient pools are reported") {
    auto splits = small_splits(3, /*n_refs=*/1);
    MockModelSpec spec;
    MockBackend mock(spec, truth_of(splits));
    RunOptions options;
    options.mode = InferenceMode::Comparative;
    CHECK_THROWS_AS(run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                  options, ExperimentConfig{}, 1),
                    Error);
    options.mode = InferenceMode::Independent;
    options.shots = 10;  // demo pool only has 4
    CHECK_THROWS_AS(run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                  options, ExperimentConfig{}, 1),
                    Error);
}

TEST_CASE("failed samples keep their slot and are excluded from metrics") {
    const auto splits = small_splits(5);
    MockModelSpec spec2;
    const auto space = testutil::binary_space();
    for (const auto& [id, y] : truth_of(splits)) {
        spec2.samples[id] = {{space.token_variants[y].front(), 1.0}};
    }
    spec2.fail_ids = {"t2"};
    MockBackend mock(spec2, truth_of(splits));
    const auto run = run_condition(splits, trec_template(), space, mock, RunOptions{},
                                   ExperimentConfig{}, 9);
    CHECK(run.n_failures == 1);
    REQUIRE(run.records.size() == 5);
    CHECK(run.records[2].failure.has_value());
    CHECK(ok_records(run.records).size() == 4);
}

TEST_CASE("a fully failing backend raises instead of reporting empty metrics") {
    const auto splits = small_splits(3);
    MockModelSpec spec;
    spec.fail_ids = {"t0", "t1", "t2"};
    MockBackend mock(spec, truth_of(splits));
    CHECK_THROWS_AS(run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                  RunOptions{}, ExperimentConfig{}, 9),
                    Error);
}

TEST_CASE("aggregation averages probability vectors elementwise") {
    std::map<int, std::vector<PredictionRecord>> runs;
    PredictionRecord a;
    a.sample_id = "s";
    a.estimate = make_estimate({0.8, 0.2}, true);
    a.true_label = 0;
    PredictionRecord b = a;
    b.estimate = make_estimate({0.6, 0.4}, true);
    runs[1] = {a};
    runs[2] = {b};
    const auto agg = aggregate_comparative(runs);
    REQUIRE(agg.size() == 1);
    CHECK(agg[0].estimate.probs[0] == doctest::Approx(0.7));
    CHECK(agg[0].estimate.probs[1] == doctest::Approx(0.3));
    CHECK(agg[0].estimate.predicted == 0);
    CHECK(agg[0].condition.aggregated);
    CHECK_FALSE(agg[0].condition.reference_set_id.has_value());
}

TEST_CASE("aggregation can flip the argmax of the first run") {
    std::map<int, std::vector<PredictionRecord>> runs;
    PredictionRecord a;
    a.sample_id = "s";
    a.estimate = make_estimate({0.55, 0.45}, true);
    PredictionRecord b = a;
    b.estimate = make_estimate({0.1, 0.9}, true);
    runs[1] = {a};
    runs[2] = {b};
    const auto agg = aggregate_comparative(runs);
    CHECK(agg[0].estimate.predicted == 1);
    CHECK(agg[0].estimate.confidence == doctest::Approx(0.675));
}

TEST_CASE("aggregation alignment and failure propagation") {
    std::map<int, std::vector<PredictionRecord>> runs;
    PredictionRecord a;
    a.sample_id = "s1";
    a.estimate = make_estimate({0.8, 0.2}, true);
    PredictionRecord b = a;
    b.sample_id = "s2";
    runs[1] = {a, b};
    runs[2] = {b, a};  // misaligned ids
    CHECK_THROWS_WITH_AS(aggregate_comparative(runs), doctest::Contains("misaligned"), Error);

    PredictionRecord failed = a;
    failed.failure = "backend down";
    runs[2] = {failed, b};
    const auto agg = aggregate_comparative(runs);
    CHECK(agg[0].failure.has_value());
    CHECK_FALSE(agg[1].failure.has_value());

    CHECK_THROWS_AS(aggregate_comparative({}), Error);
}

TEST_CASE("position decay diagnostic walks every slot") {
    const auto splits = small_splits(10);
    MockModelSpec spec;
    spec.seed = 31;
    spec.true_weight_mean = 0.85;
    spec.true_weight_concentration = 300.0;
    spec.position_decay = {0.5, 0.0};
    MockBackend mock(spec, truth_of(splits));
    ExperimentConfig cfg;
    const auto table = position_decay_diagnostic(splits, trec_template(),
                                                 testutil::binary_space(), mock, RunOptions{},
                                                 cfg, 3);
    REQUIRE(table.size() == 3);
    CHECK(table[0].position == 1);
    CHECK(table[0].accuracy == doctest::Approx(1.0));
    CHECK(table[1].accuracy >= table[2].accuracy);
    CHECK(table[2].accuracy == doctest::Approx(0.0));
    CHECK(table[0].n == 10);
}

TEST_CASE("replicate summaries expose mean and sample deviation") {
    CalibrationReport r1, r2;
    r1.ece = 0.2;
    r2.ece = 0.4;
    r1.macro_ce = MetricValue::undefined("ONE_SIDED");
    r2.macro_ce = MetricValue::ok(0.3);
    const auto summary = summarize_reports({r1, r2});
    CHECK(summary.n_replicates == 2);
    CHECK_FALSE(summary.single_replicate);
    CHECK(summary.metrics.at("ece").mean == doctest::Approx(0.3));
    CHECK(summary.metrics.at("ece").stddev ==
          doctest::Approx(0.1414213562).epsilon(1e-6));  // sample std of {0.2, 0.4}
    CHECK(summary.metrics.at("macro_ce").n_defined == 1);
    CHECK_THROWS_AS(summarize_reports({}), Error);
}

TEST_CASE("replicated runs use distinct derived seeds deterministically") {
    std::vector<std::uint64_t> seeds_first, seeds_second;
    auto factory = [&](std::vector<std::uint64_t>& sink) {
        return [&sink](std::uint64_t seed, int) {
            sink.push_back(seed);
            CalibrationReport r;
            r.ece = static_cast<double>(seed % 1000) / 1000.0;
            return r;
        };
    };
    const auto s1 = replicate_and_summarize(factory(seeds_first), 5, 42);
    const auto s2 = replicate_and_summarize(factory(seeds_second), 5, 42);
    CHECK(seeds_first == seeds_second);
    CHECK(std::set<std::uint64_t>(seeds_first.begin(), seeds_first.end()).size() == 5);
    CHECK(s1.metrics.at("ece").mean == doctest::Approx(s2.metrics.at("ece").mean));
    CHECK_THROWS_AS(replicate_and_summarize(factory(seeds_first), 0, 1), Error);
}

TEST_CASE("run artifacts serialize byte-identically") {
    const auto splits = small_splits(8);
    MockModelSpec spec;
    spec.seed = 12;
    spec.noise_amplitude = 0.08;
    MockBackend mock(spec, truth_of(splits));
    RunOptions options;
    options.mode = InferenceMode::Comparative;
    options.j_sets = 3;
    options.shots = 2;
    ExperimentConfig cfg;

    const auto run1 = run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                    options, cfg, 88);
    const auto run2 = run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                    options, cfg, 88);
    CHECK(run_to_json(run1).dump() == run_to_json(run2).dump());

    const auto round = run_from_json(run_to_json(run1));
    CHECK(run_to_json(round).dump() == run_to_json(run1).dump());

    // a different replicate seed reads different references
    const auto run3 = run_condition(splits, trec_template(), testutil::binary_space(), mock,
                                    options, cfg, 89);
    CHECK(run_to_json(run3).dump() != run_to_json(run1).dump());
}
