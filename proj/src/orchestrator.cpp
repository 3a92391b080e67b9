#include "llmcal/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "llmcal/errors.hpp"
#include "llmcal/extraction.hpp"
#include "llmcal/rng.hpp"

namespace llmcal {

namespace {

std::vector<DemoExample> draw_demos(const DatasetSplits& splits, const LabelSpace& space,
                                    int shots, std::uint64_t replicate_seed) {
    if (shots == 0) return {};
    if (static_cast<int>(splits.demo_pool.size()) < shots) {
        throw Error(ErrorCode::InsufficientData,
                    "demo pool has " + std::to_string(splits.demo_pool.size()) +
                        " samples; need " + std::to_string(shots));
    }
    auto drawn = sample_references(splits.demo_pool, shots, "", derive_seed(replicate_seed, "demos"));
    std::vector<DemoExample> demos;
    for (const auto& s : drawn) {
        if (!s.label) throw Error(ErrorCode::Argument, "demo without label: " + s.id);
        demos.push_back({s, space.labels[*s.label]});
    }
    return demos;
}

PredictionRecord failed_record(const Sample& sample, const ConditionTag& tag, int k,
                               const std::string& why) {
    PredictionRecord rec;
    rec.sample_id = sample.id;
    rec.estimate = make_estimate(std::vector<double>(k, 0.0), false, /*degenerate=*/true);
    rec.true_label = sample.label.value_or(0);
    rec.condition = tag;
    rec.failure = why;
    return rec;
}

}  // namespace

std::vector<PredictionRecord> ok_records(const std::vector<PredictionRecord>& records) {
    std::vector<PredictionRecord> out;
    for (const auto& r : records) {
        if (!r.failure) out.push_back(r);
    }
    return out;
}

EvaluationRun run_condition(const DatasetSplits& splits, const TaskTemplate& tmpl,
                            const LabelSpace& space, Backend& backend, const RunOptions& options,
                            const ExperimentConfig& config, std::uint64_t replicate_seed) {
    if (splits.test.empty()) throw Error(ErrorCode::EmptyInput, "test split is empty");
    const bool comparative = options.mode == InferenceMode::Comparative;
    if (comparative &&
        static_cast<int>(splits.reference_pool.size()) < config.n_references) {
        throw Error(ErrorCode::InsufficientData, "reference pool smaller than n_references");
    }
    const int j_sets = comparative ? std::max(1, options.j_sets) : 1;
    const auto demos = draw_demos(splits, space, options.shots, replicate_seed);

    // request batch: sample-major, then j
    std::vector<BackendRequest> requests;
    requests.reserve(splits.test.size() * j_sets);
    for (const auto& sample : splits.test) {
        for (int j = 1; j <= j_sets; ++j) {
            std::vector<Sample> refs;
            if (comparative) {
                const std::uint64_t seed =
                    options.fixed_refs_per_replicate
                        ? derive_seed(derive_seed(replicate_seed, "refs"), j)
                        : derive_seed(derive_seed(replicate_seed, "refs", hash_str(sample.id)), j);
                refs = sample_references(splits.reference_pool, config.n_references, sample.id,
                                         seed);
            }
            BackendRequest req;
            req.prompt = build_prompt(tmpl, sample, demos, refs,
                                      comparative ? options.target_position : 1);
            req.label_space = space;
            req.decode = options.decode;
            req.top_logprobs = std::max(req.top_logprobs, space.k());
            if (comparative) req.reference_set_id = j;
            requests.push_back(std::move(req));
        }
    }

    const auto results = backend.score_batch(requests, options.parallelism, options.max_attempts,
                                             options.backoff_base_ms);

    EvaluationRun run;
    run.config = config;
    run.label_space = space;
    run.backend = backend.describe();
    run.decode = options.decode == DecodeStrategy::FirstToken ? "first_token" : "per_label";
    run.extraction_mode = options.normalize_extraction ? "normalized" : "raw";
    run.condition.mode = options.mode;
    run.condition.shots = options.shots;
    run.condition.target_position = comparative ? options.target_position : 1;
    run.condition.replicate_seed = replicate_seed;
    if (comparative) run.condition.reference_set_id = 1;

    long ok_count = 0;
    for (std::size_t s = 0; s < splits.test.size(); ++s) {
        const Sample& sample = splits.test[s];
        if (!sample.label) throw Error(ErrorCode::Argument, "test sample without label: " + sample.id);
        for (int j = 1; j <= j_sets; ++j) {
            const ScoreResult& result = results[s * j_sets + (j - 1)];
            ConditionTag tag = run.condition;
            tag.reference_set_id = comparative ? std::optional<int>(j) : std::nullopt;

            PredictionRecord rec;
            if (result.ok()) {
                try {
                    rec.sample_id = sample.id;
                    rec.true_label = *sample.label;
                    rec.condition = tag;
                    rec.estimate = extract_label_distribution(*result.dist, space,
                                                              options.normalize_extraction);
                    ++ok_count;
                } catch (const Error& e) {
                    rec = failed_record(sample, tag, space.k(), e.what());
                }
            } else {
                rec = failed_record(sample, tag, space.k(), result.error);
            }
            if (rec.failure) ++run.n_failures;
            if (j == 1) run.records.push_back(rec);
            if (j_sets > 1) run.per_reference_runs[j].push_back(std::move(rec));
        }
    }
    if (ok_count == 0) {
        throw Error(ErrorCode::Backend, "every sample failed; first error: " +
                                            (results.empty() ? "" : results.front().error));
    }
    return run;
}

std::vector<PredictionRecord> aggregate_comparative(
    const std::map<int, std::vector<PredictionRecord>>& per_reference_runs) {
    if (per_reference_runs.empty()) {
        throw Error(ErrorCode::EmptyInput, "no per-reference runs to aggregate");
    }
    const auto& first = per_reference_runs.begin()->second;
    for (const auto& [j, records] : per_reference_runs) {
        if (records.size() != first.size()) {
            throw Error(ErrorCode::Alignment,
                        "run " + std::to_string(j) + " covers " + std::to_string(records.size()) +
                            " samples, expected " + std::to_string(first.size()));
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].sample_id != first[i].sample_id) {
                throw Error(ErrorCode::Alignment, "run " + std::to_string(j) +
                                                      " misaligned at sample " +
                                                      records[i].sample_id);
            }
        }
    }

    const int j_count = static_cast<int>(per_reference_runs.size());
    std::vector<PredictionRecord> out;
    out.reserve(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        PredictionRecord rec = first[i];
        rec.condition.aggregated = true;
        rec.condition.reference_set_id.reset();

        bool any_failure = false;
        std::vector<double> mean_probs(first[i].estimate.probs.size(), 0.0);
        bool normalized = true;
        for (const auto& [j, records] : per_reference_runs) {
            const auto& r = records[i];
            if (r.failure) {
                any_failure = true;
                break;
            }
            for (std::size_t c = 0; c < mean_probs.size(); ++c) {
                mean_probs[c] += r.estimate.probs[c];
            }
            normalized = normalized && r.estimate.normalized;
        }
        if (any_failure) {
            rec.failure = "failure in at least one per-reference run";
        } else {
            for (double& p : mean_probs) p /= j_count;
            rec.estimate = make_estimate(std::move(mean_probs), normalized);
            rec.failure.reset();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<PositionAccuracy> position_decay_diagnostic(const DatasetSplits& splits,
                                                        const TaskTemplate& tmpl,
                                                        const LabelSpace& space, Backend& backend,
                                                        const RunOptions& options,
                                                        const ExperimentConfig& config,
                                                        std::uint64_t replicate_seed) {
    std::vector<PositionAccuracy> out;
    for (int pos = 1; pos <= 1 + config.n_references; ++pos) {
        RunOptions pos_options = options;
        pos_options.mode = InferenceMode::Comparative;
        pos_options.target_position = pos;
        pos_options.j_sets = 1;
        const EvaluationRun run =
            run_condition(splits, tmpl, space, backend, pos_options, config, replicate_seed);
        PositionAccuracy pa;
        pa.position = pos;
        const auto usable = ok_records(run.records);
        pa.n = static_cast<long>(usable.size());
        pa.failures = run.n_failures;
        long correct = 0;
        for (const auto& r : usable) {
            if (r.estimate.predicted == r.true_label) ++correct;
        }
        pa.accuracy = pa.n > 0 ? static_cast<double>(correct) / pa.n : 0.0;
        out.push_back(pa);
    }
    return out;
}

std::map<std::string, MetricValue> metric_map(const CalibrationReport& report) {
    std::map<std::string, MetricValue> m;
    m["ece"] = MetricValue::ok(report.ece);
    m["ice"] = MetricValue::ok(report.ice);
    m["ice_pos"] = report.ice_pos;
    m["ice_neg"] = report.ice_neg;
    m["macro_ce"] = report.macro_ce;
    m["dkl"] = report.dkl;
    m["accuracy"] = MetricValue::ok(report.accuracy);
    m["macro_f1"] = MetricValue::ok(report.macro_f1);
    return m;
}

ReplicateSummary summarize_reports(const std::vector<CalibrationReport>& reports) {
    if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to summarize");
    std::map<std::string, std::vector<double>> values;
    for (const auto& report : reports) {
        for (const auto& [name, value] : metric_map(report)) {
            if (value.defined) values[name].push_back(value.value);
        }
    }
    ReplicateSummary summary;
    summary.n_replicates = static_cast<int>(reports.size());
    summary.single_replicate = reports.size() == 1;
    for (const auto& [name, v] : values) {
        MetricSummary ms;
        ms.n_defined = static_cast<long>(v.size());
        double sum = 0.0;
        for (double x : v) sum += x;
        ms.mean = sum / v.size();
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - ms.mean) * (x - ms.mean);
            ms.stddev = std::sqrt(ss / (v.size() - 1));
        }
        summary.metrics[name] = ms;
    }
    return summary;
}

ReplicateSummary replicate_and_summarize(const RunFactory& factory, int n_replicates,
                                         std::uint64_t master_seed) {
    if (n_replicates < 1) throw Error(ErrorCode::Argument, "n_replicates must be >= 1");
    std::vector<CalibrationReport> reports;
    reports.reserve(n_replicates);
    for (int r = 0; r < n_replicates; ++r) {
        const std::uint64_t seed = derive_seed(master_seed, "replicate", r + 1);
        reports.push_back(factory(seed, r + 1));
    }
    return summarize_reports(reports);
}

}  // namespace llmcal
