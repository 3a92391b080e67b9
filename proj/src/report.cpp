#include "llmcal/report.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "llmcal/errors.hpp"

namespace llmcal {

namespace {

constexpr const char* kBundleSchema = "llmcal.bundle/1";

struct Group {
    std::vector<const EvaluationRun*> runs;
};

std::map<std::string, Group> group_runs(const std::vector<EvaluationRun>& runs) {
    std::map<std::string, Group> groups;
    for (const auto& run : runs) groups[condition_key(run)].runs.push_back(&run);
    return groups;
}

std::vector<PredictionRecord> pooled_ok_records(const Group& group) {
    std::vector<PredictionRecord> pooled;
    for (const auto* run : group.runs) {
        auto ok = ok_records(run->records);
        pooled.insert(pooled.end(), ok.begin(), ok.end());
    }
    return pooled;
}

}  // namespace

std::string condition_key(const EvaluationRun& run) {
    std::ostringstream key;
    key << (run.condition.mode == InferenceMode::Independent ? "independent" : "comparative")
        << "/shots=" << run.condition.shots << "/pos=" << run.condition.target_position
        << (run.condition.aggregated ? "/aggregated" : "") << "/" << run.extraction_mode << "/"
        << run.decode;
    return key.str();
}

ojson build_report_bundle(const std::vector<EvaluationRun>& runs) {
    if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no run artifacts");
    const auto groups = group_runs(runs);

    ojson bundle;
    bundle["schema"] = kBundleSchema;
    bundle["config"] = config_to_json(runs.front().config);

    ojson conditions;
    for (const auto& [key, group] : groups) {
        ojson entry;
        entry["n_runs"] = static_cast<int>(group.runs.size());

        std::vector<CalibrationReport> reports;
        ojson per_replicate = ojson::array();
        ojson seeds = ojson::array();
        long failures = 0;
        for (const auto* run : group.runs) {
            const auto ok = ok_records(run->records);
            if (ok.empty()) {
                throw Error(ErrorCode::EmptyInput, "run with no usable records in " + key);
            }
            const auto report = compute_report(ok, run->label_space.k(), run->config);
            reports.push_back(report);
            per_replicate.push_back(report_to_json(report));
            seeds.push_back(run->condition.replicate_seed);
            failures += run->n_failures;
        }
        const auto summary = summarize_reports(reports);

        ojson metrics;
        for (const auto& [name, ms] : summary.metrics) {
            ojson m;
            m["mean"] = round_sig6(ms.mean);
            m["std"] = round_sig6(ms.stddev);
            m["n_defined"] = ms.n_defined;
            metrics[name] = m;
        }
        // undefined-in-every-replicate metrics keep their reason code visible
        for (const auto& [name, value] : metric_map(reports.front())) {
            if (!summary.metrics.count(name)) metrics[name] = metric_to_json(value);
        }
        entry["metrics"] = metrics;
        entry["single_replicate"] = summary.single_replicate;
        entry["per_replicate"] = per_replicate;

        const auto pooled = pooled_ok_records(group);
        entry["reliability"] =
            diagram_to_json(bin_predictions(pooled, group.runs.front()->config.n_bins));
        ojson provenance;
        provenance["backend"] = group.runs.front()->backend;
        provenance["decode"] = group.runs.front()->decode;
        provenance["extraction_mode"] = group.runs.front()->extraction_mode;
        provenance["replicate_seeds"] = seeds;
        provenance["n_failures"] = failures;
        entry["provenance"] = provenance;
        conditions[key] = entry;
    }
    bundle["conditions"] = conditions;
    return bundle;
}

std::string bundle_reliability_csv(const std::vector<EvaluationRun>& runs,
                                   const std::string& key) {
    const auto groups = group_runs(runs);
    auto it = groups.find(key);
    if (it == groups.end()) {
        throw Error(ErrorCode::Argument, "no condition group named " + key);
    }
    const auto pooled = pooled_ok_records(it->second);
    return diagram_to_csv(bin_predictions(pooled, it->second.runs.front()->config.n_bins));
}

}  // namespace llmcal
