#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "llmcal/backend.hpp"
#include "llmcal/dataset.hpp"
#include "llmcal/errors.hpp"
#include "llmcal/extraction.hpp"
#include "llmcal/metrics.hpp"
#include "llmcal/orchestrator.hpp"
#include "llmcal/posthoc.hpp"
#include "llmcal/report.hpp"
#include "llmcal/rng.hpp"
#include "llmcal/serialize.hpp"
#include "llmcal/simulator.hpp"

namespace {

using namespace llmcal;

struct CommonFlags {
    std::string config_path;
    int bins = -1;
    int dkl_bins = -1;
    double dkl_smoothing = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void apply_overrides(ExperimentConfig& config, const CommonFlags& flags) {
    if (flags.bins > 0) config.n_bins = flags.bins;
    if (flags.dkl_bins > 0) config.dkl_bins = flags.dkl_bins;
    if (flags.dkl_smoothing > 0.0) config.dkl_smoothing = flags.dkl_smoothing;
    if (flags.seed_set) config.master_seed = flags.seed;
}

std::string summary_line(const CalibrationReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "n=%ld acc=%.4f f1=%.4f ece=%.4f ice=%.4f macro_ce=%s dkl=%s", report.n,
                  report.accuracy, report.macro_f1, report.ece, report.ice,
                  report.macro_ce.defined ? std::to_string(report.macro_ce.value).c_str()
                                          : report.macro_ce.reason.c_str(),
                  report.dkl.defined ? std::to_string(report.dkl.value).c_str()
                                     : report.dkl.reason.c_str());
    return buf;
}

std::map<std::string, int> truth_map(const DatasetSplits& splits) {
    std::map<std::string, int> truth;
    auto add = [&](const std::vector<Sample>& samples) {
        for (const auto& s : samples) {
            if (s.label) truth[s.id] = *s.label;
        }
    };
    add(splits.test);
    add(splits.validation);
    add(splits.reference_pool);
    add(splits.demo_pool);
    return truth;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& dataset_path,
                 const std::string& backend_uri, const std::string& mode, int shots, int refs,
                 int j_sets, int replicate, int parallelism, const std::string& decode,
                 const std::string& extraction, int target_position, const std::string& out_path) {
    if (!std::filesystem::exists(dataset_path)) {
        throw Error(ErrorCode::Io, "dataset path does not exist: " + dataset_path);
    }
    ProjectConfig project = load_project_config(flags.config_path);
    apply_overrides(project.experiment, flags);
    if (refs > 0) project.experiment.n_references = refs;

    const DatasetSplits splits = load_dataset(dataset_path, project.space, project.experiment,
                                              project.experiment.master_seed);
    auto backend = make_backend(backend_uri, project.space, truth_map(splits));

    RunOptions options;
    options.mode = mode == "comparative" ? InferenceMode::Comparative : InferenceMode::Independent;
    options.shots = shots;
    options.decode = decode == "per-label" ? DecodeStrategy::PerLabelScoring
                                           : DecodeStrategy::FirstToken;
    options.normalize_extraction = extraction == "normalized";
    options.parallelism = parallelism;
    options.target_position = target_position;
    options.j_sets = j_sets;

    const std::uint64_t replicate_seed =
        derive_seed(project.experiment.master_seed, "replicate", replicate);
    const EvaluationRun run = run_condition(splits, project.prompt_template, project.space,
                                            *backend, options, project.experiment, replicate_seed);
    write_run(run, out_path);

    const auto report =
        compute_report(ok_records(run.records), project.space.k(), project.experiment);
    std::cout << out_path << " " << summary_line(report) << "\n";
    return 0;
}

std::map<int, std::vector<PredictionRecord>> collect_reference_runs(
    const std::vector<std::string>& artifact_paths, EvaluationRun& carrier) {
    std::map<int, std::vector<PredictionRecord>> per_reference;
    if (artifact_paths.size() == 1) {
        carrier = read_run(artifact_paths.front());
        if (!carrier.per_reference_runs.empty()) return carrier.per_reference_runs;
        per_reference[1] = carrier.records;
        return per_reference;
    }
    int j = 0;
    for (const auto& path : artifact_paths) {
        EvaluationRun run = read_run(path);
        if (j == 0) carrier = run;
        per_reference[++j] = std::move(run.records);
    }
    return per_reference;
}

int cmd_aggregate(const std::vector<std::string>& artifact_paths, const std::string& out_path,
                  const std::string& trend_path) {
    EvaluationRun carrier;
    const auto per_reference = collect_reference_runs(artifact_paths, carrier);

    // ECE/F1 versus number of aggregated reference sets
    ojson trend = ojson::array();
    std::map<int, std::vector<PredictionRecord>> prefix;
    for (const auto& [set_id, records] : per_reference) {
        prefix[set_id] = records;
        const auto aggregated = aggregate_comparative(prefix);
        const auto report = compute_report(ok_records(aggregated), carrier.label_space.k(),
                                           carrier.config);
        ojson row;
        row["j"] = static_cast<int>(prefix.size());
        row["ece"] = round_sig6(report.ece);
        row["macro_f1"] = round_sig6(report.macro_f1);
        row["accuracy"] = round_sig6(report.accuracy);
        trend.push_back(row);
    }

    EvaluationRun aggregated_run = carrier;
    aggregated_run.records = aggregate_comparative(per_reference);
    aggregated_run.per_reference_runs.clear();
    aggregated_run.condition.aggregated = true;
    aggregated_run.condition.reference_set_id.reset();
    aggregated_run.n_failures = 0;
    for (const auto& r : aggregated_run.records) {
        if (r.failure) ++aggregated_run.n_failures;
    }
    write_run(aggregated_run, out_path);
    if (!trend_path.empty()) {
        ojson doc;
        doc["schema"] = "llmcal.trend/1";
        doc["rows"] = trend;
        write_json_file(trend_path, doc);
    }
    const auto report = compute_report(ok_records(aggregated_run.records),
                                       carrier.label_space.k(), carrier.config);
    std::cout << out_path << " J=" << per_reference.size() << " " << summary_line(report) << "\n";
    return 0;
}

ReferenceFitData fit_data_from_records(const std::vector<PredictionRecord>& records) {
    ReferenceFitData data;
    for (const auto& r : records) {
        if (r.failure || r.estimate.degenerate) continue;
        data.estimates.push_back(renormalize(r.estimate));
        data.labels.push_back(r.true_label);
    }
    return data;
}

int cmd_calibrate(const std::string& test_path, const std::string& val_path,
                  const std::string& kind_str, const FitConfig& fit_cfg,
                  const std::string& calibrator_path, const std::string& report_path) {
    EvaluationRun test_run;
    EvaluationRun val_run;
    const auto test_refs = collect_reference_runs({test_path}, test_run);
    const auto val_refs = collect_reference_runs({val_path}, val_run);
    if (test_refs.size() != val_refs.size()) {
        throw Error(ErrorCode::Alignment, "test and validation artifacts disagree on J");
    }
    const CalibratorKind kind = kind_from_name(kind_str);

    std::map<int, ReferenceFitData> fit_data;
    for (const auto& [set_id, records] : val_refs) {
        auto data = fit_data_from_records(records);
        if (data.labels.empty()) {
            throw Error(ErrorCode::Argument,
                        "validation artifact has no labeled usable records for set " +
                            std::to_string(set_id));
        }
        fit_data[set_id] = std::move(data);
    }
    const auto calibrator = fit_comparative(fit_data, kind, fit_cfg);
    write_json_file(calibrator_path, calibrator_to_json(calibrator));

    // before: aggregated uncalibrated; after: comparative calibrator output
    const auto before_records = aggregate_comparative(test_refs);
    std::vector<PredictionRecord> after_records;
    const std::size_t n = test_refs.begin()->second.size();
    for (std::size_t i = 0; i < n; ++i) {
        PredictionRecord rec = test_refs.begin()->second[i];
        bool usable = true;
        std::map<int, ProbabilityEstimate> per_ref;
        for (const auto& [set_id, records] : test_refs) {
            const auto& r = records[i];
            if (r.failure || r.estimate.degenerate) {
                usable = false;
                break;
            }
            per_ref[set_id] = renormalize(r.estimate);
        }
        if (!usable) {
            rec.failure = "failure in at least one per-reference run";
        } else {
            rec.estimate = apply_comparative(calibrator, per_ref);
            rec.failure.reset();
        }
        rec.condition.aggregated = true;
        after_records.push_back(std::move(rec));
    }

    const int k = test_run.label_space.k();
    ojson out;
    out["schema"] = "llmcal.calibration_report/1";
    out["kind"] = kind_str;
    out["j"] = static_cast<int>(test_refs.size());
    out["before"] = report_to_json(compute_report(ok_records(before_records), k, test_run.config));
    out["after"] = report_to_json(compute_report(ok_records(after_records), k, test_run.config));
    write_json_file(report_path, out);
    std::cout << calibrator_path << " kind=" << kind_str << " J=" << test_refs.size() << "\n"
              << "before " << summary_line(compute_report(ok_records(before_records), k, test_run.config))
              << "\nafter  " << summary_line(compute_report(ok_records(after_records), k, test_run.config))
              << "\n";
    return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_path,
                 const std::string& report_path, const std::string& csv_path) {
    const ScenarioSpec spec = scenario_from_json(read_json_file(spec_path));
    const auto records = generate_scenario(spec);

    EvaluationRun run;
    run.records = records;
    run.label_space.labels = {"A", "B"};
    run.label_space.token_variants = {{"A"}, {"B"}};
    run.backend = "simulator";
    run.decode = "first_token";
    run.extraction_mode = "raw";
    run.condition.replicate_seed = spec.seed;
    run.config.master_seed = spec.seed;
    write_run(run, out_path);

    const auto report = compute_report(records, 2, run.config);
    if (!report_path.empty()) {
        ojson doc;
        doc["schema"] = "llmcal.simulation_report/1";
        doc["scenario"] = scenario_to_json(spec);
        doc["report"] = report_to_json(report);
        doc["reliability"] = diagram_to_json(bin_predictions(records, run.config.n_bins));
        write_json_file(report_path, doc);
    }
    if (!csv_path.empty()) {
        write_text_file(csv_path, diagram_to_csv(bin_predictions(records, run.config.n_bins)));
    }
    std::cout << out_path << " " << summary_line(report) << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& artifact_paths, const std::string& out_path,
               const std::string& csv_dir) {
    if (artifact_paths.empty()) throw Error(ErrorCode::Argument, "need at least one artifact");
    std::vector<EvaluationRun> runs;
    for (const auto& path : artifact_paths) runs.push_back(read_run(path));
    const ojson bundle = build_report_bundle(runs);
    write_json_file(out_path, bundle);
    if (!csv_dir.empty()) {
        std::filesystem::create_directories(csv_dir);
        int index = 0;
        for (const auto& [key, entry] : bundle["conditions"].items()) {
            (void)entry;
            const std::string csv = bundle_reliability_csv(runs, key);
            write_text_file(csv_dir + "/condition_" + std::to_string(++index) + ".csv", csv);
        }
    }
    std::cout << out_path << " conditions=" << bundle["conditions"].size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM classifier calibration toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run an evaluation condition");
    std::string dataset_path, backend_uri = "mock:mock.json", mode = "independent";
    std::string decode = "first-token", extraction = "raw", out_path = "run.json";
    int shots = 0, refs = -1, j_sets = 1, replicate = 1, parallelism = 1, target_position = 1;
    evaluate->add_option("--config", flags.config_path, "project config JSON")->required();
    evaluate->add_option("--dataset", dataset_path, "JSONL dataset")->required();
    evaluate->add_option("--backend", backend_uri, "mock:<fixture> or http(s)://base|model");
    evaluate->add_option("--mode", mode)->check(CLI::IsMember({"independent", "comparative"}));
    evaluate->add_option("--shots", shots);
    evaluate->add_option("--refs", refs, "comparison references per prompt");
    evaluate->add_option("--j", j_sets, "reference sets evaluated per sample");
    evaluate->add_option("--replicate", replicate, "replicate index (seeds derive from it)");
    evaluate->add_option("--parallelism", parallelism);
    evaluate->add_option("--decode", decode)->check(CLI::IsMember({"first-token", "per-label"}));
    evaluate->add_option("--extraction", extraction)->check(CLI::IsMember({"raw", "normalized"}));
    evaluate->add_option("--target-position", target_position);
    evaluate->add_option("--out", out_path);
    evaluate->add_option("--bins", flags.bins);
    evaluate->add_option("--dkl-bins", flags.dkl_bins);
    evaluate->add_option("--dkl-smoothing", flags.dkl_smoothing);
    evaluate->add_option("--seed", flags.seed)->each([&](const std::string&) {
        flags.seed_set = true;
    });

    // aggregate
    auto* aggregate = app.add_subcommand("aggregate", "aggregate comparative runs over J");
    std::vector<std::string> agg_inputs;
    std::string agg_out = "aggregated.json", trend_path;
    aggregate->add_option("inputs", agg_inputs, "run artifacts (j = 1..J)")->required();
    aggregate->add_option("--out", agg_out);
    aggregate->add_option("--trend", trend_path, "ECE/F1-versus-J table output");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "fit and apply affine calibrators");
    std::string cal_test, cal_val, cal_kind = "vector";
    std::string cal_out = "calibrator.json", cal_report = "calibration_report.json";
    FitConfig fit_cfg;
    calibrate->add_option("--test", cal_test, "test run artifact")->required();
    calibrate->add_option("--val", cal_val, "validation run artifact")->required();
    calibrate->add_option("--kind", cal_kind)
        ->check(CLI::IsMember({"temperature", "vector", "matrix"}));
    calibrate->add_option("--out", cal_out);
    calibrate->add_option("--report", cal_report);
    calibrate->add_option("--max-iters", fit_cfg.max_iters);
    calibrate->add_option("--learning-rate", fit_cfg.learning_rate);
    calibrate->add_option("--fit-tolerance", fit_cfg.tolerance);
    calibrate->add_option("--l2-weight", fit_cfg.l2_weight);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic population");
    std::string sim_spec, sim_out = "population.json", sim_report, sim_csv;
    simulate->add_option("--spec", sim_spec, "scenario spec JSON")->required();
    simulate->add_option("--out", sim_out);
    simulate->add_option("--report", sim_report);
    simulate->add_option("--csv", sim_csv, "reliability diagram CSV");

    // report
    auto* report = app.add_subcommand("report", "build a cross-condition report bundle");
    std::vector<std::string> report_inputs;
    std::string report_out = "bundle.json", csv_dir;
    report->add_option("inputs", report_inputs, "run artifacts")->required();
    report->add_option("--out", report_out);
    report->add_option("--csv-dir", csv_dir, "write per-condition reliability CSVs here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (evaluate->parsed()) {
            return cmd_evaluate(flags, dataset_path, backend_uri, mode, shots, refs, j_sets,
                                replicate, parallelism, decode, extraction, target_position,
                                out_path);
        }
        if (aggregate->parsed()) return cmd_aggregate(agg_inputs, agg_out, trend_path);
        if (calibrate->parsed()) {
            return cmd_calibrate(cal_test, cal_val, cal_kind, fit_cfg, cal_out, cal_report);
        }
        if (simulate->parsed()) return cmd_simulate(sim_spec, sim_out, sim_report, sim_csv);
        if (report->parsed()) return cmd_report(report_inputs, report_out, csv_dir);
    } catch (const llmcal::Error& e) {
        nlohmann::ordered_json err;
        err["error"] = e.code_name();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = "internal";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
