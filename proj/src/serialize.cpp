#include "llmcal/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "llmcal/dataset.hpp"
#include "llmcal/errors.hpp"

namespace llmcal {

namespace {

constexpr const char* kRunSchema = "llmcal.run/1";
constexpr const char* kCalibratorSchema = "llmcal.calibrator/1";

std::string mode_name(InferenceMode mode) {
    return mode == InferenceMode::Independent ? "independent" : "comparative";
}

InferenceMode mode_from_name(const std::string& name) {
    if (name == "independent") return InferenceMode::Independent;
    if (name == "comparative") return InferenceMode::Comparative;
    throw Error(ErrorCode::Schema, "unknown inference mode: " + name);
}

ojson record_to_json(const PredictionRecord& rec) {
    ojson j;
    j["sample_id"] = rec.sample_id;
    j["true_label"] = rec.true_label;
    j["probs"] = rec.estimate.probs;
    j["normalized"] = rec.estimate.normalized;
    j["degenerate"] = rec.estimate.degenerate;
    j["predicted"] = rec.estimate.predicted;
    j["confidence"] = rec.estimate.confidence;
    if (rec.condition.reference_set_id) j["reference_set_id"] = *rec.condition.reference_set_id;
    if (rec.failure) j["failure"] = *rec.failure;
    return j;
}

PredictionRecord record_from_json(const ojson& j, const ConditionTag& base) {
    PredictionRecord rec;
    rec.sample_id = j.at("sample_id").get<std::string>();
    rec.true_label = j.at("true_label").get<int>();
    rec.estimate = make_estimate(j.at("probs").get<std::vector<double>>(),
                                 j.at("normalized").get<bool>(),
                                 j.value("degenerate", false));
    rec.condition = base;
    if (j.contains("reference_set_id")) {
        rec.condition.reference_set_id = j["reference_set_id"].get<int>();
    }
    if (j.contains("failure")) rec.failure = j["failure"].get<std::string>();
    return rec;
}

}  // namespace

double round_sig6(double v) {
    if (v == 0.0) return 0.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::strtod(buf, nullptr);
}

ojson estimate_to_json(const ProbabilityEstimate& est) {
    ojson j;
    j["probs"] = est.probs;
    j["normalized"] = est.normalized;
    j["degenerate"] = est.degenerate;
    j["predicted"] = est.predicted;
    j["confidence"] = est.confidence;
    return j;
}

ProbabilityEstimate estimate_from_json(const ojson& j) {
    return make_estimate(j.at("probs").get<std::vector<double>>(), j.at("normalized").get<bool>(),
                         j.value("degenerate", false));
}

ojson label_space_to_json(const LabelSpace& space) {
    ojson j;
    j["labels"] = space.labels;
    j["token_variants"] = space.token_variants;
    return j;
}

LabelSpace label_space_from_json(const ojson& j) {
    LabelSpace space;
    space.labels = j.at("labels").get<std::vector<std::string>>();
    if (j.contains("token_variants")) {
        space.token_variants = j["token_variants"].get<std::vector<std::vector<std::string>>>();
    } else {
        for (const auto& name : space.labels) space.token_variants.push_back({name});
    }
    require_valid(space);
    return space;
}

ojson config_to_json(const ExperimentConfig& config) {
    ojson j;
    j["n_bins"] = config.n_bins;
    j["n_references"] = config.n_references;
    j["aggregation_j"] = config.aggregation_j;
    j["n_replicates"] = config.n_replicates;
    j["test_cap"] = config.test_cap;
    j["val_cap"] = config.val_cap;
    j["dkl_bins"] = config.dkl_bins;
    j["dkl_smoothing"] = config.dkl_smoothing;
    j["master_seed"] = config.master_seed;
    return j;
}

ExperimentConfig config_from_json(const ojson& j) {
    ExperimentConfig c;
    c.n_bins = j.value("n_bins", c.n_bins);
    c.n_references = j.value("n_references", c.n_references);
    c.aggregation_j = j.value("aggregation_j", c.aggregation_j);
    c.n_replicates = j.value("n_replicates", c.n_replicates);
    c.test_cap = j.value("test_cap", c.test_cap);
    c.val_cap = j.value("val_cap", c.val_cap);
    c.dkl_bins = j.value("dkl_bins", c.dkl_bins);
    c.dkl_smoothing = j.value("dkl_smoothing", c.dkl_smoothing);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (c.n_bins < 1 || c.n_references < 1 || c.aggregation_j < 1 || c.n_replicates < 1 ||
        c.test_cap < 1 || c.val_cap < 1 || c.dkl_bins < 1 || !(c.dkl_smoothing > 0.0)) {
        throw Error(ErrorCode::Schema, "experiment config values out of range");
    }
    return c;
}

ojson run_to_json(const EvaluationRun& run) {
    ojson j;
    j["schema"] = kRunSchema;
    j["backend"] = run.backend;
    j["decode"] = run.decode;
    j["extraction_mode"] = run.extraction_mode;
    ojson cond;
    cond["mode"] = mode_name(run.condition.mode);
    cond["shots"] = run.condition.shots;
    cond["target_position"] = run.condition.target_position;
    cond["replicate_seed"] = run.condition.replicate_seed;
    cond["aggregated"] = run.condition.aggregated;
    j["condition"] = cond;
    j["config"] = config_to_json(run.config);
    j["label_space"] = label_space_to_json(run.label_space);
    j["n_failures"] = run.n_failures;
    ojson records = ojson::array();
    for (const auto& r : run.records) records.push_back(record_to_json(r));
    j["records"] = records;
    if (!run.per_reference_runs.empty()) {
        ojson prr;
        for (const auto& [set_id, recs] : run.per_reference_runs) {
            ojson arr = ojson::array();
            for (const auto& r : recs) arr.push_back(record_to_json(r));
            prr[std::to_string(set_id)] = arr;
        }
        j["per_reference_runs"] = prr;
    }
    return j;
}

EvaluationRun run_from_json(const ojson& j) {
    if (j.value("schema", "") != kRunSchema) {
        throw Error(ErrorCode::Schema, "not a run artifact (schema mismatch)");
    }
    EvaluationRun run;
    run.backend = j.value("backend", "");
    run.decode = j.value("decode", "first_token");
    run.extraction_mode = j.value("extraction_mode", "raw");
    const ojson& cond = j.at("condition");
    run.condition.mode = mode_from_name(cond.at("mode").get<std::string>());
    run.condition.shots = cond.at("shots").get<int>();
    run.condition.target_position = cond.at("target_position").get<int>();
    run.condition.replicate_seed = cond.at("replicate_seed").get<std::uint64_t>();
    run.condition.aggregated = cond.value("aggregated", false);
    run.config = config_from_json(j.at("config"));
    run.label_space = label_space_from_json(j.at("label_space"));
    run.n_failures = j.value("n_failures", 0L);
    for (const auto& r : j.at("records")) {
        run.records.push_back(record_from_json(r, run.condition));
    }
    if (j.contains("per_reference_runs")) {
        for (const auto& [key, arr] : j["per_reference_runs"].items()) {
            auto& bucket = run.per_reference_runs[std::stoi(key)];
            for (const auto& r : arr) bucket.push_back(record_from_json(r, run.condition));
        }
    }
    return run;
}

void write_run(const EvaluationRun& run, const std::string& path) {
    write_json_file(path, run_to_json(run));
}

EvaluationRun read_run(const std::string& path) { return run_from_json(read_json_file(path)); }

ojson calibrator_to_json(const ComparativeCalibrator& cal) {
    ojson j;
    j["schema"] = kCalibratorSchema;
    ojson per;
    for (const auto& [set_id, sub] : cal.per_reference) {
        ojson c;
        c["kind"] = kind_name(sub.kind);
        c["k"] = sub.k;
        c["weight"] = sub.weight;  // row-major
        c["bias"] = sub.bias;
        if (sub.kind == CalibratorKind::Temperature) c["temperature"] = sub.temperature;
        per[std::to_string(set_id)] = c;
    }
    j["per_reference"] = per;
    return j;
}

ComparativeCalibrator calibrator_from_json(const ojson& j) {
    if (j.value("schema", "") != kCalibratorSchema) {
        throw Error(ErrorCode::Schema, "not a calibrator file (schema mismatch)");
    }
    ComparativeCalibrator cal;
    for (const auto& [key, c] : j.at("per_reference").items()) {
        AffineCalibrator sub;
        sub.kind = kind_from_name(c.at("kind").get<std::string>());
        sub.k = c.at("k").get<int>();
        sub.weight = c.at("weight").get<std::vector<double>>();
        sub.bias = c.at("bias").get<std::vector<double>>();
        sub.temperature = c.value("temperature", 1.0);
        if (static_cast<int>(sub.weight.size()) != sub.k * sub.k ||
            static_cast<int>(sub.bias.size()) != sub.k) {
            throw Error(ErrorCode::Schema, "calibrator dimensions inconsistent");
        }
        cal.per_reference[std::stoi(key)] = std::move(sub);
    }
    return cal;
}

ojson metric_to_json(const MetricValue& value) {
    ojson j;
    if (value.defined) {
        j["status"] = "ok";
        j["value"] = round_sig6(value.value);
    } else {
        j["status"] = "undefined";
        j["reason"] = value.reason;
    }
    return j;
}

ojson report_to_json(const CalibrationReport& report) {
    ojson j;
    j["ece"] = round_sig6(report.ece);
    j["ice"] = round_sig6(report.ice);
    j["ice_pos"] = metric_to_json(report.ice_pos);
    j["ice_neg"] = metric_to_json(report.ice_neg);
    j["macro_ce"] = metric_to_json(report.macro_ce);
    j["dkl"] = metric_to_json(report.dkl);
    j["accuracy"] = round_sig6(report.accuracy);
    j["macro_f1"] = round_sig6(report.macro_f1);
    j["n"] = report.n;
    j["n_correct"] = report.n_correct;
    j["n_incorrect"] = report.n_incorrect;
    return j;
}

ojson diagram_to_json(const ReliabilityDiagram& diagram) {
    ojson bins = ojson::array();
    for (const auto& b : diagram.bins) {
        ojson jb;
        jb["lower"] = round_sig6(b.lower);
        jb["upper"] = round_sig6(b.upper);
        jb["count"] = b.count;
        if (!b.empty) {
            jb["mean_confidence"] = round_sig6(b.mean_confidence);
            jb["accuracy"] = round_sig6(b.accuracy);
        }
        bins.push_back(jb);
    }
    ojson j;
    j["n_bins"] = diagram.n_bins;
    j["n"] = diagram.n;
    j["bins"] = bins;
    return j;
}

std::string diagram_to_csv(const ReliabilityDiagram& diagram) {
    std::ostringstream out;
    out << "bin_lower,bin_upper,mean_confidence,accuracy,count\n";
    for (const auto& b : diagram.bins) {
        char line[160];
        if (b.empty) {
            std::snprintf(line, sizeof(line), "%.6g,%.6g,,,%ld\n", b.lower, b.upper, b.count);
        } else {
            std::snprintf(line, sizeof(line), "%.6g,%.6g,%.6g,%.6g,%ld\n", b.lower, b.upper,
                          b.mean_confidence, b.accuracy, b.count);
        }
        out << line;
    }
    return out.str();
}

ojson scenario_to_json(const ScenarioSpec& spec) {
    ojson j;
    j["n"] = spec.n;
    j["correct_conf"] = {{"mean", spec.correct_conf.mean},
                         {"concentration", spec.correct_conf.concentration}};
    j["incorrect_conf"] = {{"mean", spec.incorrect_conf.mean},
                           {"concentration", spec.incorrect_conf.concentration}};
    j["profile"] =
        spec.profile == AccuracyProfile::Indiscriminate ? "indiscriminate" : "conventional";
    j["p_correct"] = spec.p_correct;
    j["per_bin_accuracy"] = spec.per_bin_accuracy;
    j["seed"] = spec.seed;
    return j;
}

ScenarioSpec scenario_from_json(const ojson& j) {
    ScenarioSpec spec;
    if (!j.contains("n")) throw Error(ErrorCode::Schema, "scenario: missing field 'n'");
    spec.n = j["n"].get<long>();
    auto read_dist = [&](const char* field, ConfidenceDist& d) {
        if (!j.contains(field)) return;
        d.mean = j[field].value("mean", d.mean);
        d.concentration = j[field].value("concentration", d.concentration);
    };
    read_dist("correct_conf", spec.correct_conf);
    read_dist("incorrect_conf", spec.incorrect_conf);
    const std::string profile = j.value("profile", "indiscriminate");
    if (profile == "indiscriminate") {
        spec.profile = AccuracyProfile::Indiscriminate;
    } else if (profile == "conventional") {
        spec.profile = AccuracyProfile::Conventional;
    } else {
        throw Error(ErrorCode::Schema, "scenario: unknown profile '" + profile + "'");
    }
    spec.p_correct = j.value("p_correct", spec.p_correct);
    if (j.contains("per_bin_accuracy")) {
        spec.per_bin_accuracy = j["per_bin_accuracy"].get<std::vector<double>>();
    }
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

ProjectConfig load_project_config(const std::string& path) {
    const ojson j = read_json_file(path);
    ProjectConfig cfg;
    if (!j.contains("label_space")) {
        throw Error(ErrorCode::Schema, "config: missing field 'label_space'");
    }
    cfg.space = label_space_from_json(j["label_space"]);
    cfg.experiment = j.contains("experiment") ? config_from_json(j["experiment"])
                                              : ExperimentConfig{};
    if (j.contains("template")) {
        const ojson& t = j["template"];
        if (t.is_string()) {
            const std::string name = t.get<std::string>();
            if (name == "trec") {
                cfg.prompt_template = trec_template();
            } else if (name == "agnews") {
                cfg.prompt_template = agnews_template();
            } else {
                throw Error(ErrorCode::Schema, "config: unknown built-in template '" + name + "'");
            }
        } else {
            TaskTemplate& tt = cfg.prompt_template;
            tt = trec_template();  // field-level overrides on the TREC shape
            tt.task_definition = t.value("task_definition", tt.task_definition);
            tt.item_noun = t.value("item_noun", tt.item_noun);
            tt.item_plural = t.value("item_plural", tt.item_plural);
            tt.item_tag = t.value("item_tag", tt.item_tag);
            tt.single_query_format = t.value("single_query_format", tt.single_query_format);
            tt.answer_prefix_single = t.value("answer_prefix_single", tt.answer_prefix_single);
            tt.demo_intro = t.value("demo_intro", tt.demo_intro);
            tt.demo_item_format = t.value("demo_item_format", tt.demo_item_format);
            tt.demo_answer_intro = t.value("demo_answer_intro", tt.demo_answer_intro);
            tt.demo_answer_format = t.value("demo_answer_format", tt.demo_answer_format);
            tt.comparative_intro_format =
                t.value("comparative_intro_format", tt.comparative_intro_format);
            tt.comparative_item_format =
                t.value("comparative_item_format", tt.comparative_item_format);
            tt.answer_prefix_comparative =
                t.value("answer_prefix_comparative", tt.answer_prefix_comparative);
        }
    } else {
        cfg.prompt_template = trec_template();
    }
    if (j.contains("fit")) {
        const ojson& f = j["fit"];
        cfg.fit.max_iters = f.value("max_iters", cfg.fit.max_iters);
        cfg.fit.learning_rate = f.value("learning_rate", cfg.fit.learning_rate);
        cfg.fit.tolerance = f.value("tolerance", cfg.fit.tolerance);
        cfg.fit.l2_weight = f.value("l2_weight", cfg.fit.l2_weight);
    }
    return cfg;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write file: " + path);
    out << content;
}

ojson read_json_file(const std::string& path) {
    try {
        return ojson::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const ojson& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace llmcal
