#pragma once

#include <string>

#include <json.hpp>

#include "llmcal/metrics.hpp"
#include "llmcal/orchestrator.hpp"
#include "llmcal/posthoc.hpp"
#include "llmcal/prompting.hpp"
#include "llmcal/simulator.hpp"
#include "llmcal/types.hpp"

namespace llmcal {

using ojson = nlohmann::ordered_json;

// Rounds to 6 significant digits; reports use this for cross-platform
// byte-stable output.
double round_sig6(double v);

ojson estimate_to_json(const ProbabilityEstimate& est);
ProbabilityEstimate estimate_from_json(const ojson& j);

ojson label_space_to_json(const LabelSpace& space);
LabelSpace label_space_from_json(const ojson& j);

ojson config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const ojson& j);

ojson run_to_json(const EvaluationRun& run);
EvaluationRun run_from_json(const ojson& j);

void write_run(const EvaluationRun& run, const std::string& path);
EvaluationRun read_run(const std::string& path);

ojson calibrator_to_json(const ComparativeCalibrator& cal);
ComparativeCalibrator calibrator_from_json(const ojson& j);

ojson metric_to_json(const MetricValue& value);
ojson report_to_json(const CalibrationReport& report);

ojson diagram_to_json(const ReliabilityDiagram& diagram);
std::string diagram_to_csv(const ReliabilityDiagram& diagram);

ojson scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const ojson& j);

// One JSON document holding the label space, experiment config, task
// template, and fit settings.
struct ProjectConfig {
    LabelSpace space;
    ExperimentConfig experiment;
    TaskTemplate prompt_template;
    FitConfig fit;
};

ProjectConfig load_project_config(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
ojson read_json_file(const std::string& path);
void write_json_file(const std::string& path, const ojson& j);

}  // namespace llmcal
