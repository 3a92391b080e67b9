#pragma once

#include <vector>

#include "llmcal/orchestrator.hpp"
#include "llmcal/serialize.hpp"

namespace llmcal {

// Cross-condition summary over run artifacts: per-condition metric table
// (mean +/- sample std across replicates), pooled reliability-diagram data,
// config snapshot, and provenance. Deterministic for a given artifact set.
ojson build_report_bundle(const std::vector<EvaluationRun>& runs);

// Reliability CSV for one condition group (pooled over its runs).
std::string bundle_reliability_csv(const std::vector<EvaluationRun>& runs,
                                   const std::string& condition_key);

// Stable grouping key for a run's condition.
std::string condition_key(const EvaluationRun& run);

}  // namespace llmcal
