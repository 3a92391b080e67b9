#include <cmath>

#include "llmcal/errors.hpp"
#include "llmcal/types.hpp"

namespace llmcal {

ProbabilityEstimate make_estimate(std::vector<double> probs, bool normalized, bool degenerate) {
    if (probs.empty()) throw Error(ErrorCode::Argument, "empty probability vector");
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw Error(ErrorCode::Argument, "probability entries must be finite and >= 0");
        }
    }
    ProbabilityEstimate est;
    est.probs = std::move(probs);
    est.normalized = normalized;
    est.degenerate = degenerate;
    est.predicted = 0;
    for (int i = 1; i < static_cast<int>(est.probs.size()); ++i) {
        if (est.probs[i] > est.probs[est.predicted]) est.predicted = i;  // lowest-index tie-break
    }
    est.confidence = est.probs[est.predicted];
    return est;
}

}  // namespace llmcal
