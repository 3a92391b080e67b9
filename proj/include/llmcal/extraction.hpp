#pragma once

#include <map>
#include <string>

#include "llmcal/types.hpp"

namespace llmcal {

// Top-logprobs distribution at one generation position.
struct TokenDistribution {
    std::map<std::string, double> entries;  // token -> log-probability (<= 0)
    std::string position_note;
};

enum class TokenMatchRule {
    TrimAndFold,  // strip at most one leading whitespace, then case-fold
    Exact,
};

// Sums exp(logprob) over each label's token variants. Absent variants
// contribute zero; zero total mass in raw mode yields a degenerate estimate,
// in normalized mode it is an error.
ProbabilityEstimate extract_label_distribution(const TokenDistribution& dist,
                                               const LabelSpace& space, bool normalize,
                                               TokenMatchRule rule = TokenMatchRule::TrimAndFold);

// Scales a positive-mass estimate to sum 1; predicted index is unchanged.
ProbabilityEstimate renormalize(const ProbabilityEstimate& est);

// Canonical token form under a match rule (exposed for the backend skip rule).
std::string canonical_token(const std::string& token, TokenMatchRule rule);

}  // namespace llmcal
