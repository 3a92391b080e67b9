#include "llmcal/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "llmcal/dataset.hpp"
#include "llmcal/errors.hpp"

namespace llmcal {

std::string canonical_token(const std::string& token, TokenMatchRule rule) {
    if (rule == TokenMatchRule::Exact) return token;
    std::string out = token;
    if (!out.empty() && (out.front() == ' ' || out.front() == '\t')) out.erase(out.begin());
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

ProbabilityEstimate extract_label_distribution(const TokenDistribution& dist,
                                               const LabelSpace& space, bool normalize,
                                               TokenMatchRule rule) {
    require_valid(space);
    if (dist.entries.empty()) {
        throw Error(ErrorCode::Argument, "empty token distribution");
    }

    std::unordered_map<std::string, double> mass;
    for (const auto& [token, logprob] : dist.entries) {
        mass[canonical_token(token, rule)] += std::exp(logprob);
    }

    std::vector<double> probs(space.k(), 0.0);
    for (int i = 0; i < space.k(); ++i) {
        for (const auto& variant : space.token_variants[i]) {
            auto it = mass.find(canonical_token(variant, rule));
            if (it != mass.end()) probs[i] += it->second;
        }
    }

    double total = 0.0;
    for (double p : probs) total += p;
    if (total <= 0.0) {
        if (normalize) {
            throw Error(ErrorCode::ZeroMass,
                        "no label token mass in distribution (" + dist.position_note + ")");
        }
        return make_estimate(std::move(probs), false, /*degenerate=*/true);
    }
    if (normalize) {
        for (double& p : probs) p /= total;
        return make_estimate(std::move(probs), true);
    }
    return make_estimate(std::move(probs), false);
}

ProbabilityEstimate renormalize(const ProbabilityEstimate& est) {
    double total = 0.0;
    for (double p : est.probs) total += p;
    if (total <= 0.0) throw Error(ErrorCode::ZeroMass, "cannot renormalize zero-mass estimate");
    std::vector<double> probs = est.probs;
    for (double& p : probs) p /= total;
    return make_estimate(std::move(probs), true);
}

}  // namespace llmcal
