#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "llmcal/extraction.hpp"
#include "llmcal/prompting.hpp"
#include "llmcal/types.hpp"

namespace llmcal {

enum class DecodeStrategy { FirstToken, PerLabelScoring };

struct BackendRequest {
    PromptSpec prompt;
    LabelSpace label_space;
    int max_tokens = 16;
    int top_logprobs = 20;
    DecodeStrategy decode = DecodeStrategy::FirstToken;
    std::optional<int> reference_set_id;  // j index for comparative prompts
};

struct ScoreResult {
    std::optional<TokenDistribution> dist;
    std::string error;  // set when the request failed permanently
    int attempts = 1;

    bool ok() const { return dist.has_value(); }
};

// One generated token with the top-logprobs alternatives at its position.
struct GeneratedToken {
    std::string token;
    std::map<std::string, double> top_logprobs;
};

using Transcript = std::vector<GeneratedToken>;

// Locates the first content token of the answer_index-th answer in a
// generation like "1). Business. 2). Sports.", skipping enumeration tokens
// (digits, ')', '.', ':', ',', whitespace). Returns nullopt when the answer is
// not present.
std::optional<std::size_t> locate_answer_token(const Transcript& transcript, int answer_index);

class Backend {
public:
    virtual ~Backend() = default;

    // Distribution at the first content token of the answer at the prompt's
    // target position.
    virtual TokenDistribution score_first_answer(const BackendRequest& req) = 0;

    virtual std::string describe() const = 0;

    // Ordered results under bounded concurrency; per-entry retries with
    // exponential backoff. A permanently failing request fails its slot only.
    std::vector<ScoreResult> score_batch(const std::vector<BackendRequest>& requests,
                                         int parallelism, int max_attempts = 4,
                                         int backoff_base_ms = 250);

    // Transient failures are worth retrying; argument/schema errors are not.
    virtual bool retryable(const std::exception& e) const;
};

// Deterministic model stub. Emits label-token distributions either from a
// fixed per-sample table or from a seeded generative rule, with optional
// comparative bias, noise, and position-dependent degradation.
struct MockModelSpec {
    // explicit per-sample distributions: sample id -> token -> probability
    std::map<std::string, std::map<std::string, double>> samples;
    std::set<std::string> fail_ids;  // simulate permanent backend failure

    // generative rule
    double true_weight_mean = 0.75;
    double true_weight_concentration = 5.0;
    double noise_amplitude = 0.0;              // per-(sample, j) zero-sum noise
    std::vector<std::vector<double>> bias_table;  // explicit epsilon_j rows, cycled by j
    std::vector<double> position_decay;        // keep-probability per target position
    std::uint64_t seed = 0;

    static MockModelSpec from_json_file(const std::string& path);
};

class MockBackend : public Backend {
public:
    MockBackend(MockModelSpec spec, std::map<std::string, int> true_labels);

    TokenDistribution score_first_answer(const BackendRequest& req) override;
    std::string describe() const override { return "mock"; }
    // configured mock failures are permanent
    bool retryable(const std::exception&) const override { return false; }

private:
    MockModelSpec spec_;
    std::map<std::string, int> true_labels_;
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. http://host:port/v1
    std::string model;
    std::string api_key;       // usually from environment
    bool chat_wrapper = false; // wrap the prompt as a single user message
    int timeout_sec = 120;
};

// Client for OpenAI-style completion endpoints that return per-token
// top-logprobs.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    TokenDistribution score_first_answer(const BackendRequest& req) override;
    std::string describe() const override { return "http:" + config_.model; }
    bool retryable(const std::exception& e) const override;

private:
    Transcript complete_with_logprobs(const std::string& prompt, int max_tokens,
                                      int top_logprobs);
    double score_continuation(const std::string& prompt, const std::string& continuation);

    HttpBackendConfig config_;
};

std::unique_ptr<Backend> make_backend(const std::string& uri, const LabelSpace& space,
                                      const std::map<std::string, int>& true_labels);

}  // namespace llmcal
