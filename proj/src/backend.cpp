#include "llmcal/backend.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "llmcal/errors.hpp"
#include "llmcal/rng.hpp"

namespace llmcal {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool separator_only(const std::string& token) {
    const std::string t = trim(token);
    for (char c : t) {
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == ')' || c == '(' || c == '.' ||
              c == ':' || c == ',')) {
            return false;
        }
    }
    return true;  // empty counts as separator
}

// "2" / " 2)." style enumeration marker for a given answer index
bool is_marker(const std::string& token, int index) {
    const std::string t = trim(token);
    if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) return false;
    std::size_t pos = 0;
    while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos]))) ++pos;
    int value = 0;
    try {
        value = std::stoi(t.substr(0, pos));
    } catch (...) {
        return false;
    }
    if (value != index) return false;
    for (std::size_t i = pos; i < t.size(); ++i) {
        if (!(t[i] == ')' || t[i] == '.' || t[i] == ':' || t[i] == ',')) return false;
    }
    return true;
}

}  // namespace

std::optional<std::size_t> locate_answer_token(const Transcript& transcript, int answer_index) {
    std::size_t start = std::string::npos;
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        if (is_marker(transcript[i].token, answer_index)) {
            start = i + 1;
            break;
        }
    }
    if (start == std::string::npos) {
        if (answer_index != 1) return std::nullopt;
        start = 0;  // generations may begin with the answer directly
    }
    for (std::size_t i = start; i < transcript.size(); ++i) {
        if (!separator_only(transcript[i].token)) return i;
    }
    return std::nullopt;
}

bool Backend::retryable(const std::exception& e) const {
    const auto* err = dynamic_cast<const Error*>(&e);
    return err != nullptr && err->code() == ErrorCode::Backend;
}

std::vector<ScoreResult> Backend::score_batch(const std::vector<BackendRequest>& requests,
                                              int parallelism, int max_attempts,
                                              int backoff_base_ms) {
    if (parallelism < 1) throw Error(ErrorCode::Argument, "parallelism must be >= 1");
    std::vector<ScoreResult> results(requests.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            ScoreResult& slot = results[i];
            for (int attempt = 1; attempt <= max_attempts; ++attempt) {
                slot.attempts = attempt;
                try {
                    slot.dist = score_first_answer(requests[i]);
                    slot.error.clear();
                    break;
                } catch (const std::exception& e) {
                    slot.error = e.what();
                    if (!retryable(e) || attempt == max_attempts) break;
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(backoff_base_ms << (attempt - 1)));
                }
            }
        }
    };

    const int n_threads = std::min<std::size_t>(parallelism, requests.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return results;
}

MockModelSpec MockModelSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open mock fixture: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, "mock fixture " + path + ": " + e.what());
    }
    MockModelSpec spec;
    if (j.contains("samples")) {
        for (auto& [id, dist] : j["samples"].items()) {
            for (auto& [token, prob] : dist.items()) {
                spec.samples[id][token] = prob.get<double>();
            }
        }
    }
    if (j.contains("fail_ids")) {
        for (auto& id : j["fail_ids"]) spec.fail_ids.insert(id.get<std::string>());
    }
    spec.true_weight_mean = j.value("true_weight_mean", spec.true_weight_mean);
    spec.true_weight_concentration =
        j.value("true_weight_concentration", spec.true_weight_concentration);
    spec.noise_amplitude = j.value("noise_amplitude", spec.noise_amplitude);
    if (j.contains("bias_table")) {
        for (auto& row : j["bias_table"]) {
            spec.bias_table.push_back(row.get<std::vector<double>>());
        }
    }
    if (j.contains("position_decay")) {
        spec.position_decay = j["position_decay"].get<std::vector<double>>();
    }
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

MockBackend::MockBackend(MockModelSpec spec, std::map<std::string, int> true_labels)
    : spec_(std::move(spec)), true_labels_(std::move(true_labels)) {}

TokenDistribution MockBackend::score_first_answer(const BackendRequest& req) {
    const std::string& id = req.prompt.target_id;
    if (spec_.fail_ids.count(id)) {
        throw Error(ErrorCode::Backend, "mock configured to fail for sample " + id);
    }
    const int k = req.label_space.k();
    if (k < 2) throw Error(ErrorCode::Argument, "mock needs a valid label space");

    // base probabilities over labels
    std::vector<double> probs(k, 0.0);
    auto table = spec_.samples.find(id);
    if (table != spec_.samples.end()) {
        TokenDistribution dist;
        dist.position_note = "mock table for " + id;
        for (const auto& [token, prob] : table->second) {
            dist.entries[token] = std::log(std::max(prob, 1e-300));
        }
        return dist;
    }

    auto truth = true_labels_.find(id);
    if (truth == true_labels_.end()) {
        throw Error(ErrorCode::Argument, "mock has no truth entry for sample " + id);
    }
    const int y = truth->second;
    Rng base_rng(derive_seed(spec_.seed, "base", hash_str(id)));
    const double p_true =
        base_rng.beta_mean_conc(spec_.true_weight_mean, spec_.true_weight_concentration);
    for (int c = 0; c < k; ++c) probs[c] = c == y ? p_true : (1.0 - p_true) / (k - 1);

    if (req.prompt.mode == InferenceMode::Comparative) {
        std::uint64_t j_key = req.reference_set_id
                                  ? static_cast<std::uint64_t>(*req.reference_set_id)
                                  : [&] {
                                        std::string joined;
                                        for (const auto& r : req.prompt.reference_ids) {
                                            joined += r;
                                            joined += '|';
                                        }
                                        return hash_str(joined);
                                    }();
        if (!spec_.bias_table.empty()) {
            const auto& eps =
                spec_.bias_table[static_cast<std::size_t>((j_key - 1) % spec_.bias_table.size())];
            if (static_cast<int>(eps.size()) != k) {
                throw Error(ErrorCode::Schema, "bias table row size does not match K");
            }
            for (int c = 0; c < k; ++c) probs[c] += eps[c];
        } else if (spec_.noise_amplitude > 0.0) {
            Rng noise_rng(derive_seed(derive_seed(spec_.seed, "noise", hash_str(id)), j_key));
            std::vector<double> g(k);
            double mean = 0.0;
            for (int c = 0; c < k; ++c) {
                g[c] = noise_rng.uniform(-1.0, 1.0);
                mean += g[c];
            }
            mean /= k;
            for (int c = 0; c < k; ++c) probs[c] += spec_.noise_amplitude * (g[c] - mean);
        }
        for (double& p : probs) p = std::min(std::max(p, 1e-9), 1.0 - 1e-9);
    }

    const int pos = req.prompt.target_position;
    if (pos > 1 && pos - 1 < static_cast<int>(spec_.position_decay.size()) + 1) {
        const double keep = spec_.position_decay[pos - 2];
        Rng pos_rng(derive_seed(derive_seed(spec_.seed, "pos", hash_str(id)), pos));
        if (!pos_rng.bernoulli(keep)) {
            // degrade: dominant mass shifts to a wrong label
            std::vector<double> wrong(k, 0.0);
            const int bad = (y + 1) % k;
            for (int c = 0; c < k; ++c) wrong[c] = c == bad ? probs[y] : (1.0 - probs[y]) / (k - 1);
            probs = std::move(wrong);
        }
    }

    TokenDistribution dist;
    dist.position_note = "mock answer " + std::to_string(pos) + " for " + id;
    for (int c = 0; c < k; ++c) {
        const std::string& token = req.label_space.token_variants[c].front();
        dist.entries[token] = std::log(std::max(probs[c], 1e-300));
    }
    return dist;
}

std::unique_ptr<Backend> make_backend(const std::string& uri, const LabelSpace& /*space*/,
                                      const std::map<std::string, int>& true_labels) {
    if (uri.rfind("mock:", 0) == 0) {
        return std::make_unique<MockBackend>(MockModelSpec::from_json_file(uri.substr(5)),
                                             true_labels);
    }
    if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0) {
        HttpBackendConfig cfg;
        const auto bar = uri.find('|');
        cfg.base_url = bar == std::string::npos ? uri : uri.substr(0, bar);
        cfg.model = bar == std::string::npos ? "" : uri.substr(bar + 1);
        if (const char* key = std::getenv("LLMCAL_API_KEY")) cfg.api_key = key;
        return std::make_unique<HttpBackend>(std::move(cfg));
    }
    throw Error(ErrorCode::Argument,
                "backend must be mock:<fixture.json> or http(s)://base[|model], got: " + uri);
}

}  // namespace llmcal
