#include <cmath>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "llmcal/backend.hpp"
#include "llmcal/errors.hpp"

namespace llmcal {

namespace {

using nlohmann::json;

struct UrlParts {
    std::string host;  // scheme://host[:port]
    std::string path;  // path prefix, e.g. /v1
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::Argument, "backend URL needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

json post_json(const HttpBackendConfig& cfg, const std::string& endpoint, const json& body) {
    const UrlParts parts = split_url(cfg.base_url);
    httplib::Client client(parts.host);
    client.set_connection_timeout(cfg.timeout_sec);
    client.set_read_timeout(cfg.timeout_sec);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    auto res = client.Post(parts.path + endpoint, headers, body.dump(), "application/json");
    if (!res) {
        std::ostringstream msg;
        msg << "transport failure for " << endpoint << ": " << httplib::to_string(res.error());
        throw Error(ErrorCode::Backend, msg.str());
    }
    if (res->status == 429 || res->status >= 500) {
        throw Error(ErrorCode::Backend, "HTTP " + std::to_string(res->status) + " from " +
                                            endpoint + ": " + res->body.substr(0, 200));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::Argument, "HTTP " + std::to_string(res->status) + " from " +
                                             endpoint + ": " + res->body.substr(0, 200));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Backend, std::string("invalid JSON response: ") + e.what());
    }
}

std::string join_tokens(const Transcript& transcript) {
    std::string out;
    for (const auto& t : transcript) out += t.token;
    return out;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error(ErrorCode::Argument, "HTTP backend requires a base URL");
    }
}

bool HttpBackend::retryable(const std::exception& e) const {
    const auto* err = dynamic_cast<const Error*>(&e);
    return err != nullptr && err->code() == ErrorCode::Backend;
}

Transcript HttpBackend::complete_with_logprobs(const std::string& prompt, int max_tokens,
                                               int top_logprobs) {
    Transcript transcript;
    if (config_.chat_wrapper) {
        json body = {{"model", config_.model},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"max_tokens", max_tokens},
                     {"temperature", 0},
                     {"logprobs", true},
                     {"top_logprobs", top_logprobs}};
        json res = post_json(config_, "/chat/completions", body);
        const json& content = res.at("choices").at(0).at("logprobs").at("content");
        for (const auto& entry : content) {
            GeneratedToken tok;
            tok.token = entry.at("token").get<std::string>();
            for (const auto& alt : entry.at("top_logprobs")) {
                tok.top_logprobs[alt.at("token").get<std::string>()] =
                    alt.at("logprob").get<double>();
            }
            transcript.push_back(std::move(tok));
        }
        return transcript;
    }

    json body = {{"model", config_.model},
                 {"prompt", prompt},
                 {"max_tokens", max_tokens},
                 {"temperature", 0},
                 {"logprobs", top_logprobs}};
    json res = post_json(config_, "/completions", body);
    const json& lp = res.at("choices").at(0).at("logprobs");
    const json& tokens = lp.at("tokens");
    const json& tops = lp.at("top_logprobs");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        GeneratedToken tok;
        tok.token = tokens.at(i).get<std::string>();
        if (i < tops.size() && tops.at(i).is_object()) {
            for (const auto& [t, v] : tops.at(i).items()) {
                tok.top_logprobs[t] = v.get<double>();
            }
        }
        transcript.push_back(std::move(tok));
    }
    return transcript;
}

double HttpBackend::score_continuation(const std::string& prompt, const std::string& continuation) {
    if (config_.chat_wrapper) {
        throw Error(ErrorCode::Argument,
                    "per-label scoring needs a completion endpoint with echo support");
    }
    json body = {{"model", config_.model}, {"prompt", prompt + continuation},
                 {"max_tokens", 0},       {"temperature", 0},
                 {"logprobs", 1},         {"echo", true}};
    json res = post_json(config_, "/completions", body);
    const json& lp = res.at("choices").at(0).at("logprobs");
    const json& offsets = lp.at("text_offset");
    const json& token_logprobs = lp.at("token_logprobs");
    double total = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (offsets.at(i).get<std::size_t>() >= prompt.size() && !token_logprobs.at(i).is_null()) {
            total += token_logprobs.at(i).get<double>();
            any = true;
        }
    }
    if (!any) {
        throw Error(ErrorCode::ExtractionFailure,
                    "no echoed logprobs for continuation '" + continuation + "'");
    }
    return total;
}

TokenDistribution HttpBackend::score_first_answer(const BackendRequest& req) {
    TokenDistribution dist;
    if (req.decode == DecodeStrategy::PerLabelScoring) {
        dist.position_note = "per-label forced continuation";
        for (int c = 0; c < req.label_space.k(); ++c) {
            const std::string& variant = req.label_space.token_variants[c].front();
            dist.entries[variant] = score_continuation(req.prompt.text, variant);
        }
        return dist;
    }

    const Transcript transcript =
        complete_with_logprobs(req.prompt.text, req.max_tokens, req.top_logprobs);
    const auto idx = locate_answer_token(transcript, req.prompt.target_position);
    if (!idx) {
        throw Error(ErrorCode::ExtractionFailure,
                    "no content token for answer " + std::to_string(req.prompt.target_position) +
                        " in generation: " + join_tokens(transcript));
    }
    const GeneratedToken& tok = transcript[*idx];
    dist.position_note =
        "generation token " + std::to_string(*idx) + " ('" + tok.token + "')";
    dist.entries = tok.top_logprobs;
    if (dist.entries.empty()) {
        throw Error(ErrorCode::ExtractionFailure,
                    "no top-logprobs at located token '" + tok.token + "'");
    }
    return dist;
}

}  // namespace llmcal
