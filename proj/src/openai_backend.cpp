// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/openai_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "httplib.h"
#include "kgrobust/text_util.hpp"

namespace kgrobust {

using nlohmann::json;

OpenAiBackend::OpenAiBackend(EndpointConfig config) : config_(std::move(config)) {
    const auto& url = config_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("invalid base_url: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json OpenAiBackend::post(const std::string& path, const json& body) const {
    httplib::Client client(origin_);
    const auto timeout = config_.limits.timeout;
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  static_cast<long>((timeout.count() % 1000) * 1000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            static_cast<long>((timeout.count() % 1000) * 1000));
    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
        if (const char* key = std::getenv(config_.auth_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    auto res = client.Post(path_prefix_ + path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransientError("request to " + origin_ + path_prefix_ + path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientError("HTTP " + std::to_string(res->status) + " from " + origin_ + path_prefix_ + path);
    }
    if (res->status != 200) {
        throw GatewayError(GatewayErrorKind::protocol, "HTTP " + std::to_string(res->status) + " from " + origin_ +
                                                           path_prefix_ + path + ": " + res->body.substr(0, 200));
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
        throw GatewayError(GatewayErrorKind::protocol, "malformed response body from " + origin_ + path_prefix_ + path);
    }
    return parsed;
}

json OpenAiBackend::chat_body(const ChatRequest& request) const {
    json messages = json::array();
    if (request.system) messages.push_back({{"role", "system"}, {"content", *request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {{"model", config_.model_name},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    return body;
}

json OpenAiBackend::echo_body(std::string_view text) const {
    return {{"model", config_.model_name},
            {"prompt", text},
            {"max_tokens", 1},
            {"echo", true},
            {"logprobs", 0},
            {"temperature", 0.0}};
}

json OpenAiBackend::embedding_body(std::string_view text) const {
    return {{"model", config_.model_name}, {"input", text}};
}

std::string OpenAiBackend::parse_chat_reply(const json& body) {
    try {
        const auto& content = body.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::protocol, std::string("malformed chat completion: ") + e.what());
    }
}

TokenLogprobs OpenAiBackend::parse_echo_reply(const json& body, std::string_view text) {
    TokenLogprobs out;
    try {
        const auto& lp = body.at("choices").at(0).at("logprobs");
        const auto& tokens = lp.at("tokens");
        const auto& values = lp.at("token_logprobs");
        if (tokens.size() != values.size()) {
            throw GatewayError(GatewayErrorKind::protocol, "echo reply has mismatched token and logprob lengths");
        }
        const bool has_offsets = lp.contains("text_offset") && lp.at("text_offset").size() == tokens.size();
        std::size_t consumed = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto token = tokens.at(i).get<std::string>();
            // Generated continuation tokens start at or past the end of the prompt.
            const std::size_t start = has_offsets ? lp.at("text_offset").at(i).get<std::size_t>() : consumed;
            consumed += token.size();
            if (start >= text.size()) break;
            if (values.at(i).is_null()) continue;  // first token has no conditional probability
            out.tokens.push_back(token);
            out.logprobs.push_back(values.at(i).get<double>());
        }
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::protocol, std::string("malformed echo completion: ") + e.what());
    }
    return out;
}

std::vector<double> OpenAiBackend::parse_embedding_reply(const json& body) {
    try {
        return body.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::protocol, std::string("malformed embedding reply: ") + e.what());
    }
}

std::string OpenAiBackend::chat(const ChatRequest& request) {
    return parse_chat_reply(post("/chat/completions", chat_body(request)));
}

TokenLogprobs OpenAiBackend::score_tokens(std::string_view text) {
    if (config_.logprob_mechanism == LogprobMechanism::prefix) return score_by_prefix(text);
    return parse_echo_reply(post("/completions", echo_body(text)), text);
}

// Word-level approximation for servers without echo: each word after the first
// is looked up in the top-20 next-token distribution of its prefix. A word
// missing from the list is charged the smallest listed log-probability.
TokenLogprobs OpenAiBackend::score_by_prefix(std::string_view text) {
    const auto words = split_words(text);
    TokenLogprobs out;
    std::string prefix = words.empty() ? std::string() : words.front();
    for (std::size_t i = 1; i < words.size(); ++i) {
        json body = {{"model", config_.model_name}, {"prompt", prefix}, {"max_tokens", 1},
                     {"logprobs", 20},            {"temperature", 0.0}};
        const auto reply = post("/completions", body);
        double best = -std::numeric_limits<double>::infinity();
        double floor = 0.0;
        try {
            const auto& top = reply.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
            for (const auto& [token, value] : top.items()) {
                const double lp = value.get<double>();
                floor = std::min(floor, lp);
                const auto stripped = trim(token);
                if (!stripped.empty() && words[i].starts_with(stripped)) best = std::max(best, lp);
            }
        } catch (const json::exception& e) {
            throw GatewayError(GatewayErrorKind::protocol, std::string("malformed prefix completion: ") + e.what());
        }
        out.tokens.push_back(words[i]);
        out.logprobs.push_back(std::isfinite(best) ? best : floor);
        prefix += ' ';
        prefix += words[i];
    }
    return out;
}

std::vector<double> OpenAiBackend::embed(std::string_view text) {
    return parse_embedding_reply(post("/embeddings", embedding_body(text)));
}

}  // namespace kgrobust
