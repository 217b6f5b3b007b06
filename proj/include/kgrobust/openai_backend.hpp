// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <string>

#include "json.hpp"
#include "kgrobust/model_gateway.hpp"

namespace kgrobust {

/// Client for the OpenAI-compatible HTTP surface: /chat/completions,
/// /completions (log-probabilities) and /embeddings.
class OpenAiBackend : public Backend {
public:
    explicit OpenAiBackend(EndpointConfig config);

    std::string chat(const ChatRequest& request) override;
    TokenLogprobs score_tokens(std::string_view text) override;
    std::vector<double> embed(std::string_view text) override;
    std::string mechanism_name() const override { return std::string(to_string(config_.logprob_mechanism)); }

    // Wire bodies, exposed for tests.
    nlohmann::json chat_body(const ChatRequest& request) const;
    nlohmann::json echo_body(std::string_view text) const;
    nlohmann::json embedding_body(std::string_view text) const;

    static std::string parse_chat_reply(const nlohmann::json& body);
    static TokenLogprobs parse_echo_reply(const nlohmann::json& body, std::string_view text);
    static std::vector<double> parse_embedding_reply(const nlohmann::json& body);

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
    TokenLogprobs score_by_prefix(std::string_view text);

    EndpointConfig config_;
    std::string origin_;       // scheme://host:port
    std::string path_prefix_;  // e.g. /v1
};

}  // namespace kgrobust
