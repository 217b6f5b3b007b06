// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrobust/model_gateway.hpp"

namespace kgrobust {

/// Request matcher shared by all scripted rule types. Empty fields match anything.
struct MockMatcher {
    std::optional<std::string> endpoint;
    std::vector<PromptKind> kinds;  // chat rules only; any of
    std::optional<std::string> contains;
    std::optional<std::string> regex_source;
    std::shared_ptr<const std::regex> regex;
};

struct MockChatRule {
    MockMatcher match;
    std::vector<std::string> replies;      // indexed by request attempt, last one repeats
    std::optional<std::string> format;     // regex_replace-style "$1" expansion of the match
    std::optional<int> lookup_capture;     // capture group looked up in `lookup`
    std::map<std::string, std::string> lookup;
    std::optional<std::string> lookup_default;
    int fail_first = 0;  // transient failures before the rule starts answering
};

struct MockLogprobRule {
    MockMatcher match;
    std::optional<std::vector<std::string>> tokens;
    std::optional<std::vector<double>> logprobs;
    double per_token = -0.5;  // used when `logprobs` is absent
    int fail_first = 0;
};

struct MockEmbeddingRule {
    MockMatcher match;
    std::vector<double> vector;
    int fail_first = 0;
};

/// Deterministic scripted model: identical request sequences get identical replies.
/// Rules are tried in file order; the first match answers.
struct MockScript {
    std::vector<MockChatRule> chat;
    std::string chat_default = "true";
    std::vector<MockLogprobRule> logprobs;
    double logprob_default = -0.5;
    std::vector<MockEmbeddingRule> embeddings;
    std::size_t hashed_dim = 64;
    std::chrono::milliseconds latency{0};

    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::filesystem::path& path);
};

/// Signed feature-hashing bag of words over lowercase alphanumeric runs.
std::vector<double> hashed_embedding(std::string_view text, std::size_t dim);

class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script, std::string endpoint_id = {});

    std::string chat(const ChatRequest& request) override;
    TokenLogprobs score_tokens(std::string_view text) override;
    std::vector<double> embed(std::string_view text) override;
    std::string mechanism_name() const override { return "mock"; }

    int max_in_flight() const { return max_in_flight_.load(); }
    std::uint64_t calls() const { return calls_.load(); }

private:
    bool matches(const MockMatcher& m, std::string_view text, std::optional<PromptKind> kind,
                 std::smatch* captured, const std::string& owned) const;
    bool consume_failure(std::size_t counter_index, int fail_first);

    MockScript script_;
    std::string endpoint_id_;
    std::unique_ptr<std::atomic<int>[]> fail_counters_;
    std::size_t chat_offset_ = 0, logprob_offset_ = 0, embed_offset_ = 0;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace kgrobust
