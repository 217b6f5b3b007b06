// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kgrobust {

class Journal;
class JournalCache;

struct Capabilities {
    bool chat = false;
    bool logprobs = false;
    bool embeddings = false;

    static Capabilities all() { return {true, true, true}; }
    std::vector<std::string> names() const;
    static Capabilities from_names(const std::vector<std::string>& names);
};

enum class PromptKind { verbalize, adversarialize, classify, example_gen, other };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view text);

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 256;
    // Routing metadata. `kind` and `attempt` never go on the wire; they key
    // scripted replies and journal entries.
    PromptKind kind = PromptKind::other;
    std::uint32_t attempt = 0;
    std::optional<std::uint64_t> seed;

    nlohmann::json to_json() const;
};

struct TokenLogprobs {
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim() const { return values.size(); }
};

/// How full-sentence log-probabilities are obtained from an endpoint.
enum class LogprobMechanism { echo, prefix };

std::string_view to_string(LogprobMechanism m);
LogprobMechanism parse_logprob_mechanism(std::string_view text);

struct EndpointLimits {
    int max_concurrent = 4;
    int max_retries = 3;
    std::chrono::milliseconds timeout{60'000};
    std::chrono::milliseconds backoff_base{1'000};
    std::chrono::milliseconds backoff_cap{30'000};
};

struct EndpointConfig {
    std::string id;
    std::string base_url;  // http(s)://... or mock:
    std::string model_name;
    Capabilities capabilities;
    std::string auth_env;  // name of the environment variable holding the API key
    EndpointLimits limits;
    LogprobMechanism logprob_mechanism = LogprobMechanism::echo;

    bool is_mock() const { return base_url.starts_with("mock:"); }
    void validate() const;
};

nlohmann::json to_json(const EndpointConfig& cfg);
EndpointConfig endpoint_config_from_json(const std::string& id, const nlohmann::json& j);

enum class GatewayErrorKind {
    capability,
    invalid_request,
    transport,  // retries exhausted
    protocol,   // malformed or contract-violating reply
    zero_tokens,
    zero_vector,
    dimension_drift,
    replay_miss,
};

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& message);
    GatewayErrorKind kind() const noexcept { return kind_; }

private:
    GatewayErrorKind kind_;
};

/// Thrown by backends for failures worth retrying (connection loss, 429, 5xx).
class TransientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A concrete model transport. Implementations must be safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string chat(const ChatRequest& request) = 0;
    virtual TokenLogprobs score_tokens(std::string_view text) = 0;
    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual std::string mechanism_name() const { return "echo"; }
};

struct EndpointStats {
    std::uint64_t calls = 0;
    std::uint64_t retries = 0;
    std::uint64_t cache_hits = 0;
    int max_in_flight = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Capability-checked, bounded, retrying and journaled access to one backend.
class ModelEndpoint {
public:
    struct Options {
        Journal* journal = nullptr;
        const JournalCache* cache = nullptr;
        bool replay_only = false;  // a cache miss is an error instead of a live call
        SleepFn sleep;             // defaults to std::this_thread::sleep_for
        std::uint64_t jitter_seed = 0x5eed;
    };

    ModelEndpoint(EndpointConfig config, std::shared_ptr<Backend> backend);
    ModelEndpoint(EndpointConfig config, std::shared_ptr<Backend> backend, Options options);
    ModelEndpoint(const ModelEndpoint&) = delete;
    ModelEndpoint& operator=(const ModelEndpoint&) = delete;

    std::string chat(const ChatRequest& request);
    TokenLogprobs score_tokens(std::string_view text);
    EmbeddingVector embed(std::string_view text);

    const EndpointConfig& config() const noexcept { return config_; }
    const std::string& id() const noexcept { return config_.id; }
    EndpointStats stats() const;

    /// Backoff before retry number `retry` (0-based), before jitter.
    static std::chrono::milliseconds backoff_delay(const EndpointLimits& limits, int retry);

private:
    template <typename Fn>
    nlohmann::json exchange(std::string_view op, const nlohmann::json& request, Fn&& call);

    EndpointConfig config_;
    std::shared_ptr<Backend> backend_;
    Options options_;
    std::counting_semaphore<> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> retries_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
    std::mutex state_mutex_;
    std::optional<std::size_t> embedding_dim_;
    std::uint64_t jitter_state_;
};

/// Creates the backend named by `config.base_url` (mock scripts come from `mock_script`).
std::shared_ptr<Backend> make_backend(const EndpointConfig& config, const nlohmann::json* mock_script);

}  // namespace kgrobust
