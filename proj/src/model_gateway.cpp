// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/model_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "kgrobust/journal.hpp"
#include "kgrobust/mock_backend.hpp"
#include "kgrobust/openai_backend.hpp"

namespace kgrobust {

using nlohmann::json;

std::vector<std::string> Capabilities::names() const {
    std::vector<std::string> out;
    if (chat) out.emplace_back("chat");
    if (logprobs) out.emplace_back("logprobs");
    if (embeddings) out.emplace_back("embeddings");
    return out;
}

Capabilities Capabilities::from_names(const std::vector<std::string>& names) {
    Capabilities caps;
    for (const auto& n : names) {
        if (n == "chat") caps.chat = true;
        else if (n == "logprobs") caps.logprobs = true;
        else if (n == "embeddings") caps.embeddings = true;
        else throw std::invalid_argument("unknown capability: " + n);
    }
    return caps;
}

std::string_view to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::verbalize: return "verbalize";
        case PromptKind::adversarialize: return "adversarialize";
        case PromptKind::classify: return "classify";
        case PromptKind::example_gen: return "example_gen";
        case PromptKind::other: return "other";
    }
    return "other";
}

PromptKind parse_prompt_kind(std::string_view text) {
    for (auto k : {PromptKind::verbalize, PromptKind::adversarialize, PromptKind::classify,
                   PromptKind::example_gen, PromptKind::other}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown prompt kind: " + std::string(text));
}

json ChatRequest::to_json() const {
    json j = {{"user", user},
              {"temperature", temperature},
              {"max_tokens", max_tokens},
              {"kind", to_string(kind)},
              {"attempt", attempt}};
    if (system) j["system"] = *system;
    if (seed) j["seed"] = *seed;
    return j;
}

std::string_view to_string(LogprobMechanism m) { return m == LogprobMechanism::echo ? "echo" : "prefix"; }

LogprobMechanism parse_logprob_mechanism(std::string_view text) {
    if (text == "echo") return LogprobMechanism::echo;
    if (text == "prefix") return LogprobMechanism::prefix;
    throw std::invalid_argument("unknown logprob mechanism: " + std::string(text));
}

void EndpointConfig::validate() const {
    if (id.empty()) throw std::invalid_argument("endpoint id is empty");
    if (base_url.empty()) throw std::invalid_argument("endpoint '" + id + "' has no base_url");
    if (!is_mock() && !base_url.starts_with("http://") && !base_url.starts_with("https://")) {
        throw std::invalid_argument("endpoint '" + id + "' base_url must be http(s):// or mock:");
    }
    if (limits.max_concurrent < 1) throw std::invalid_argument("endpoint '" + id + "' max_concurrent must be >= 1");
    if (limits.max_retries < 0) throw std::invalid_argument("endpoint '" + id + "' max_retries must be >= 0");
}

json to_json(const EndpointConfig& cfg) {
    return {{"base_url", cfg.base_url},
            {"model", cfg.model_name},
            {"capabilities", cfg.capabilities.names()},
            {"auth_env", cfg.auth_env},
            {"logprob_mechanism", to_string(cfg.logprob_mechanism)},
            {"limits",
             {{"max_concurrent", cfg.limits.max_concurrent},
              {"max_retries", cfg.limits.max_retries},
              {"timeout_ms", cfg.limits.timeout.count()},
              {"backoff_base_ms", cfg.limits.backoff_base.count()},
              {"backoff_cap_ms", cfg.limits.backoff_cap.count()}}}};
}

EndpointConfig endpoint_config_from_json(const std::string& id, const json& j) {
    EndpointConfig cfg;
    cfg.id = id;
    cfg.base_url = j.value("base_url", std::string("mock:"));
    cfg.model_name = j.value("model", id);
    cfg.capabilities = j.contains("capabilities")
                           ? Capabilities::from_names(j.at("capabilities").get<std::vector<std::string>>())
                           : Capabilities::all();
    cfg.auth_env = j.value("auth_env", std::string());
    cfg.logprob_mechanism = parse_logprob_mechanism(j.value("logprob_mechanism", std::string("echo")));
    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        cfg.limits.max_concurrent = l.value("max_concurrent", cfg.limits.max_concurrent);
        cfg.limits.max_retries = l.value("max_retries", cfg.limits.max_retries);
        cfg.limits.timeout = std::chrono::milliseconds(l.value("timeout_ms", cfg.limits.timeout.count()));
        cfg.limits.backoff_base =
            std::chrono::milliseconds(l.value("backoff_base_ms", cfg.limits.backoff_base.count()));
        cfg.limits.backoff_cap = std::chrono::milliseconds(l.value("backoff_cap_ms", cfg.limits.backoff_cap.count()));
    }
    cfg.validate();
    return cfg;
}

std::string_view to_string(GatewayErrorKind kind) {
    switch (kind) {
        case GatewayErrorKind::capability: return "capability";
        case GatewayErrorKind::invalid_request: return "invalid_request";
        case GatewayErrorKind::transport: return "transport";
        case GatewayErrorKind::protocol: return "protocol";
        case GatewayErrorKind::zero_tokens: return "zero_tokens";
        case GatewayErrorKind::zero_vector: return "zero_vector";
        case GatewayErrorKind::dimension_drift: return "dimension_drift";
        case GatewayErrorKind::replay_miss: return "replay_miss";
    }
    return "protocol";
}

GatewayError::GatewayError(GatewayErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ModelEndpoint::ModelEndpoint(EndpointConfig config, std::shared_ptr<Backend> backend)
    : ModelEndpoint(std::move(config), std::move(backend), Options{}) {}

ModelEndpoint::ModelEndpoint(EndpointConfig config, std::shared_ptr<Backend> backend, Options options)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      options_(std::move(options)),
      slots_(std::max(1, config_.limits.max_concurrent)),
      jitter_state_(options_.jitter_seed) {
    config_.validate();
    if (!backend_ && !options_.replay_only) throw std::invalid_argument("endpoint '" + config_.id + "' has no backend");
    if (!options_.sleep) {
        options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

EndpointStats ModelEndpoint::stats() const {
    return {calls_.load(), retries_.load(), cache_hits_.load(), max_in_flight_.load()};
}

std::chrono::milliseconds ModelEndpoint::backoff_delay(const EndpointLimits& limits, int retry) {
    const double base = static_cast<double>(limits.backoff_base.count());
    const double delay = std::min(static_cast<double>(limits.backoff_cap.count()), base * std::ldexp(1.0, retry));
    return std::chrono::milliseconds(static_cast<long long>(delay));
}

namespace {

class SlotGuard {
public:
    SlotGuard(std::counting_semaphore<>& slots, std::atomic<int>& in_flight, std::atomic<int>& max_in_flight)
        : slots_(slots), in_flight_(in_flight) {
        slots_.acquire();
        const int now = ++in_flight_;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
    }
    ~SlotGuard() {
        --in_flight_;
        slots_.release();
    }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& slots_;
    std::atomic<int>& in_flight_;
};

}  // namespace

template <typename Fn>
json ModelEndpoint::exchange(std::string_view op, const json& request, Fn&& call) {
    const auto key = exchange_key(config_.id, op, request);
    json record = {{"endpoint", config_.id}, {"op", op}, {"key", key}, {"request", request}};
    if (op == "score") record["mechanism"] = backend_ ? backend_->mechanism_name() : "replay";

    if (options_.cache) {
        if (const auto* hit = options_.cache->find(key)) {
            ++cache_hits_;
            record["reply"] = *hit;
            record["retries"] = 0;
            record["replayed"] = true;
            if (options_.journal) options_.journal->append(record);
            return *hit;
        }
    }
    if (options_.replay_only) {
        throw GatewayError(GatewayErrorKind::replay_miss,
                           "endpoint '" + config_.id + "': no journaled reply for " + std::string(op) + " request");
    }

    json reply;
    int retries = 0;
    {
        SlotGuard guard(slots_, in_flight_, max_in_flight_);
        ++calls_;
        for (;;) {
            try {
                reply = call();
                break;
            } catch (const TransientError& e) {
                if (retries >= config_.limits.max_retries) {
                    retries_ += static_cast<std::uint64_t>(retries);
                    record["error"] = e.what();
                    record["retries"] = retries;
                    if (options_.journal) options_.journal->append(record);
                    throw GatewayError(GatewayErrorKind::transport,
                                       "endpoint '" + config_.id + "': retries exhausted after " +
                                           std::to_string(retries) + " retries: " + e.what());
                }
                auto delay = backoff_delay(config_.limits, retries);
                {
                    std::lock_guard lock(state_mutex_);
                    jitter_state_ = jitter_state_ * 6364136223846793005ULL + 1442695040888963407ULL;
                    const double unit = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
                    delay = std::chrono::milliseconds(
                        static_cast<long long>(static_cast<double>(delay.count()) * (0.5 + 0.5 * unit)));
                }
                ++retries;
                options_.sleep(delay);
            }
        }
    }
    retries_ += static_cast<std::uint64_t>(retries);
    record["reply"] = reply;
    record["retries"] = retries;
    if (options_.journal) options_.journal->append(record);
    return reply;
}

std::string ModelEndpoint::chat(const ChatRequest& request) {
    if (!config_.capabilities.chat) {
        throw GatewayError(GatewayErrorKind::capability, "endpoint '" + config_.id + "' does not declare chat");
    }
    if (request.user.empty()) throw GatewayError(GatewayErrorKind::invalid_request, "chat request has an empty user message");
    if (request.temperature < 0) throw GatewayError(GatewayErrorKind::invalid_request, "temperature must be >= 0");
    auto reply = exchange("chat", request.to_json(), [&] { return json(backend_->chat(request)); });
    if (!reply.is_string()) {
        throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "': chat reply is not text");
    }
    return reply.get<std::string>();
}

TokenLogprobs ModelEndpoint::score_tokens(std::string_view text) {
    if (!config_.capabilities.logprobs) {
        throw GatewayError(GatewayErrorKind::capability, "endpoint '" + config_.id + "' does not declare logprobs");
    }
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw GatewayError(GatewayErrorKind::zero_tokens, "cannot score an empty text");
    }
    auto reply = exchange("score", json{{"text", text}}, [&] {
        auto scored = backend_->score_tokens(text);
        return json{{"tokens", scored.tokens}, {"logprobs", scored.logprobs}};
    });
    TokenLogprobs out;
    try {
        out.tokens = reply.at("tokens").get<std::vector<std::string>>();
        out.logprobs = reply.at("logprobs").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "': malformed logprob reply: " + e.what());
    }
    if (out.tokens.size() != out.logprobs.size()) {
        throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "': " +
                                                           std::to_string(out.tokens.size()) + " tokens but " +
                                                           std::to_string(out.logprobs.size()) + " logprobs");
    }
    if (out.tokens.empty()) {
        throw GatewayError(GatewayErrorKind::zero_tokens, "endpoint '" + config_.id + "' returned zero tokens");
    }
    for (double lp : out.logprobs) {
        if (!std::isfinite(lp) || lp > 0.0) {
            throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id +
                                                               "' returned an invalid log-probability " +
                                                               std::to_string(lp));
        }
    }
    return out;
}

EmbeddingVector ModelEndpoint::embed(std::string_view text) {
    if (!config_.capabilities.embeddings) {
        throw GatewayError(GatewayErrorKind::capability, "endpoint '" + config_.id + "' does not declare embeddings");
    }
    auto reply = exchange("embed", json{{"text", text}}, [&] { return json(backend_->embed(text)); });
    EmbeddingVector out;
    try {
        out.values = reply.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "': malformed embedding: " + e.what());
    }
    if (out.values.empty()) throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "' returned an empty embedding");
    double norm2 = 0.0;
    for (double v : out.values) {
        if (!std::isfinite(v)) {
            throw GatewayError(GatewayErrorKind::protocol, "endpoint '" + config_.id + "' returned a non-finite embedding");
        }
        norm2 += v * v;
    }
    if (norm2 == 0.0) throw GatewayError(GatewayErrorKind::zero_vector, "endpoint '" + config_.id + "' returned a zero vector");
    {
        std::lock_guard lock(state_mutex_);
        if (!embedding_dim_) {
            embedding_dim_ = out.dim();
        } else if (*embedding_dim_ != out.dim()) {
            throw GatewayError(GatewayErrorKind::dimension_drift,
                               "endpoint '" + config_.id + "' embedding dimension changed from " +
                                   std::to_string(*embedding_dim_) + " to " + std::to_string(out.dim()));
        }
    }
    return out;
}

std::shared_ptr<Backend> make_backend(const EndpointConfig& config, const json* mock_script) {
    if (config.is_mock()) {
        static const json kEmpty = json::object();
        return std::make_shared<MockBackend>(MockScript::from_json(mock_script ? *mock_script : kEmpty), config.id);
    }
    return std::make_shared<OpenAiBackend>(config);
}

}  // namespace kgrobust
