// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <thread>

#include "kgrobust/text_util.hpp"

namespace kgrobust {

using nlohmann::json;

namespace {

MockMatcher parse_matcher(const json& rule, bool allow_kind) {
    MockMatcher m;
    const json& src = rule.contains("match") ? rule.at("match") : rule;
    if (src.contains("endpoint")) m.endpoint = src.at("endpoint").get<std::string>();
    if (src.contains("kind")) {
        if (!allow_kind) throw std::invalid_argument("mock script: 'kind' only applies to chat rules");
        const auto& k = src.at("kind");
        if (k.is_array()) {
            for (const auto& item : k) m.kinds.push_back(parse_prompt_kind(item.get<std::string>()));
        } else {
            m.kinds.push_back(parse_prompt_kind(k.get<std::string>()));
        }
    }
    if (src.contains("contains")) m.contains = src.at("contains").get<std::string>();
    if (src.contains("regex")) {
        m.regex_source = src.at("regex").get<std::string>();
        m.regex = std::make_shared<const std::regex>(*m.regex_source, std::regex::ECMAScript);
    }
    return m;
}

class InFlightGuard {
public:
    InFlightGuard(std::atomic<int>& in_flight, std::atomic<int>& max_in_flight) : in_flight_(in_flight) {
        const int now = ++in_flight_;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
    }
    ~InFlightGuard() { --in_flight_; }
    InFlightGuard(const InFlightGuard&) = delete;
    InFlightGuard& operator=(const InFlightGuard&) = delete;

private:
    std::atomic<int>& in_flight_;
};

}  // namespace

MockScript MockScript::from_json(const json& j) {
    MockScript s;
    if (!j.is_object()) throw std::invalid_argument("mock script must be a JSON object");
    for (const auto& r : j.value("chat", json::array())) {
        MockChatRule rule;
        rule.match = parse_matcher(r, true);
        if (r.contains("reply")) rule.replies.push_back(r.at("reply").get<std::string>());
        if (r.contains("replies")) {
            for (const auto& reply : r.at("replies")) rule.replies.push_back(reply.get<std::string>());
        }
        if (r.contains("format")) {
            if (!rule.match.regex) throw std::invalid_argument("mock script: 'format' requires 'regex'");
            rule.format = r.at("format").get<std::string>();
        }
        if (r.contains("lookup")) {
            if (!rule.match.regex) throw std::invalid_argument("mock script: 'lookup' requires 'regex'");
            const auto& lk = r.at("lookup");
            rule.lookup_capture = lk.value("capture", 1);
            rule.lookup = lk.value("table", json::object()).get<std::map<std::string, std::string>>();
            if (lk.contains("default")) rule.lookup_default = lk.at("default").get<std::string>();
        }
        if (rule.replies.empty() && !rule.format && !rule.lookup_capture) {
            throw std::invalid_argument("mock script: chat rule has no reply, replies, format or lookup");
        }
        rule.fail_first = r.value("fail_first", 0);
        s.chat.push_back(std::move(rule));
    }
    s.chat_default = j.value("chat_default", s.chat_default);
    for (const auto& r : j.value("logprobs", json::array())) {
        MockLogprobRule rule;
        rule.match = parse_matcher(r, false);
        if (r.contains("tokens")) rule.tokens = r.at("tokens").get<std::vector<std::string>>();
        if (r.contains("logprobs")) rule.logprobs = r.at("logprobs").get<std::vector<double>>();
        rule.per_token = r.value("per_token", rule.per_token);
        rule.fail_first = r.value("fail_first", 0);
        s.logprobs.push_back(std::move(rule));
    }
    s.logprob_default = j.value("logprob_default", s.logprob_default);
    for (const auto& r : j.value("embeddings", json::array())) {
        MockEmbeddingRule rule;
        rule.match = parse_matcher(r, false);
        rule.vector = r.at("vector").get<std::vector<double>>();
        rule.fail_first = r.value("fail_first", 0);
        s.embeddings.push_back(std::move(rule));
    }
    s.hashed_dim = j.value("hashed_dim", s.hashed_dim);
    if (s.hashed_dim == 0) throw std::invalid_argument("mock script: hashed_dim must be positive");
    s.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
    return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
    return from_json(json::parse(in));
}

std::vector<double> hashed_embedding(std::string_view text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const auto h = fnv1a64(word);
        v[h % dim] += (h >> 63) ? -1.0 : 1.0;
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return v;
}

MockBackend::MockBackend(MockScript script, std::string endpoint_id)
    : script_(std::move(script)), endpoint_id_(std::move(endpoint_id)) {
    chat_offset_ = 0;
    logprob_offset_ = script_.chat.size();
    embed_offset_ = logprob_offset_ + script_.logprobs.size();
    const auto total = embed_offset_ + script_.embeddings.size();
    fail_counters_ = std::make_unique<std::atomic<int>[]>(total == 0 ? 1 : total);
}

bool MockBackend::matches(const MockMatcher& m, std::string_view text, std::optional<PromptKind> kind,
                          std::smatch* captured, const std::string& owned) const {
    if (m.endpoint && *m.endpoint != endpoint_id_) return false;
    if (!m.kinds.empty() && (!kind || std::find(m.kinds.begin(), m.kinds.end(), *kind) == m.kinds.end())) {
        return false;
    }
    if (m.contains && text.find(*m.contains) == std::string_view::npos) return false;
    if (m.regex) {
        std::smatch local;
        std::smatch& out = captured ? *captured : local;
        if (!std::regex_search(owned, out, *m.regex)) return false;
    }
    return true;
}

bool MockBackend::consume_failure(std::size_t counter_index, int fail_first) {
    if (fail_first <= 0) return false;
    return fail_counters_[counter_index].fetch_add(1) < fail_first;
}

std::string MockBackend::chat(const ChatRequest& request) {
    InFlightGuard guard(in_flight_, max_in_flight_);
    ++calls_;
    if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
    const std::string& text = request.user;
    for (std::size_t i = 0; i < script_.chat.size(); ++i) {
        const auto& rule = script_.chat[i];
        std::smatch m;
        if (!matches(rule.match, text, request.kind, &m, text)) continue;
        std::string reply;
        if (rule.lookup_capture) {
            const auto key = m[static_cast<std::size_t>(*rule.lookup_capture)].str();
            auto it = rule.lookup.find(key);
            if (it != rule.lookup.end()) {
                reply = it->second;
            } else if (rule.lookup_default) {
                reply = *rule.lookup_default;
            } else {
                continue;
            }
        } else if (rule.format) {
            reply = m.format(*rule.format);
        } else {
            reply = rule.replies[std::min<std::size_t>(request.attempt, rule.replies.size() - 1)];
        }
        if (consume_failure(chat_offset_ + i, rule.fail_first)) {
            throw TransientError("scripted transient failure");
        }
        return reply;
    }
    return script_.chat_default;
}

TokenLogprobs MockBackend::score_tokens(std::string_view text) {
    InFlightGuard guard(in_flight_, max_in_flight_);
    ++calls_;
    if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
    const std::string owned(text);
    for (std::size_t i = 0; i < script_.logprobs.size(); ++i) {
        const auto& rule = script_.logprobs[i];
        if (!matches(rule.match, text, std::nullopt, nullptr, owned)) continue;
        if (consume_failure(logprob_offset_ + i, rule.fail_first)) throw TransientError("scripted transient failure");
        TokenLogprobs out;
        out.tokens = rule.tokens ? *rule.tokens : split_words(text);
        if (rule.logprobs) {
            out.logprobs = *rule.logprobs;
        } else {
            out.logprobs.assign(out.tokens.size(), rule.per_token);
        }
        return out;
    }
    TokenLogprobs out;
    out.tokens = split_words(text);
    out.logprobs.assign(out.tokens.size(), script_.logprob_default);
    return out;
}

std::vector<double> MockBackend::embed(std::string_view text) {
    InFlightGuard guard(in_flight_, max_in_flight_);
    ++calls_;
    if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
    const std::string owned(text);
    for (std::size_t i = 0; i < script_.embeddings.size(); ++i) {
        const auto& rule = script_.embeddings[i];
        if (!matches(rule.match, text, std::nullopt, nullptr, owned)) continue;
        if (consume_failure(embed_offset_ + i, rule.fail_first)) throw TransientError("scripted transient failure");
        return rule.vector;
    }
    return hashed_embedding(text, script_.hashed_dim);
}

}  // namespace kgrobust
