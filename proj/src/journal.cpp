// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/journal.hpp"

#include <algorithm>
#include <stdexcept>

#include "kgrobust/text_util.hpp"

namespace kgrobust {

Journal::Journal(const std::filesystem::path& path, bool append) {
    std::uint64_t existing = 0;
    if (append && std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto rec = nlohmann::json::parse(line, nullptr, false);
            if (rec.is_discarded()) break;  // torn final line from an aborted run
            existing = std::max(existing, rec.value("seq", std::uint64_t{0}) + 1);
        }
    }
    next_seq_ = existing;
    out_.emplace(path, append ? std::ios::app : std::ios::trunc);
    if (!*out_) throw std::runtime_error("cannot open journal: " + path.string());
}

std::uint64_t Journal::append(nlohmann::json record) {
    std::lock_guard lock(mutex_);
    const auto seq = next_seq_++;
    record["seq"] = seq;
    if (out_) {
        *out_ << record.dump() << '\n';
        out_->flush();
    }
    records_.push_back(std::move(record));
    return seq;
}

std::vector<nlohmann::json> Journal::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::uint64_t Journal::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

JournalCache JournalCache::from_records(const std::vector<nlohmann::json>& records) {
    JournalCache cache;
    for (const auto& rec : records) {
        if (!rec.contains("key") || !rec.contains("reply")) continue;
        cache.replies_.emplace(rec.at("key").get<std::string>(), rec.at("reply"));
    }
    return cache;
}

JournalCache JournalCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open journal: " + path.string());
    std::vector<nlohmann::json> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) break;
        records.push_back(std::move(rec));
    }
    return from_records(records);
}

const nlohmann::json* JournalCache::find(const std::string& key) const {
    auto it = replies_.find(key);
    return it == replies_.end() ? nullptr : &it->second;
}

std::string exchange_key(const std::string& endpoint_id, std::string_view op, const nlohmann::json& request) {
    nlohmann::json canonical = {{"endpoint", endpoint_id}, {"op", op}, {"request", request}};
    const auto text = canonical.dump();
    return to_hex(fnv1a64(text)) + to_hex(fnv1a64(text, 0x84222325cbf29ce4ULL));
}

void canonicalize_journal(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open journal: " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto rec = nlohmann::json::parse(line);
            rec.erase("seq");
            lines.push_back(rec.dump());
        }
    }
    std::sort(lines.begin(), lines.end());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot rewrite journal: " + path.string());
    std::uint64_t seq = 0;
    for (const auto& line : lines) {
        auto rec = nlohmann::json::parse(line);
        rec["seq"] = seq++;
        out << rec.dump() << '\n';
    }
}

}  // namespace kgrobust
