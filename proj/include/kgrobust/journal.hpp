// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace kgrobust {

/// Append-only JSON Lines log of model exchanges. Each record gets the next
/// sequence number; writes are flushed so an aborted run keeps its prefix.
class Journal {
public:
    Journal() = default;  // in-memory only
    explicit Journal(const std::filesystem::path& path, bool append = false);

    /// Stamps `record` with "seq" and stores it. Returns the sequence number.
    std::uint64_t append(nlohmann::json record);

    std::vector<nlohmann::json> records() const;
    std::uint64_t size() const;

private:
    mutable std::mutex mutex_;
    std::uint64_t next_seq_ = 0;
    std::vector<nlohmann::json> records_;
    std::optional<std::ofstream> out_;
};

/// Replies recorded in a journal, keyed by exchange fingerprint.
class JournalCache {
public:
    JournalCache() = default;
    static JournalCache load(const std::filesystem::path& path);
    static JournalCache from_records(const std::vector<nlohmann::json>& records);

    const nlohmann::json* find(const std::string& key) const;
    std::size_t size() const { return replies_.size(); }

private:
    std::map<std::string, nlohmann::json> replies_;
};

/// Rewrites a journal file with records ordered by content and renumbered.
/// Concurrent runs append in completion order; this makes the file reproducible.
void canonicalize_journal(const std::filesystem::path& path);

/// Stable key for one exchange: endpoint id, operation and request body.
std::string exchange_key(const std::string& endpoint_id, std::string_view op, const nlohmann::json& request);

}  // namespace kgrobust
