// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kgrobust {

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

/// Collapses internal whitespace runs to one space and trims the ends.
std::string collapse_whitespace(std::string_view text);

/// Model reply to one line: first non-empty line, trimmed, surrounding quotes dropped.
std::string normalize_reply(std::string_view reply);

std::vector<std::string> split_words(std::string_view text);

/// Replaces every occurrence of `from` in `text`.
std::string replace_all(std::string text, std::string_view from, std::string_view to);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

}  // namespace kgrobust
