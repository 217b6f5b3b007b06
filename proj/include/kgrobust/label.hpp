// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace kgrobust {

// Canonical order: true < entity_error < predicate_error.
enum class Label { true_fact = 0, entity_error = 1, predicate_error = 2 };

inline constexpr std::array<Label, 3> kAllLabels{Label::true_fact, Label::entity_error,
                                                 Label::predicate_error};

constexpr std::string_view to_string(Label label) {
    switch (label) {
        case Label::true_fact: return "true";
        case Label::entity_error: return "entity_error";
        case Label::predicate_error: return "predicate_error";
    }
    return "true";
}

constexpr std::optional<Label> label_from_string(std::string_view text) {
    for (Label l : kAllLabels) {
        if (to_string(l) == text) return l;
    }
    return std::nullopt;
}

/// The two labels other than `label`, in canonical order.
constexpr std::array<Label, 2> complement(Label label) {
    std::array<Label, 2> out{};
    std::size_t i = 0;
    for (Label l : kAllLabels) {
        if (l != label) out[i++] = l;
    }
    return out;
}

}  // namespace kgrobust
