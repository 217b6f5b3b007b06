// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kgrobust/kg_store.hpp"
#include "kgrobust/model_gateway.hpp"
#include "kgrobust/scoring_filter.hpp"

namespace kgrobust {

enum class Strategy { template_based, llm_based };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);  // accepts "template"/"llm" too

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text with "{{slot}}" markers, substituted in a single pass.
class PromptTemplate {
public:
    PromptTemplate() = default;
    explicit PromptTemplate(std::string text);

    /// Throws PromptError if a marker in the text has no value.
    std::string render(const std::map<std::string, std::string>& values) const;
    std::vector<std::string> slots() const;
    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

/// The four prompt assets. Files in a template directory override the
/// built-in copies: verbalize.txt, adversarialize.txt, fewshot.txt, classify.txt.
struct TemplateSet {
    PromptTemplate verbalize;
    PromptTemplate adversarialize;
    PromptTemplate fewshot;
    PromptTemplate classify;
    std::string version;

    static const TemplateSet& builtin();
    static TemplateSet load_dir(const std::filesystem::path& dir);
    /// Checks each template carries exactly the slots its renderer fills.
    void validate() const;
};

struct SentenceRecord {
    LabeledTriplet labeled;
    std::string original_sentence;
    Strategy strategy = Strategy::template_based;
};

struct AdversarialCandidate {
    SentenceRecord base;
    std::string adversarial_sentence;
    std::uint32_t attempt_index = 0;
    bool few_shot_used = false;
};

inline constexpr std::size_t kFewShotSize = 5;

struct FewShotBank {
    std::vector<std::pair<std::string, std::string>> examples;  // (original, paraphrase)
    std::size_t size() const { return examples.size(); }
};

struct RenderedPrompt {
    PromptKind kind = PromptKind::other;
    std::string text;
    std::optional<Label> gold;  // classify prompts only; never part of `text`
};

struct GenerationOptions {
    double generation_temperature = 0.8;
    double classification_temperature = 0.0;
    int max_tokens = 256;
    std::uint32_t max_attempts = 3;
};

RenderedPrompt render_verbalization_prompt(const LabeledTriplet& lt,
                                           const TemplateSet& templates = TemplateSet::builtin());

/// Substitutes the perturbed subject and object names into the predicate template.
SentenceRecord verbalize_template(const LabeledTriplet& lt);

SentenceRecord verbalize_llm(const LabeledTriplet& lt, ModelEndpoint& model, const GenerationOptions& options = {},
                             const TemplateSet& templates = TemplateSet::builtin());

SentenceRecord verbalize(const LabeledTriplet& lt, Strategy strategy, ModelEndpoint* model,
                         const GenerationOptions& options = {},
                         const TemplateSet& templates = TemplateSet::builtin());

/// Compact JSON block describing the perturbed triplet and its current label.
std::string triplet_block(const LabeledTriplet& lt);

RenderedPrompt render_adversarial_prompt(const SentenceRecord& sr, const FewShotBank* bank,
                                         const TemplateSet& templates = TemplateSet::builtin(),
                                         PromptKind kind = PromptKind::adversarialize);

RenderedPrompt render_classification_prompt(std::string_view sentence, Label gold,
                                            const TemplateSet& templates = TemplateSet::builtin());

/// Lazily draws adversarial candidates, one model call per attempt. Replies
/// that normalize to nothing or to the original sentence burn an attempt.
class AdversarialGenerator {
public:
    AdversarialGenerator(SentenceRecord base, ModelEndpoint& model, const FewShotBank* bank,
                         GenerationOptions options = {}, const TemplateSet& templates = TemplateSet::builtin(),
                         PromptKind kind = PromptKind::adversarialize);

    std::optional<AdversarialCandidate> next();

    std::uint32_t attempts_used() const noexcept { return attempt_; }
    std::uint32_t unchanged_replies() const noexcept { return unchanged_; }
    bool exhausted() const noexcept { return attempt_ >= options_.max_attempts; }

private:
    SentenceRecord base_;
    ModelEndpoint& model_;
    const FewShotBank* bank_;
    GenerationOptions options_;
    RenderedPrompt prompt_;
    std::uint32_t attempt_ = 0;
    std::uint32_t unchanged_ = 0;
};

/// Draws every candidate (no filter). Mostly useful for tests and calibration.
std::vector<AdversarialCandidate> generate_adversarial(const SentenceRecord& sr, ModelEndpoint& model,
                                                       const FewShotBank* bank, const GenerationOptions& options = {},
                                                       const TemplateSet& templates = TemplateSet::builtin());

struct FewShotBudget {
    std::size_t max_triplets = 25;  // held-out triplets tried before giving up
};

class FewShotError : public std::runtime_error {
public:
    FewShotError(const std::string& message, std::size_t collected);
    std::size_t collected() const noexcept { return collected_; }

private:
    std::size_t collected_;
};

/// Collects five filter-passing (original, paraphrase) pairs from held-out triplets.
FewShotBank build_fewshot_bank(const TripletDataset& dataset, std::span<const std::size_t> held_out,
                               Strategy strategy, ModelEndpoint& model, ModelEndpoint& scorer,
                               ModelEndpoint& embedder, const FilterConfig& filter_cfg, std::uint64_t seed,
                               const GenerationOptions& options = {}, FewShotBudget budget = {},
                               const TemplateSet& templates = TemplateSet::builtin());

}  // namespace kgrobust
