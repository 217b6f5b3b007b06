// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrobust/kg_store.hpp"
#include "kgrobust/model_gateway.hpp"
#include "kgrobust/prompt_forge.hpp"
#include "kgrobust/scoring_filter.hpp"

namespace kgrobust {

inline constexpr double kDefaultJ = 1.7;

struct PromptPair {
    std::size_t index = 0;  // position in the labeled sample
    LabeledTriplet labeled;
    Strategy strategy = Strategy::template_based;
    std::string original_sentence;
    std::string adversarial_sentence;
    RenderedPrompt original;
    RenderedPrompt adversarial;
    FilterScores filter_scores;
    Label gold = Label::true_fact;
    std::uint32_t attempt_index = 0;
    std::uint32_t filter_rejects = 0;  // candidates that failed the filter before this one
    bool few_shot_used = false;
};

nlohmann::json to_json(const PromptPair& pair);
PromptPair prompt_pair_from_json(const nlohmann::json& j);

/// A sampled triplet that never produced a filter-passing candidate.
struct DroppedTriplet {
    std::size_t index = 0;
    LabeledTriplet labeled;
    std::uint32_t filter_rejects = 0;
    std::uint32_t unchanged_replies = 0;
};

nlohmann::json to_json(const DroppedTriplet& d);
DroppedTriplet dropped_triplet_from_json(const nlohmann::json& j);

struct ClassificationOutcome {
    std::string raw_reply;
    std::optional<Label> parsed;  // nullopt: unparseable
    bool correct = false;
};

nlohmann::json to_json(const ClassificationOutcome& o);
ClassificationOutcome outcome_from_json(const nlohmann::json& j);

struct Condition {
    std::string model_id;
    std::string dataset;
    Strategy strategy = Strategy::template_based;
    bool few_shot = false;

    /// "<model>__<dataset>__<template|llm>__<fs|nofs>" with unsafe characters replaced.
    std::string key() const;
    friend bool operator==(const Condition&, const Condition&) = default;
};

nlohmann::json to_json(const Condition& c);
Condition condition_from_json(const nlohmann::json& j);

struct RobustnessReport {
    std::string run_id;
    Condition condition;
    double acc_o = 0.0;
    double acc_a = 0.0;
    double r = 0.0;
    double j = kDefaultJ;
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t correct_o = 0;
    std::size_t correct_a = 0;
    std::size_t drop_count = 0;
    std::size_t filter_reject_count = 0;
    std::vector<std::size_t> dropped_indices;

    friend bool operator==(const RobustnessReport&, const RobustnessReport&) = default;
};

nlohmann::json to_json(const RobustnessReport& r);
RobustnessReport robustness_report_from_json(const nlohmann::json& j);

struct EvaluationRun {
    std::string run_id;
    Condition condition;
    nlohmann::json config_snapshot;
    std::vector<PromptPair> pairs;
    std::vector<DroppedTriplet> dropped;
    std::vector<ClassificationOutcome> outcomes_o;
    std::vector<ClassificationOutcome> outcomes_a;
    std::uint64_t seed = 0;
};

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Whole-token string match against the three label names.
std::optional<Label> parse_label(std::string_view reply);

/// sin(pi/2 * acc_a * (1 - acc_o^j / j)).
double robustness(double acc_a, double acc_o, double j = kDefaultJ);

/// The four roles a cell needs. The scorer and embedder stay fixed across models.
struct CellEndpoints {
    ModelEndpoint& generator;
    ModelEndpoint& classifier;
    ModelEndpoint& fluency_scorer;
    ModelEndpoint& embedder;
};

struct CellConfig {
    std::size_t n = 30;
    FilterConfig filter;
    double j = kDefaultJ;
    GenerationOptions generation;
    FewShotBudget few_shot_budget;
    std::size_t workers = 4;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const CellConfig& cfg);

struct PairSet {
    std::vector<PromptPair> pairs;
    std::vector<DroppedTriplet> dropped;
    std::size_t n = 0;

    std::size_t filter_reject_count() const;
};

/// Builds index-aligned O/A pairs. A triplet whose attempts all fail the
/// filter is dropped from both sets. Throws EvaluationError when nothing survives.
PairSet build_pairs(const TripletDataset& dataset, CellEndpoints endpoints, Strategy strategy, bool few_shot,
                    const CellConfig& cfg, const TemplateSet& templates = TemplateSet::builtin());

/// One deterministic-decoding call per prompt, results in input order.
std::vector<ClassificationOutcome> classify_set(std::span<const RenderedPrompt> prompts, ModelEndpoint& model,
                                                const GenerationOptions& options = {}, std::size_t workers = 4);

/// Folds pairs and outcomes into a report. Throws if the lists are not parallel.
RobustnessReport compute_report(const PairSet& set, std::span<const ClassificationOutcome> outcomes_o,
                                std::span<const ClassificationOutcome> outcomes_a, double j);

/// Stable identifier for a condition and seed.
std::string make_run_id(const Condition& condition, std::uint64_t seed);

struct CellResult {
    EvaluationRun run;
    RobustnessReport report;
};

/// build_pairs, classify both sets, score, then persist into `run_dir`
/// (config.json, pairs.jsonl, dropped.jsonl, outcomes_o.jsonl, outcomes_a.jsonl, report.json).
CellResult run_cell(const Condition& condition, const TripletDataset& dataset, CellEndpoints endpoints,
                    const CellConfig& cfg, const std::filesystem::path& run_dir,
                    const nlohmann::json& extra_snapshot = nlohmann::json::object(),
                    const TemplateSet& templates = TemplateSet::builtin());

void write_run(const std::filesystem::path& run_dir, const EvaluationRun& run, const RobustnessReport& report);

/// Reads a persisted run back. `report` is the stored report.json.
CellResult load_run(const std::filesystem::path& run_dir);

/// Re-parses the stored raw replies and rebuilds the report from scratch.
RobustnessReport recompute_report(const std::filesystem::path& run_dir);

}  // namespace kgrobust
