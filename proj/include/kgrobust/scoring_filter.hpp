// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgrobust/box_stats.hpp"
#include "kgrobust/model_gateway.hpp"

namespace kgrobust {

enum class LossMode { mean_nll, sum_nll };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct FilterConfig {
    double tau_t = 0.69;
    double tau_s = 0.60;
    double k = 5.0;
    double t_scale = 5.0;
    LossMode loss_mode = LossMode::mean_nll;

    void validate() const;
};

nlohmann::json to_json(const FilterConfig& cfg);
FilterConfig filter_config_from_json(const nlohmann::json& j);

struct FilterScores {
    double tf = 0.0;
    double sf = 0.0;
    double loss = 0.0;
    double cosine = 0.0;
    bool passed = false;
};

nlohmann::json to_json(const FilterScores& s);
FilterScores filter_scores_from_json(const nlohmann::json& j);

/// An endpoint failure inside the filter, tagged with the stage that failed.
class FilterError : public std::runtime_error {
public:
    FilterError(std::string stage, const std::string& message);
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Negative log-likelihood of a scored token sequence.
double sentence_loss(const TokenLogprobs& scored, LossMode mode);
double sentence_loss(std::string_view sentence, ModelEndpoint& scorer, LossMode mode);

/// Fluency in (0, 1] from a sentence loss: P = e^loss, LogP = ln(P + e - 1),
/// tf = (e^{-k/LogP} - 1) / (e^{-k} - 1). Strictly decreasing in loss.
double text_fluency(double loss, double k = 5.0);

/// Cosine of two equal-length nonzero vectors, clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Rescales a cosine into [0, 1]: (e^{t cos} - e^{-t}) / (e^t - e^{-t}).
double semantic_fidelity(double cosine, double t_scale = 5.0);

/// Smallest cosine whose fidelity exceeds `tau_s` (closed-form inverse).
double min_passing_cosine(double tau_s, double t_scale);

/// Strict conjunction tf > tau_t and sf > tau_s.
bool passes(double tf, double sf, const FilterConfig& cfg);

FilterScores filter(std::string_view adversarial, std::string_view original, ModelEndpoint& scorer,
                    ModelEndpoint& embedder, const FilterConfig& cfg);

struct CalibrationKey {
    std::string model;
    std::string dataset;
    std::string strategy;

    auto operator<=>(const CalibrationKey&) const = default;
};

struct CalibrationRow {
    CalibrationKey key;
    std::string metric;  // "tf" or "sf"
    std::size_t batch = 0;
    BoxStats stats;
};

struct CalibrationSummary {
    std::vector<CalibrationRow> rows;
};

/// Scores every (original, adversarial) pair and summarizes each batch of
/// `batch_size` pairs. The last batch may be shorter.
CalibrationSummary calibrate(std::span<const std::pair<std::string, std::string>> samples,
                             ModelEndpoint& scorer, ModelEndpoint& embedder, const FilterConfig& cfg,
                             const CalibrationKey& key, std::size_t batch_size = 500);

/// Batch summaries of precomputed scores (used by calibrate).
CalibrationSummary summarize_scores(std::span<const FilterScores> scores, const CalibrationKey& key,
                                    std::size_t batch_size);

}  // namespace kgrobust
