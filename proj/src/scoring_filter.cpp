// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/scoring_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kgrobust {

using nlohmann::json;

std::string_view to_string(LossMode mode) { return mode == LossMode::mean_nll ? "mean_nll" : "sum_nll"; }

LossMode parse_loss_mode(std::string_view text) {
    if (text == "mean_nll") return LossMode::mean_nll;
    if (text == "sum_nll") return LossMode::sum_nll;
    throw std::invalid_argument("unknown loss mode: " + std::string(text));
}

void FilterConfig::validate() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!unit(tau_t)) throw std::invalid_argument("filter.tau_t must lie in [0, 1]");
    if (!unit(tau_s)) throw std::invalid_argument("filter.tau_s must lie in [0, 1]");
    if (!(std::isfinite(k) && k > 0)) throw std::invalid_argument("filter.k must be positive");
    if (!(std::isfinite(t_scale) && t_scale > 0)) throw std::invalid_argument("filter.t_scale must be positive");
}

json to_json(const FilterConfig& cfg) {
    return {{"tau_t", cfg.tau_t},
            {"tau_s", cfg.tau_s},
            {"k", cfg.k},
            {"t_scale", cfg.t_scale},
            {"loss_mode", to_string(cfg.loss_mode)}};
}

FilterConfig filter_config_from_json(const json& j) {
    FilterConfig cfg;
    cfg.tau_t = j.value("tau_t", cfg.tau_t);
    cfg.tau_s = j.value("tau_s", cfg.tau_s);
    cfg.k = j.value("k", cfg.k);
    cfg.t_scale = j.value("t_scale", cfg.t_scale);
    cfg.loss_mode = parse_loss_mode(j.value("loss_mode", std::string(to_string(cfg.loss_mode))));
    cfg.validate();
    return cfg;
}

json to_json(const FilterScores& s) {
    return {{"tf", s.tf}, {"sf", s.sf}, {"loss", s.loss}, {"cosine", s.cosine}, {"passed", s.passed}};
}

FilterScores filter_scores_from_json(const json& j) {
    return {j.at("tf").get<double>(), j.at("sf").get<double>(), j.at("loss").get<double>(),
            j.at("cosine").get<double>(), j.at("passed").get<bool>()};
}

FilterError::FilterError(std::string stage, const std::string& message)
    : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

double sentence_loss(const TokenLogprobs& scored, LossMode mode) {
    if (scored.logprobs.empty()) throw GatewayError(GatewayErrorKind::zero_tokens, "cannot compute the loss of zero tokens");
    double nll = 0.0;
    for (double lp : scored.logprobs) nll -= lp;
    nll = std::max(0.0, nll);  // -0.0 when every token has probability 1
    return mode == LossMode::sum_nll ? nll : nll / static_cast<double>(scored.logprobs.size());
}

double sentence_loss(std::string_view sentence, ModelEndpoint& scorer, LossMode mode) {
    return sentence_loss(scorer.score_tokens(sentence), mode);
}

double text_fluency(double loss, double k) {
    if (!std::isfinite(loss) || loss < 0.0) throw std::invalid_argument("text_fluency: loss must be finite and >= 0");
    if (!(k > 0.0)) throw std::invalid_argument("text_fluency: k must be positive");
    // ln(e^loss + e - 1) without overflowing e^loss.
    const double log_perplexity = loss + std::log1p((std::numbers::e - 1.0) * std::exp(-loss));
    return std::expm1(-k / log_perplexity) / std::expm1(-k);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    if (a.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

double semantic_fidelity(double cosine, double t_scale) {
    if (!std::isfinite(cosine)) throw std::invalid_argument("semantic_fidelity: cosine must be finite");
    if (!(t_scale > 0.0)) throw std::invalid_argument("semantic_fidelity: t_scale must be positive");
    const double c = std::clamp(cosine, -1.0, 1.0);
    // Numerator and denominator multiplied by e^t.
    if (t_scale < 300.0) return std::expm1(t_scale * (c + 1.0)) / std::expm1(2.0 * t_scale);
    return std::exp(t_scale * (c - 1.0)) * -std::expm1(-t_scale * (c + 1.0)) / -std::expm1(-2.0 * t_scale);
}

double min_passing_cosine(double tau_s, double t_scale) {
    return std::log1p(tau_s * std::expm1(2.0 * t_scale)) / t_scale - 1.0;
}

bool passes(double tf, double sf, const FilterConfig& cfg) { return tf > cfg.tau_t && sf > cfg.tau_s; }

FilterScores filter(std::string_view adversarial, std::string_view original, ModelEndpoint& scorer,
                    ModelEndpoint& embedder, const FilterConfig& cfg) {
    FilterScores out;
    try {
        out.loss = sentence_loss(adversarial, scorer, cfg.loss_mode);
    } catch (const GatewayError& e) {
        throw FilterError("fluency scoring via '" + scorer.id() + "'", e.what());
    }
    out.tf = text_fluency(out.loss, cfg.k);
    EmbeddingVector v_adv, v_ori;
    try {
        v_adv = embedder.embed(adversarial);
        v_ori = embedder.embed(original);
    } catch (const GatewayError& e) {
        throw FilterError("embedding via '" + embedder.id() + "'", e.what());
    }
    try {
        out.cosine = cosine_similarity(v_adv, v_ori);
    } catch (const std::invalid_argument& e) {
        throw FilterError("cosine similarity", e.what());
    }
    out.sf = semantic_fidelity(out.cosine, cfg.t_scale);
    out.passed = passes(out.tf, out.sf, cfg);
    return out;
}

CalibrationSummary summarize_scores(std::span<const FilterScores> scores, const CalibrationKey& key,
                                    std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("calibrate: batch_size must be positive");
    CalibrationSummary summary;
    for (std::size_t begin = 0, batch = 0; begin < scores.size(); begin += batch_size, ++batch) {
        const auto end = std::min(scores.size(), begin + batch_size);
        std::vector<double> tf, sf;
        for (std::size_t i = begin; i < end; ++i) {
            tf.push_back(scores[i].tf);
            sf.push_back(scores[i].sf);
        }
        summary.rows.push_back({key, "tf", batch, BoxStats::compute(tf)});
        summary.rows.push_back({key, "sf", batch, BoxStats::compute(sf)});
    }
    return summary;
}

CalibrationSummary calibrate(std::span<const std::pair<std::string, std::string>> samples, ModelEndpoint& scorer,
                             ModelEndpoint& embedder, const FilterConfig& cfg, const CalibrationKey& key,
                             std::size_t batch_size) {
    if (samples.empty()) throw std::invalid_argument("calibrate: no samples");
    std::vector<FilterScores> scores;
    scores.reserve(samples.size());
    for (const auto& [original, adversarial] : samples) {
        scores.push_back(filter(adversarial, original, scorer, embedder, cfg));
    }
    return summarize_scores(scores, key, batch_size);
}

}  // namespace kgrobust
