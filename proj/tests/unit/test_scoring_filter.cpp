// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kgrobust/box_stats.hpp"
#include "kgrobust/scoring_filter.hpp"
#include "test_support.hpp"

using namespace kgrobust;
using kgtest::big;
using kgtest::to_double;

TEST(Fluency, MatchesOracle) {
    for (double loss : {0.0, 1e-9, 0.01, 0.5, 1.0, 2.0, 3.7, 10.0, 50.0, 300.0, 1e4}) {
        for (double k : {0.5, 1.0, 5.0, 12.0}) {
            const double want = to_double(kgtest::tf_oracle(big(loss), big(k)));
            EXPECT_NEAR(text_fluency(loss, k), want, 1e-13 * std::max(1.0, want)) << "loss=" << loss << " k=" << k;
        }
    }
}

TEST(Fluency, Checkpoints) {
    EXPECT_NEAR(text_fluency(0.0), 1.0, 1e-15);
    EXPECT_NEAR(text_fluency(1.0), 0.971671711745156, 1e-12);
    EXPECT_NEAR(text_fluency(50.0), 0.0958, 1e-4);
    EXPECT_LT(text_fluency(1e4), 1e-3);
    EXPECT_GT(text_fluency(1e300), 0.0);
}

TEST(Fluency, StrictlyDecreasingInLoss) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 60.0);
    for (int i = 0; i < 2000; ++i) {
        double a = u(rng), b = u(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        EXPECT_GT(text_fluency(a), text_fluency(b)) << a << " " << b;
    }
}

TEST(Fluency, RejectsBadInput) {
    EXPECT_THROW(text_fluency(-0.1), std::invalid_argument);
    EXPECT_THROW(text_fluency(std::nan("")), std::invalid_argument);
    EXPECT_THROW(text_fluency(1.0, 0.0), std::invalid_argument);
}

TEST(Fidelity, MatchesOracle) {
    for (double c = -1.0; c <= 1.0; c += 0.125) {
        for (double t : {0.5, 1.0, 5.0, 20.0}) {
            const double want = to_double(kgtest::sf_oracle(big(c), big(t)));
            EXPECT_NEAR(semantic_fidelity(c, t), want, 1e-14) << "c=" << c << " t=" << t;
        }
    }
    EXPECT_NEAR(semantic_fidelity(0.0), 0.00669285092428486, 1e-15);
    EXPECT_DOUBLE_EQ(semantic_fidelity(1.0), 1.0);
    EXPECT_DOUBLE_EQ(semantic_fidelity(-1.0), 0.0);
    EXPECT_NEAR(semantic_fidelity(0.5, 400.0) / to_double(kgtest::sf_oracle(big(0.5), big(400.0))), 1.0, 1e-12);
    EXPECT_NEAR(semantic_fidelity(1.0, 400.0), 1.0, 1e-15);
}

TEST(Fidelity, MonotoneInCosine) {
    double prev = -1.0;
    for (int i = 0; i <= 2000; ++i) {
        const double v = semantic_fidelity(-1.0 + i / 1000.0);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Fidelity, MinPassingCosineInvertsFidelity) {
    EXPECT_NEAR(min_passing_cosine(0.60, 5.0), 0.897840928479165, 1e-12);
    for (double tau : {0.1, 0.3, 0.6, 0.9}) {
        const double want = to_double(kgtest::min_cosine_oracle(big(tau), big(5.0)));
        EXPECT_NEAR(min_passing_cosine(tau, 5.0), want, 1e-12);
    }
}

TEST(Cosine, SymmetricScaleInvariantClamped) {
    const std::vector<double> a{1, 2, 3}, b{-2, 0.5, 4};
    EXPECT_DOUBLE_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
    const std::vector<double> a3{3, 6, 9};
    EXPECT_NEAR(cosine_similarity(a3, b), cosine_similarity(a, b), 1e-15);
    EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
    const std::vector<double> neg{-1, -2, -3};
    EXPECT_DOUBLE_EQ(cosine_similarity(a, neg), -1.0);
}

TEST(Cosine, RejectsMismatchAndZero) {
    const std::vector<double> a{1, 2}, b{1, 2, 3}, z{0, 0};
    EXPECT_THROW(cosine_similarity(a, b), std::invalid_argument);
    EXPECT_THROW(cosine_similarity(a, z), std::invalid_argument);
    EXPECT_THROW(cosine_similarity(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Filter, StrictThresholds) {
    FilterConfig cfg;
    EXPECT_FALSE(passes(0.69, 0.9, cfg));
    EXPECT_FALSE(passes(0.9, 0.60, cfg));
    EXPECT_TRUE(passes(std::nextafter(0.69, 1.0), std::nextafter(0.60, 1.0), cfg));
    EXPECT_FALSE(passes(0.9, std::nextafter(0.60, 0.0), cfg));
}

TEST(Filter, LossModes) {
    TokenLogprobs lp{{"a", "b", "c", "d"}, {-1.0, -2.0, -0.5, -0.5}};
    EXPECT_DOUBLE_EQ(sentence_loss(lp, LossMode::mean_nll), 1.0);
    EXPECT_DOUBLE_EQ(sentence_loss(lp, LossMode::sum_nll), 4.0);
    EXPECT_THROW(sentence_loss(TokenLogprobs{}, LossMode::mean_nll), GatewayError);
    EXPECT_EQ(parse_loss_mode("sum_nll"), LossMode::sum_nll);
    EXPECT_THROW(parse_loss_mode("x"), std::invalid_argument);
}

TEST(Filter, ScoresThroughEndpoints) {
    auto scorer = kgtest::mock_endpoint("s", kgtest::scorer_caps(),
                                        {{"logprobs", {{{"contains", "bad"}, {"per_token", -8.0}}}},
                                         {"embeddings",
                                          {{{"contains", "far"}, {"vector", {0.0, 1.0}}},
                                           {{"contains", "x"}, {"vector", {1.0, 0.0}}}}}});
    FilterConfig cfg;
    auto ok = filter("x one", "x two", *scorer, *scorer, cfg);
    EXPECT_DOUBLE_EQ(ok.loss, 0.5);
    EXPECT_DOUBLE_EQ(ok.cosine, 1.0);
    EXPECT_TRUE(ok.passed);
    EXPECT_NEAR(ok.tf, text_fluency(0.5), 1e-15);

    auto disfluent = filter("x bad", "x two", *scorer, *scorer, cfg);
    EXPECT_DOUBLE_EQ(disfluent.loss, 8.0);
    EXPECT_FALSE(disfluent.passed);

    auto drifted = filter("x far", "x two", *scorer, *scorer, cfg);
    EXPECT_DOUBLE_EQ(drifted.cosine, 0.0);
    EXPECT_FALSE(drifted.passed);
}

TEST(Filter, ErrorsNameTheStage) {
    auto chat = kgtest::mock_endpoint("chat-only", kgtest::chat_only());
    auto scorer = kgtest::mock_endpoint("s", kgtest::scorer_caps());
    try {
        filter("a", "b", *chat, *scorer, FilterConfig{});
        FAIL();
    } catch (const FilterError& e) {
        EXPECT_NE(e.stage().find("fluency"), std::string::npos);
    }
    try {
        filter("a", "b", *scorer, *chat, FilterConfig{});
        FAIL();
    } catch (const FilterError& e) {
        EXPECT_NE(e.stage().find("embedding"), std::string::npos);
    }
}

TEST(Filter, ConfigJsonRoundTripAndValidation) {
    FilterConfig cfg;
    cfg.k = 3.0;
    cfg.loss_mode = LossMode::sum_nll;
    const auto back = filter_config_from_json(to_json(cfg));
    EXPECT_EQ(back.k, 3.0);
    EXPECT_EQ(back.loss_mode, LossMode::sum_nll);
    EXPECT_THROW(filter_config_from_json({{"tau_t", 1.5}}), std::invalid_argument);
    EXPECT_THROW(filter_config_from_json({{"k", 0}}), std::invalid_argument);
}

TEST(BoxStats, FiveNumberSummary) {
    const std::vector<double> v{0.5, 0.1, 0.4, 0.2, 0.3};
    const auto s = BoxStats::compute(v);
    EXPECT_DOUBLE_EQ(s.min, 0.1);
    EXPECT_DOUBLE_EQ(s.q1, 0.2);
    EXPECT_DOUBLE_EQ(s.median, 0.3);
    EXPECT_DOUBLE_EQ(s.q3, 0.4);
    EXPECT_DOUBLE_EQ(s.max, 0.5);
    EXPECT_EQ(s.n, 5u);
    EXPECT_EQ(s.outliers, 0u);
    EXPECT_TRUE(s.monotone());
}

TEST(BoxStats, InterpolatesAndCountsOutliers) {
    const std::vector<double> v{1, 2, 3, 4, 100};
    const auto s = BoxStats::compute(v);
    EXPECT_DOUBLE_EQ(s.q1, 2.0);
    EXPECT_DOUBLE_EQ(s.q3, 4.0);
    EXPECT_EQ(s.outliers, 1u);
    const std::vector<double> even{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(BoxStats::compute(even).median, 2.5);
    EXPECT_DOUBLE_EQ(BoxStats::compute(even).q1, 1.75);
    EXPECT_EQ(BoxStats::compute(std::vector<double>{}).n, 0u);
}

TEST(BoxStats, RandomSamplesAreMonotone) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng() % 50);
        for (auto& x : v) x = u(rng);
        EXPECT_TRUE(BoxStats::compute(v).monotone());
    }
}

TEST(Calibration, BatchesScores) {
    std::vector<FilterScores> scores;
    for (int i = 0; i < 1000; ++i) scores.push_back({0.1 + 0.1 * (i % 5), 0.5, 0, 0, false});
    const auto summary = summarize_scores(scores, {"m", "d", "template_based"}, 500);
    ASSERT_EQ(summary.rows.size(), 4u);
    EXPECT_EQ(summary.rows[0].metric, "tf");
    EXPECT_EQ(summary.rows[2].batch, 1u);
    EXPECT_NEAR(summary.rows[0].stats.median, 0.3, 1e-12);
    EXPECT_EQ(summary.rows[0].stats.n, 500u);
    EXPECT_THROW(summarize_scores(scores, {}, 0), std::invalid_argument);
    const auto odd = summarize_scores(std::span(scores).first(501), {}, 500);
    ASSERT_EQ(odd.rows.size(), 4u);
    EXPECT_EQ(odd.rows[3].stats.n, 1u);
}

TEST(Calibration, ScoresPairsThroughFilter) {
    auto scorer = kgtest::mock_endpoint("s", kgtest::scorer_caps());
    std::vector<std::pair<std::string, std::string>> pairs{{"a b c", "a b c d"}, {"x y", "x z"}, {"p", "p"}};
    const auto summary = calibrate(pairs, *scorer, *scorer, FilterConfig{}, {"m", "d", "llm_based"}, 2);
    ASSERT_EQ(summary.rows.size(), 4u);
    EXPECT_DOUBLE_EQ(summary.rows[0].stats.min, text_fluency(0.5));
    EXPECT_EQ(summary.rows[3].stats.n, 1u);
    EXPECT_DOUBLE_EQ(summary.rows[3].stats.max, 1.0);
    EXPECT_THROW(calibrate({}, *scorer, *scorer, FilterConfig{}, {}, 2), std::invalid_argument);
}
