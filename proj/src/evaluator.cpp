// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/evaluator.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "kgrobust/parallel.hpp"
#include "kgrobust/text_util.hpp"

namespace kgrobust {

using nlohmann::json;

namespace {

json prompt_to_json(const RenderedPrompt& p) {
    json j = {{"kind", to_string(p.kind)}, {"text", p.text}};
    j["gold"] = p.gold ? json(to_string(*p.gold)) : json(nullptr);
    return j;
}

Label require_label(const json& j) {
    const auto text = j.get<std::string>();
    const auto label = label_from_string(text);
    if (!label) throw std::invalid_argument("unknown label: " + text);
    return *label;
}

RenderedPrompt prompt_from_json(const json& j) {
    RenderedPrompt p;
    p.kind = parse_prompt_kind(j.at("kind").get<std::string>());
    p.text = j.at("text").get<std::string>();
    if (!j.at("gold").is_null()) p.gold = require_label(j.at("gold"));
    return p;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvaluationError("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(json::parse(line));
    }
    return out;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvaluationError("cannot open " + path.string());
    return json::parse(in);
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EvaluationError("cannot write " + path.string());
    for (const auto& item : items) out << to_json(item).dump() << '\n';
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EvaluationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string sanitize(std::string_view text) {
    std::string out;
    for (char c : text) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

}  // namespace

json to_json(const PromptPair& p) {
    return {{"index", p.index},
            {"labeled", to_json(p.labeled)},
            {"strategy", to_string(p.strategy)},
            {"original_sentence", p.original_sentence},
            {"adversarial_sentence", p.adversarial_sentence},
            {"original_prompt", prompt_to_json(p.original)},
            {"adversarial_prompt", prompt_to_json(p.adversarial)},
            {"filter_scores", to_json(p.filter_scores)},
            {"gold", to_string(p.gold)},
            {"attempt_index", p.attempt_index},
            {"filter_rejects", p.filter_rejects},
            {"few_shot_used", p.few_shot_used}};
}

PromptPair prompt_pair_from_json(const json& j) {
    PromptPair p;
    p.index = j.at("index").get<std::size_t>();
    p.labeled = labeled_triplet_from_json(j.at("labeled"));
    p.strategy = parse_strategy(j.at("strategy").get<std::string>());
    p.original_sentence = j.at("original_sentence").get<std::string>();
    p.adversarial_sentence = j.at("adversarial_sentence").get<std::string>();
    p.original = prompt_from_json(j.at("original_prompt"));
    p.adversarial = prompt_from_json(j.at("adversarial_prompt"));
    p.filter_scores = filter_scores_from_json(j.at("filter_scores"));
    p.gold = require_label(j.at("gold"));
    p.attempt_index = j.at("attempt_index").get<std::uint32_t>();
    p.filter_rejects = j.at("filter_rejects").get<std::uint32_t>();
    p.few_shot_used = j.at("few_shot_used").get<bool>();
    return p;
}

json to_json(const DroppedTriplet& d) {
    return {{"index", d.index},
            {"labeled", to_json(d.labeled)},
            {"filter_rejects", d.filter_rejects},
            {"unchanged_replies", d.unchanged_replies}};
}

DroppedTriplet dropped_triplet_from_json(const json& j) {
    return {j.at("index").get<std::size_t>(), labeled_triplet_from_json(j.at("labeled")),
            j.at("filter_rejects").get<std::uint32_t>(), j.at("unchanged_replies").get<std::uint32_t>()};
}

json to_json(const ClassificationOutcome& o) {
    json j = {{"raw_reply", o.raw_reply}, {"correct", o.correct}};
    j["parsed"] = o.parsed ? json(to_string(*o.parsed)) : json(nullptr);
    return j;
}

ClassificationOutcome outcome_from_json(const json& j) {
    ClassificationOutcome o;
    o.raw_reply = j.at("raw_reply").get<std::string>();
    if (!j.at("parsed").is_null()) o.parsed = require_label(j.at("parsed"));
    o.correct = j.at("correct").get<bool>();
    return o;
}

std::string Condition::key() const {
    return sanitize(model_id) + "__" + sanitize(dataset) + "__" +
           (strategy == Strategy::template_based ? "template" : "llm") + "__" + (few_shot ? "fs" : "nofs");
}

json to_json(const Condition& c) {
    return {{"model", c.model_id}, {"dataset", c.dataset}, {"strategy", to_string(c.strategy)},
            {"few_shot", c.few_shot}};
}

Condition condition_from_json(const json& j) {
    return {j.at("model").get<std::string>(), j.at("dataset").get<std::string>(),
            parse_strategy(j.at("strategy").get<std::string>()), j.at("few_shot").get<bool>()};
}

json to_json(const RobustnessReport& r) {
    return {{"run_id", r.run_id},
            {"condition", to_json(r.condition)},
            {"acc_o", r.acc_o},
            {"acc_a", r.acc_a},
            {"r", r.r},
            {"j", r.j},
            {"n", r.n},
            {"m", r.m},
            {"correct_o", r.correct_o},
            {"correct_a", r.correct_a},
            {"drop_count", r.drop_count},
            {"filter_reject_count", r.filter_reject_count},
            {"dropped_indices", r.dropped_indices}};
}

RobustnessReport robustness_report_from_json(const json& j) {
    RobustnessReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.condition = condition_from_json(j.at("condition"));
    r.acc_o = j.at("acc_o").get<double>();
    r.acc_a = j.at("acc_a").get<double>();
    r.r = j.at("r").get<double>();
    r.j = j.at("j").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.m = j.at("m").get<std::size_t>();
    r.correct_o = j.at("correct_o").get<std::size_t>();
    r.correct_a = j.at("correct_a").get<std::size_t>();
    r.drop_count = j.at("drop_count").get<std::size_t>();
    r.filter_reject_count = j.at("filter_reject_count").get<std::size_t>();
    r.dropped_indices = j.at("dropped_indices").get<std::vector<std::size_t>>();
    return r;
}

json to_json(const CellConfig& c) {
    return {{"n", c.n},
            {"filter", to_json(c.filter)},
            {"j", c.j},
            {"generation",
             {{"generation_temperature", c.generation.generation_temperature},
              {"classification_temperature", c.generation.classification_temperature},
              {"max_tokens", c.generation.max_tokens},
              {"max_attempts", c.generation.max_attempts}}},
            {"few_shot_max_triplets", c.few_shot_budget.max_triplets},
            {"seed", c.seed}};
}

std::optional<Label> parse_label(std::string_view reply) {
    const auto text = to_lower(trim(reply));
    std::set<Label> found;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (auto l = label_from_string(token)) found.insert(*l);
        token.clear();
    };
    for (char c : text) {
        const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (word) {
            token.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    if (found.size() != 1) return std::nullopt;
    return *found.begin();
}

double robustness(double acc_a, double acc_o, double j) {
    if (!std::isfinite(acc_a) || acc_a < 0.0 || acc_a > 1.0) {
        throw std::domain_error("acc_a must lie in [0, 1], got " + std::to_string(acc_a));
    }
    if (!std::isfinite(acc_o) || acc_o < 0.0 || acc_o > 1.0) {
        throw std::domain_error("acc_o must lie in [0, 1], got " + std::to_string(acc_o));
    }
    if (!std::isfinite(j) || j < 1.0) throw std::domain_error("j must be >= 1, got " + std::to_string(j));
    return std::sin(std::numbers::pi / 2.0 * acc_a * (1.0 - std::pow(acc_o, j) / j));
}

std::size_t PairSet::filter_reject_count() const {
    std::size_t total = 0;
    for (const auto& p : pairs) total += p.filter_rejects;
    for (const auto& d : dropped) total += d.filter_rejects;
    return total;
}

PairSet build_pairs(const TripletDataset& dataset, CellEndpoints endpoints, Strategy strategy, bool few_shot,
                    const CellConfig& cfg, const TemplateSet& templates) {
    if (cfg.n == 0 || cfg.n % 3 != 0) {
        throw EvaluationError("n must be a positive multiple of 3, got " + std::to_string(cfg.n));
    }
    const auto sample = sample_and_label(dataset, cfg.n, cfg.seed);

    std::optional<FewShotBank> bank;
    if (few_shot) {
        bank = build_fewshot_bank(dataset, sample.held_out_indices, strategy, endpoints.generator,
                                  endpoints.fluency_scorer, endpoints.embedder, cfg.filter, cfg.seed,
                                  cfg.generation, cfg.few_shot_budget, templates);
    }

    struct Slot {
        std::optional<PromptPair> pair;
        DroppedTriplet dropped;
    };
    std::vector<Slot> slots(sample.labeled.size());
    parallel_for(slots.size(), cfg.workers, [&](std::size_t i) {
        const auto& lt = sample.labeled[i];
        auto sr = verbalize(lt, strategy, &endpoints.generator, cfg.generation, templates);
        AdversarialGenerator gen(sr, endpoints.generator, bank ? &*bank : nullptr, cfg.generation, templates);
        std::uint32_t rejects = 0;
        while (auto cand = gen.next()) {
            auto scores = filter(cand->adversarial_sentence, sr.original_sentence, endpoints.fluency_scorer,
                                 endpoints.embedder, cfg.filter);
            if (!scores.passed) {
                ++rejects;
                continue;
            }
            PromptPair p;
            p.index = i;
            p.labeled = lt;
            p.strategy = strategy;
            p.original_sentence = sr.original_sentence;
            p.adversarial_sentence = cand->adversarial_sentence;
            p.original = render_classification_prompt(sr.original_sentence, lt.label, templates);
            p.adversarial = render_classification_prompt(cand->adversarial_sentence, lt.label, templates);
            p.filter_scores = scores;
            p.gold = lt.label;
            p.attempt_index = cand->attempt_index;
            p.filter_rejects = rejects;
            p.few_shot_used = cand->few_shot_used;
            slots[i].pair = std::move(p);
            return;
        }
        slots[i].dropped = {i, lt, rejects, gen.unchanged_replies()};
    });

    PairSet out;
    out.n = cfg.n;
    for (auto& s : slots) {
        if (s.pair) {
            out.pairs.push_back(std::move(*s.pair));
        } else {
            out.dropped.push_back(std::move(s.dropped));
        }
    }
    if (out.pairs.empty()) {
        throw EvaluationError("no triplet produced a filter-passing adversarial candidate (M = 0, " +
                              std::to_string(out.filter_reject_count()) + " filter rejections)");
    }
    return out;
}

std::vector<ClassificationOutcome> classify_set(std::span<const RenderedPrompt> prompts, ModelEndpoint& model,
                                                const GenerationOptions& options, std::size_t workers) {
    for (const auto& p : prompts) {
        if (p.kind != PromptKind::classify || !p.gold) {
            throw std::invalid_argument("classify_set expects classify prompts with a gold label");
        }
    }
    std::vector<ClassificationOutcome> out(prompts.size());
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
        ChatRequest req;
        req.user = prompts[i].text;
        req.temperature = options.classification_temperature;
        req.max_tokens = options.max_tokens;
        req.kind = PromptKind::classify;
        auto& o = out[i];
        o.raw_reply = model.chat(req);
        o.parsed = parse_label(o.raw_reply);
        o.correct = o.parsed == prompts[i].gold;
    });
    return out;
}

RobustnessReport compute_report(const PairSet& set, std::span<const ClassificationOutcome> outcomes_o,
                                std::span<const ClassificationOutcome> outcomes_a, double j) {
    const auto m = set.pairs.size();
    if (outcomes_o.size() != m || outcomes_a.size() != m) {
        throw EvaluationError("outcome lists are not parallel to the pair list");
    }
    if (m == 0) throw EvaluationError("cannot score an empty pair set");
    RobustnessReport r;
    r.j = j;
    r.n = set.n;
    r.m = m;
    for (std::size_t i = 0; i < m; ++i) {
        r.correct_o += outcomes_o[i].correct ? 1 : 0;
        r.correct_a += outcomes_a[i].correct ? 1 : 0;
    }
    r.acc_o = static_cast<double>(r.correct_o) / static_cast<double>(m);
    r.acc_a = static_cast<double>(r.correct_a) / static_cast<double>(m);
    r.r = robustness(r.acc_a, r.acc_o, j);
    r.drop_count = set.dropped.size();
    r.filter_reject_count = set.filter_reject_count();
    for (const auto& d : set.dropped) r.dropped_indices.push_back(d.index);
    return r;
}

std::string make_run_id(const Condition& condition, std::uint64_t seed) {
    return condition.key() + "__seed" + std::to_string(seed);
}

CellResult run_cell(const Condition& condition, const TripletDataset& dataset, CellEndpoints endpoints,
                    const CellConfig& cfg, const std::filesystem::path& run_dir, const json& extra_snapshot,
                    const TemplateSet& templates) {
    CellResult result;
    auto& run = result.run;
    run.run_id = make_run_id(condition, cfg.seed);
    run.condition = condition;
    run.seed = cfg.seed;
    run.config_snapshot = {{"run_id", run.run_id},
                           {"condition", to_json(condition)},
                           {"cell", to_json(cfg)},
                           {"template_version", templates.version},
                           {"endpoints",
                            {{"generator", to_json(endpoints.generator.config())},
                             {"classifier", to_json(endpoints.classifier.config())},
                             {"fluency_scorer", to_json(endpoints.fluency_scorer.config())},
                             {"embedder", to_json(endpoints.embedder.config())}}}};
    if (!extra_snapshot.empty()) run.config_snapshot["extra"] = extra_snapshot;

    auto set = build_pairs(dataset, endpoints, condition.strategy, condition.few_shot, cfg, templates);
    std::vector<RenderedPrompt> prompts_o, prompts_a;
    for (const auto& p : set.pairs) {
        prompts_o.push_back(p.original);
        prompts_a.push_back(p.adversarial);
    }
    run.outcomes_o = classify_set(prompts_o, endpoints.classifier, cfg.generation, cfg.workers);
    run.outcomes_a = classify_set(prompts_a, endpoints.classifier, cfg.generation, cfg.workers);

    result.report = compute_report(set, run.outcomes_o, run.outcomes_a, cfg.j);
    result.report.run_id = run.run_id;
    result.report.condition = condition;
    run.pairs = std::move(set.pairs);
    run.dropped = std::move(set.dropped);
    write_run(run_dir, run, result.report);
    return result;
}

void write_run(const std::filesystem::path& run_dir, const EvaluationRun& run, const RobustnessReport& report) {
    std::filesystem::create_directories(run_dir);
    write_json(run_dir / "config.json", run.config_snapshot);
    write_jsonl(run_dir / "pairs.jsonl", run.pairs);
    write_jsonl(run_dir / "dropped.jsonl", run.dropped);
    write_jsonl(run_dir / "outcomes_o.jsonl", run.outcomes_o);
    write_jsonl(run_dir / "outcomes_a.jsonl", run.outcomes_a);
    write_json(run_dir / "report.json", to_json(report));
}

CellResult load_run(const std::filesystem::path& run_dir) {
    CellResult out;
    auto& run = out.run;
    run.config_snapshot = read_json(run_dir / "config.json");
    run.run_id = run.config_snapshot.at("run_id").get<std::string>();
    run.condition = condition_from_json(run.config_snapshot.at("condition"));
    run.seed = run.config_snapshot.at("cell").at("seed").get<std::uint64_t>();
    for (const auto& j : read_jsonl(run_dir / "pairs.jsonl")) run.pairs.push_back(prompt_pair_from_json(j));
    for (const auto& j : read_jsonl(run_dir / "dropped.jsonl")) run.dropped.push_back(dropped_triplet_from_json(j));
    for (const auto& j : read_jsonl(run_dir / "outcomes_o.jsonl")) run.outcomes_o.push_back(outcome_from_json(j));
    for (const auto& j : read_jsonl(run_dir / "outcomes_a.jsonl")) run.outcomes_a.push_back(outcome_from_json(j));
    out.report = robustness_report_from_json(read_json(run_dir / "report.json"));
    return out;
}

RobustnessReport recompute_report(const std::filesystem::path& run_dir) {
    auto loaded = load_run(run_dir);
    auto& run = loaded.run;
    auto reparse = [&](std::vector<ClassificationOutcome>& outcomes) {
        if (outcomes.size() != run.pairs.size()) {
            throw EvaluationError(run_dir.string() + ": outcome count differs from pair count");
        }
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            outcomes[i].parsed = parse_label(outcomes[i].raw_reply);
            outcomes[i].correct = outcomes[i].parsed == run.pairs[i].gold;
        }
    };
    reparse(run.outcomes_o);
    reparse(run.outcomes_a);
    PairSet set{std::move(run.pairs), std::move(run.dropped),
                run.config_snapshot.at("cell").at("n").get<std::size_t>()};
    auto report = compute_report(set, run.outcomes_o, run.outcomes_a,
                                 run.config_snapshot.at("cell").at("j").get<double>());
    report.run_id = run.run_id;
    report.condition = run.condition;
    return report;
}

}  // namespace kgrobust
