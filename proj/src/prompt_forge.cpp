// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/prompt_forge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "builtin_templates.hpp"
#include "json.hpp"
#include "kgrobust/text_util.hpp"

namespace kgrobust {

std::string_view to_string(Strategy s) { return s == Strategy::template_based ? "template_based" : "llm_based"; }

Strategy parse_strategy(std::string_view text) {
    if (text == "template_based" || text == "template") return Strategy::template_based;
    if (text == "llm_based" || text == "llm") return Strategy::llm_based;
    throw std::invalid_argument("unknown generation strategy: " + std::string(text));
}

namespace {

bool is_slot_name(std::string_view name) {
    return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
        return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
    });
}

// Calls on_text for literal runs and on_slot for each "{{name}}" marker.
template <typename Text, typename Slot>
void scan_template(std::string_view text, Text&& on_text, Slot&& on_slot) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const auto name = text.substr(open + 2, close - open - 2);
        if (!is_slot_name(name)) {
            on_text(text.substr(pos, open + 2 - pos));
            pos = open + 2;
            continue;
        }
        on_text(text.substr(pos, open - pos));
        on_slot(name);
        pos = close + 2;
    }
    on_text(text.substr(pos));
}

std::string join_aliases(const std::vector<std::string>& aliases) {
    if (aliases.empty()) return "(none)";
    std::string out;
    for (const auto& a : aliases) {
        if (!out.empty()) out += ", ";
        out += a;
    }
    return out;
}

std::string read_template_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PromptError("cannot read template: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    if (text.ends_with("\r\n")) text.resize(text.size() - 2);
    else if (text.ends_with('\n')) text.pop_back();
    return text;
}

void require_slots(const PromptTemplate& t, const char* name, std::set<std::string> expected) {
    const auto found = t.slots();
    std::set<std::string> actual(found.begin(), found.end());
    if (actual != expected) {
        std::string msg = std::string("template '") + name + "' must use exactly the slots:";
        for (const auto& s : expected) msg += " " + s;
        msg += "; found:";
        for (const auto& s : actual) msg += " " + s;
        throw PromptError(msg);
    }
}

std::string escape_quoted(std::string_view sentence) {
    std::string out;
    out.reserve(sentence.size());
    for (char c : sentence) {
        if (c == '\\' || c == '"') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size() + 256);
    scan_template(
        text_, [&](std::string_view literal) { out.append(literal); },
        [&](std::string_view name) {
            auto it = values.find(std::string(name));
            if (it == values.end()) throw PromptError("no value for template slot '" + std::string(name) + "'");
            out.append(it->second);
        });
    return out;
}

std::vector<std::string> PromptTemplate::slots() const {
    std::vector<std::string> out;
    scan_template(text_, [](std::string_view) {}, [&](std::string_view name) { out.emplace_back(name); });
    return out;
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        TemplateSet s{PromptTemplate(detail::kVerbalizeTemplate), PromptTemplate(detail::kAdversarializeTemplate),
                      PromptTemplate(detail::kFewShotTemplate), PromptTemplate(detail::kClassifyTemplate),
                      std::string("builtin-") + detail::kTemplateVersion};
        s.validate();
        return s;
    }();
    return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw PromptError("template directory not found: " + dir.string());
    TemplateSet s = builtin();
    auto load = [&](const char* file, PromptTemplate& slot) {
        const auto path = dir / file;
        if (std::filesystem::exists(path)) slot = PromptTemplate(read_template_file(path));
    };
    load("verbalize.txt", s.verbalize);
    load("adversarialize.txt", s.adversarialize);
    load("fewshot.txt", s.fewshot);
    load("classify.txt", s.classify);
    const auto version_file = dir / "VERSION";
    s.version = std::filesystem::exists(version_file) ? trim(read_template_file(version_file)) : dir.string();
    s.validate();
    return s;
}

void TemplateSet::validate() const {
    require_slots(verbalize, "verbalize",
                  {"subject", "subject_aliases", "predicate", "predicate_template", "predicate_description", "object",
                   "object_aliases"});
    require_slots(adversarialize, "adversarialize",
                  {"examples_block", "triplet_json", "sentence", "label", "wrong_label_1", "wrong_label_2"});
    require_slots(fewshot, "fewshot", {"examples"});
    require_slots(classify, "classify", {"sentence"});
}

RenderedPrompt render_verbalization_prompt(const LabeledTriplet& lt, const TemplateSet& templates) {
    const auto& t = lt.perturbed;
    RenderedPrompt out;
    out.kind = PromptKind::verbalize;
    out.text = templates.verbalize.render({
        {"subject", t.subject.name},
        {"subject_aliases", join_aliases(t.subject.aliases)},
        {"predicate", t.predicate.name},
        {"predicate_template", t.predicate.template_text},
        {"predicate_description", t.predicate.description},
        {"object", t.object.name},
        {"object_aliases", join_aliases(t.object.aliases)},
    });
    return out;
}

SentenceRecord verbalize_template(const LabeledTriplet& lt) {
    const auto& t = lt.perturbed;
    // Single pass so a name containing "[Y]" is never substituted twice.
    std::string out;
    std::string_view rest = t.predicate.template_text;
    while (!rest.empty()) {
        const auto x = rest.find("[X]"), y = rest.find("[Y]");
        const auto next = std::min(x, y);
        if (next == std::string_view::npos) {
            out.append(rest);
            break;
        }
        out.append(rest.substr(0, next));
        out.append(next == x ? t.subject.name : t.object.name);
        rest.remove_prefix(next + 3);
    }
    return {lt, collapse_whitespace(out), Strategy::template_based};
}

SentenceRecord verbalize_llm(const LabeledTriplet& lt, ModelEndpoint& model, const GenerationOptions& options,
                             const TemplateSet& templates) {
    const auto prompt = render_verbalization_prompt(lt, templates);
    ChatRequest req;
    req.user = prompt.text;
    req.kind = PromptKind::verbalize;
    req.temperature = options.generation_temperature;
    req.max_tokens = options.max_tokens;
    auto sentence = normalize_reply(model.chat(req));
    if (sentence.empty()) {
        throw PromptError("model '" + model.id() + "' returned an empty verbalization for (" + lt.perturbed.subject.name +
                          ", " + lt.perturbed.predicate.name + ", " + lt.perturbed.object.name + ")");
    }
    return {lt, std::move(sentence), Strategy::llm_based};
}

SentenceRecord verbalize(const LabeledTriplet& lt, Strategy strategy, ModelEndpoint* model,
                         const GenerationOptions& options, const TemplateSet& templates) {
    if (strategy == Strategy::template_based) return verbalize_template(lt);
    if (!model) throw PromptError("llm_based verbalization needs a generator endpoint");
    return verbalize_llm(lt, *model, options, templates);
}

std::string triplet_block(const LabeledTriplet& lt) {
    const auto& t = lt.perturbed;
    nlohmann::ordered_json j;
    j["subs"] = std::vector<std::string>{t.subject.name};
    j["sub_aliases"] = t.subject.aliases;
    j["predicate"] = {{"predicate", t.predicate.name},
                      {"template", t.predicate.template_text},
                      {"description", t.predicate.description}};
    j["objs"] = std::vector<std::string>{t.object.name};
    j["obj_aliases"] = t.object.aliases;
    j["label"] = to_string(lt.label);
    return j.dump();
}

RenderedPrompt render_adversarial_prompt(const SentenceRecord& sr, const FewShotBank* bank,
                                         const TemplateSet& templates, PromptKind kind) {
    std::string examples_block;
    if (bank) {
        if (bank->size() != kFewShotSize) {
            throw PromptError("few-shot bank must hold " + std::to_string(kFewShotSize) + " examples, has " +
                              std::to_string(bank->size()));
        }
        std::string lines;
        for (const auto& [original, paraphrase] : bank->examples) {
            if (!lines.empty()) lines += '\n';
            lines += "Original Sentence: " + original + " -> Paraphrased Sentence: " + paraphrase;
        }
        examples_block = templates.fewshot.render({{"examples", lines}}) + "\n\n";
    }
    const auto wrong = complement(sr.labeled.label);
    RenderedPrompt out;
    out.kind = kind;
    out.text = templates.adversarialize.render({
        {"examples_block", examples_block},
        {"triplet_json", triplet_block(sr.labeled)},
        {"sentence", sr.original_sentence},
        {"label", std::string(to_string(sr.labeled.label))},
        {"wrong_label_1", std::string(to_string(wrong[0]))},
        {"wrong_label_2", std::string(to_string(wrong[1]))},
    });
    return out;
}

RenderedPrompt render_classification_prompt(std::string_view sentence, Label gold, const TemplateSet& templates) {
    const auto line = collapse_whitespace(sentence);
    if (line.empty()) throw PromptError("cannot classify an empty sentence");
    RenderedPrompt out;
    out.kind = PromptKind::classify;
    out.text = templates.classify.render({{"sentence", escape_quoted(line)}});
    out.gold = gold;
    return out;
}

AdversarialGenerator::AdversarialGenerator(SentenceRecord base, ModelEndpoint& model, const FewShotBank* bank,
                                           GenerationOptions options, const TemplateSet& templates, PromptKind kind)
    : base_(std::move(base)), model_(model), bank_(bank), options_(options) {
    if (options_.max_attempts < 1) throw PromptError("max_attempts must be >= 1");
    prompt_ = render_adversarial_prompt(base_, bank_, templates, kind);
}

std::optional<AdversarialCandidate> AdversarialGenerator::next() {
    const auto original = collapse_whitespace(base_.original_sentence);
    while (attempt_ < options_.max_attempts) {
        ChatRequest req;
        req.user = prompt_.text;
        req.kind = prompt_.kind;
        req.attempt = attempt_;
        req.temperature = options_.generation_temperature;
        req.max_tokens = options_.max_tokens;
        const auto index = attempt_++;
        auto sentence = normalize_reply(model_.chat(req));
        if (sentence.empty() || sentence == original) {
            ++unchanged_;
            continue;
        }
        return AdversarialCandidate{base_, std::move(sentence), index, bank_ != nullptr};
    }
    return std::nullopt;
}

std::vector<AdversarialCandidate> generate_adversarial(const SentenceRecord& sr, ModelEndpoint& model,
                                                       const FewShotBank* bank, const GenerationOptions& options,
                                                       const TemplateSet& templates) {
    AdversarialGenerator gen(sr, model, bank, options, templates);
    std::vector<AdversarialCandidate> out;
    while (auto c = gen.next()) out.push_back(std::move(*c));
    return out;
}

FewShotError::FewShotError(const std::string& message, std::size_t collected)
    : std::runtime_error(message), collected_(collected) {}

FewShotBank build_fewshot_bank(const TripletDataset& dataset, std::span<const std::size_t> held_out, Strategy strategy,
                               ModelEndpoint& model, ModelEndpoint& scorer, ModelEndpoint& embedder,
                               const FilterConfig& filter_cfg, std::uint64_t seed, const GenerationOptions& options,
                               FewShotBudget budget, const TemplateSet& templates) {
    if (held_out.size() < kFewShotSize) {
        throw FewShotError("few-shot bank needs at least " + std::to_string(kFewShotSize) +
                               " held-out triplets, dataset '" + dataset.name + "' has " +
                               std::to_string(held_out.size()),
                           0);
    }
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(held_out.begin(), held_out.end());
    seeded_shuffle(order, rng);

    FewShotBank bank;
    const auto tries = std::min(order.size(), budget.max_triplets);
    for (std::size_t i = 0; i < tries && bank.size() < kFewShotSize; ++i) {
        const auto label = kAllLabels[i % kAllLabels.size()];
        const auto lt = perturb_triplet(dataset.triplets[order[i]], label, dataset, rng);
        const auto sr = verbalize(lt, strategy, &model, options, templates);
        AdversarialGenerator gen(sr, model, nullptr, options, templates, PromptKind::example_gen);
        while (auto candidate = gen.next()) {
            const auto scores = filter(candidate->adversarial_sentence, sr.original_sentence, scorer, embedder, filter_cfg);
            if (scores.passed) {
                bank.examples.emplace_back(sr.original_sentence, candidate->adversarial_sentence);
                break;
            }
        }
    }
    if (bank.size() < kFewShotSize) {
        throw FewShotError("few-shot bank construction collected " + std::to_string(bank.size()) + "/" +
                               std::to_string(kFewShotSize) + " filter-passing pairs after trying " +
                               std::to_string(tries) + " held-out triplets",
                           bank.size());
    }
    return bank;
}

}  // namespace kgrobust
