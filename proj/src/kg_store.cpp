// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kgrobust/text_util.hpp"

namespace kgrobust {

using nlohmann::json;

std::string_view to_string(PerturbationSite site) {
    switch (site) {
        case PerturbationSite::none: return "none";
        case PerturbationSite::subject: return "subject";
        case PerturbationSite::object: return "object";
        case PerturbationSite::predicate: return "predicate";
    }
    return "none";
}

PerturbationSite parse_perturbation_site(std::string_view text) {
    for (auto s : {PerturbationSite::none, PerturbationSite::subject, PerturbationSite::object,
                   PerturbationSite::predicate}) {
        if (to_string(s) == text) return s;
    }
    throw std::invalid_argument("unknown perturbation site: " + std::string(text));
}

std::string_view to_string(DomainTag tag) {
    return tag == DomainTag::general ? "general" : "constrained";
}

DomainTag parse_domain_tag(std::string_view text) {
    if (text == "general") return DomainTag::general;
    if (text == "constrained") return DomainTag::constrained;
    throw std::invalid_argument("unknown domain tag: " + std::string(text));
}

DatasetError::DatasetError(const std::string& message, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::string required_string(const json& obj, const char* key, const char* what) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        throw std::invalid_argument(std::string(what) + " missing string field '" + key + "'");
    }
    return obj.at(key).get<std::string>();
}

Entity parse_entity(const json& obj, const char* what) {
    if (!obj.is_object()) throw std::invalid_argument(std::string(what) + " is not an object");
    Entity e;
    e.id = required_string(obj, "id", what);
    e.name = trim(required_string(obj, "name", what));
    if (e.id.empty()) throw std::invalid_argument(std::string(what) + " has an empty id");
    if (e.name.empty()) throw std::invalid_argument(std::string(what) + " has an empty name");
    if (obj.contains("aliases")) {
        const auto& aliases = obj.at("aliases");
        if (!aliases.is_array()) throw std::invalid_argument(std::string(what) + " aliases is not a list");
        std::set<std::string> seen{e.name};
        for (const auto& a : aliases) {
            if (!a.is_string()) throw std::invalid_argument(std::string(what) + " alias is not a string");
            auto alias = trim(a.get<std::string>());
            if (!alias.empty() && seen.insert(alias).second) e.aliases.push_back(std::move(alias));
        }
    }
    return e;
}

Predicate parse_predicate(const json& obj) {
    if (!obj.is_object()) throw std::invalid_argument("predicate is not an object");
    Predicate p;
    p.id = required_string(obj, "id", "predicate");
    p.name = trim(required_string(obj, "name", "predicate"));
    p.template_text = required_string(obj, "template", "predicate");
    p.description = trim(required_string(obj, "description", "predicate"));
    return p;
}

template <typename T>
void intern(std::vector<T>& pool, std::map<std::string, std::size_t>& index, const T& item,
            std::size_t line, const char* what) {
    auto [it, inserted] = index.emplace(item.id, pool.size());
    if (inserted) {
        pool.push_back(item);
    } else if (!(pool[it->second] == item)) {
        throw DatasetError(std::string("duplicate ") + what + " id '" + item.id +
                               "' with conflicting content",
                           line);
    }
}

}  // namespace

void validate_predicate(const Predicate& predicate) {
    auto xs = count_occurrences(predicate.template_text, "[X]");
    auto ys = count_occurrences(predicate.template_text, "[Y]");
    if (xs != 1 || ys != 1) {
        throw DatasetError("predicate '" + predicate.id + "' template must contain exactly one [X] and one [Y]: \"" +
                           predicate.template_text + "\"");
    }
    if (predicate.name.empty()) throw DatasetError("predicate '" + predicate.id + "' has an empty name");
    if (predicate.description.empty()) {
        throw DatasetError("predicate '" + predicate.id + "' has an empty description");
    }
}

TripletDataset parse_dataset(std::istream& in, std::string name, DomainTag domain) {
    TripletDataset ds;
    ds.name = std::move(name);
    ds.domain = domain;
    std::map<std::string, std::size_t> entity_index;
    std::map<std::string, std::size_t> predicate_index;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Triplet t;
        try {
            auto record = json::parse(line);
            if (!record.is_object()) throw std::invalid_argument("record is not a JSON object");
            for (const char* key : {"subject", "predicate", "object"}) {
                if (!record.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
            }
            t.subject = parse_entity(record.at("subject"), "subject");
            t.predicate = parse_predicate(record.at("predicate"));
            t.object = parse_entity(record.at("object"), "object");
        } catch (const json::exception& e) {
            throw DatasetError(std::string("malformed record: ") + e.what(), line_no);
        } catch (const std::invalid_argument& e) {
            throw DatasetError(std::string("malformed record: ") + e.what(), line_no);
        }
        try {
            validate_predicate(t.predicate);
        } catch (const DatasetError& e) {
            throw DatasetError(e.what(), line_no);
        }
        intern(ds.entity_pool, entity_index, t.subject, line_no, "entity");
        intern(ds.entity_pool, entity_index, t.object, line_no, "entity");
        intern(ds.predicate_pool, predicate_index, t.predicate, line_no, "predicate");
        ds.triplets.push_back(std::move(t));
    }
    return ds;
}

TripletDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            std::optional<DomainTag> domain) {
    if (format != DatasetFormat::jsonl) throw DatasetError("unsupported dataset format");
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file: " + path.string());
    return parse_dataset(in, path.stem().string(), domain.value_or(DomainTag::general));
}

json to_json(const Triplet& t) {
    auto entity = [](const Entity& e) { return json{{"id", e.id}, {"name", e.name}, {"aliases", e.aliases}}; };
    return {
        {"subject", entity(t.subject)},
        {"predicate",
         {{"id", t.predicate.id},
          {"name", t.predicate.name},
          {"template", t.predicate.template_text},
          {"description", t.predicate.description}}},
        {"object", entity(t.object)},
    };
}

Triplet triplet_from_json(const json& j) {
    return {parse_entity(j.at("subject"), "subject"), parse_predicate(j.at("predicate")),
            parse_entity(j.at("object"), "object")};
}

json to_json(const LabeledTriplet& lt) {
    return {{"original", to_json(lt.original)},
            {"perturbed", to_json(lt.perturbed)},
            {"label", to_string(lt.label)},
            {"site", to_string(lt.site)}};
}

LabeledTriplet labeled_triplet_from_json(const json& j) {
    const auto label = label_from_string(j.at("label").get<std::string>());
    if (!label) throw std::invalid_argument("unknown label: " + j.at("label").get<std::string>());
    return {triplet_from_json(j.at("original")), triplet_from_json(j.at("perturbed")), *label,
            parse_perturbation_site(j.at("site").get<std::string>())};
}

std::string to_jsonl_record(const Triplet& t) { return to_json(t).dump(); }

std::size_t uniform_index(Rng& rng, std::size_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t range = bound;
    const std::uint64_t limit = Rng::max() - (Rng::max() % range);
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % range);
}

bool is_disjoint_replacement(const Entity& replaced, const Entity& candidate) {
    if (candidate.id == replaced.id) return false;
    std::set<std::string> taken;
    taken.insert(to_lower(replaced.name));
    for (const auto& a : replaced.aliases) taken.insert(to_lower(a));
    if (taken.contains(to_lower(candidate.name))) return false;
    return std::none_of(candidate.aliases.begin(), candidate.aliases.end(),
                        [&](const std::string& a) { return taken.contains(to_lower(a)); });
}

namespace {

std::vector<const Entity*> entity_candidates(const Entity& replaced, const TripletDataset& ds) {
    std::vector<const Entity*> out;
    for (const auto& e : ds.entity_pool) {
        if (is_disjoint_replacement(replaced, e)) out.push_back(&e);
    }
    return out;
}

}  // namespace

LabeledTriplet perturb_triplet(const Triplet& triplet, Label target, const TripletDataset& dataset,
                               Rng& rng) {
    LabeledTriplet out{triplet, triplet, target, PerturbationSite::none};
    switch (target) {
        case Label::true_fact:
            return out;
        case Label::predicate_error: {
            std::vector<const Predicate*> candidates;
            for (const auto& p : dataset.predicate_pool) {
                if (p.id != triplet.predicate.id && p.template_text != triplet.predicate.template_text) {
                    candidates.push_back(&p);
                }
            }
            if (candidates.empty()) {
                throw LabelingError("no admissible replacement predicate for '" + triplet.predicate.id +
                                    "' in dataset '" + dataset.name + "'");
            }
            out.perturbed.predicate = *candidates[uniform_index(rng, candidates.size())];
            out.site = PerturbationSite::predicate;
            return out;
        }
        case Label::entity_error: {
            const bool subject_first = uniform_index(rng, 2) == 0;
            auto subject_pool = entity_candidates(triplet.subject, dataset);
            auto object_pool = entity_candidates(triplet.object, dataset);
            // The coin picks the site; the other site is used only if the chosen one has no candidate.
            bool use_subject = subject_first ? !subject_pool.empty() : object_pool.empty();
            auto& pool = use_subject ? subject_pool : object_pool;
            if (pool.empty()) {
                throw LabelingError("no admissible replacement entity for triplet (" + triplet.subject.id +
                                    ", " + triplet.predicate.id + ", " + triplet.object.id + ")");
            }
            const Entity& replacement = *pool[uniform_index(rng, pool.size())];
            if (use_subject) {
                out.perturbed.subject = replacement;
                out.site = PerturbationSite::subject;
            } else {
                out.perturbed.object = replacement;
                out.site = PerturbationSite::object;
            }
            return out;
        }
    }
    return out;
}

LabeledSample sample_and_label(const TripletDataset& dataset, std::size_t n, std::uint64_t seed) {
    if (n % 3 != 0) {
        throw LabelingError("sample size " + std::to_string(n) + " is not divisible by 3");
    }
    if (n > dataset.triplets.size()) {
        throw LabelingError("sample size " + std::to_string(n) + " exceeds dataset '" + dataset.name +
                            "' size " + std::to_string(dataset.triplets.size()));
    }
    Rng rng(seed);
    std::vector<std::size_t> order(dataset.triplets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    LabeledSample out;
    out.sample_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    out.held_out_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n), order.end());
    std::sort(out.sample_indices.begin(), out.sample_indices.end());
    std::sort(out.held_out_indices.begin(), out.held_out_indices.end());

    std::vector<Label> labels;
    labels.reserve(n);
    for (Label l : kAllLabels) labels.insert(labels.end(), n / 3, l);
    seeded_shuffle(labels, rng);

    out.labeled.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.labeled.push_back(perturb_triplet(dataset.triplets[out.sample_indices[i]], labels[i], dataset, rng));
    }
    return out;
}

std::vector<LabeledTriplet> assign_labels(const TripletDataset& dataset, std::size_t n, std::uint64_t seed) {
    return sample_and_label(dataset, n, seed).labeled;
}

}  // namespace kgrobust
