// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kgrobust/label.hpp"

namespace kgrobust {

struct Predicate {
    std::string id;
    std::string name;
    std::string template_text;  // "[X] ... [Y]"
    std::string description;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct Entity {
    std::string id;
    std::string name;
    std::vector<std::string> aliases;

    friend bool operator==(const Entity&, const Entity&) = default;
};

struct Triplet {
    Entity subject;
    Predicate predicate;
    Entity object;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

enum class PerturbationSite { none, subject, object, predicate };

std::string_view to_string(PerturbationSite site);
PerturbationSite parse_perturbation_site(std::string_view text);

struct LabeledTriplet {
    Triplet original;
    Triplet perturbed;
    Label label = Label::true_fact;
    PerturbationSite site = PerturbationSite::none;

    friend bool operator==(const LabeledTriplet&, const LabeledTriplet&) = default;
};

enum class DomainTag { general, constrained };

std::string_view to_string(DomainTag tag);
DomainTag parse_domain_tag(std::string_view text);

enum class DatasetFormat { jsonl };

struct TripletDataset {
    std::string name;
    DomainTag domain = DomainTag::general;
    std::vector<Triplet> triplets;
    std::vector<Entity> entity_pool;
    std::vector<Predicate> predicate_pool;
};

/// Raised for malformed input files. `line()` is 1-based, 0 when not tied to a line.
class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& message, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when labeling or perturbation cannot satisfy its contract.
class LabelingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws DatasetError unless the template holds exactly one "[X]" and one "[Y]".
void validate_predicate(const Predicate& predicate);

/// Parses JSON-Lines triplet records. Blank lines are skipped.
TripletDataset parse_dataset(std::istream& in, std::string name,
                             DomainTag domain = DomainTag::general);

/// Loads a dataset file; the dataset name defaults to the file stem.
TripletDataset load_dataset(const std::filesystem::path& path,
                            DatasetFormat format = DatasetFormat::jsonl,
                            std::optional<DomainTag> domain = std::nullopt);

/// Serializes a triplet as a dataset record (inverse of one parse_dataset line).
std::string to_jsonl_record(const Triplet& triplet);

nlohmann::json to_json(const Triplet& triplet);
Triplet triplet_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabeledTriplet& lt);
LabeledTriplet labeled_triplet_from_json(const nlohmann::json& j);

// Portable seeded sampling. std::uniform_int_distribution is implementation
// defined, so run artifacts would differ between standard libraries.
using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t bound);

template <typename T>
void seeded_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[uniform_index(rng, i)]);
    }
}

/// Applies one labeled perturbation to `triplet`.
LabeledTriplet perturb_triplet(const Triplet& triplet, Label target,
                               const TripletDataset& dataset, Rng& rng);

/// Result of splitting a dataset into an evaluated sample and a held-out rest.
struct LabeledSample {
    std::vector<LabeledTriplet> labeled;
    std::vector<std::size_t> sample_indices;    // indices into dataset.triplets
    std::vector<std::size_t> held_out_indices;  // never evaluated
};

/// Samples `n` triplets and assigns exactly n/3 of each label.
LabeledSample sample_and_label(const TripletDataset& dataset, std::size_t n,
                               std::uint64_t seed);

std::vector<LabeledTriplet> assign_labels(const TripletDataset& dataset, std::size_t n,
                                          std::uint64_t seed);

/// True when `candidate` shares no id, name or alias with `replaced`
/// (names compared case-insensitively).
bool is_disjoint_replacement(const Entity& replaced, const Entity& candidate);

}  // namespace kgrobust
