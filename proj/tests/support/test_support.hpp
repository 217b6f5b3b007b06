// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrobust/kg_store.hpp"
#include "kgrobust/mock_backend.hpp"
#include "kgrobust/model_gateway.hpp"

namespace kgtest {

// 50-digit reference implementations, written straight from the formulas
// with no rearrangement, used as the oracle for the double-precision code.
using Big = boost::multiprecision::cpp_dec_float_50;

inline Big big(double v) { return Big(v); }
inline Big big(const char* v) { return Big(v); }

inline Big tf_oracle(const Big& loss, const Big& k) {
    using boost::multiprecision::exp;
    using boost::multiprecision::log;
    const Big e = exp(Big(1));
    const Big p = exp(loss);
    const Big log_p = log(p + e - 1);
    return (exp(-k / log_p) - 1) / (exp(-k) - 1);
}

inline Big sf_oracle(const Big& cosine, const Big& t) {
    using boost::multiprecision::exp;
    return (exp(t * cosine) - exp(-t)) / (exp(t) - exp(-t));
}

inline Big robustness_oracle(const Big& acc_a, const Big& acc_o, const Big& j) {
    using boost::multiprecision::pow;
    using boost::multiprecision::sin;
    const Big pi = boost::math::constants::pi<Big>();
    return sin(pi / 2 * acc_a * (1 - pow(acc_o, j) / j));
}

/// Smallest cosine with sf_oracle(cos) >= tau, by bisection to ~1e-40.
inline Big min_cosine_oracle(const Big& tau, const Big& t) {
    Big lo = -1, hi = 1;
    for (int i = 0; i < 140; ++i) {
        const Big mid = (lo + hi) / 2;
        if (sf_oracle(mid, t) < tau) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

inline double to_double(const Big& v) { return v.convert_to<double>(); }

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(KGROBUST_FIXTURE_DIR) / name;
}

inline std::filesystem::path template_dir() { return std::filesystem::path(KGROBUST_TEMPLATE_DIR); }

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        const auto base = std::filesystem::temp_directory_path();
        for (;;) {
            path_ = base / ("kgrobust-test-" + std::to_string(rd()) + std::to_string(rd()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline kgrobust::EndpointConfig mock_config(const std::string& id, kgrobust::Capabilities caps,
                                            int max_concurrent = 4) {
    kgrobust::EndpointConfig cfg;
    cfg.id = id;
    cfg.base_url = "mock:";
    cfg.model_name = id;
    cfg.capabilities = caps;
    cfg.limits.max_concurrent = max_concurrent;
    cfg.limits.backoff_base = std::chrono::milliseconds(1);
    cfg.limits.backoff_cap = std::chrono::milliseconds(2);
    return cfg;
}

inline void no_sleep(std::chrono::milliseconds) {}

/// Mock-backed endpoint; backoff sleeps are skipped unless options say otherwise.
inline std::unique_ptr<kgrobust::ModelEndpoint> mock_endpoint(const std::string& id, kgrobust::Capabilities caps,
                                                              const nlohmann::json& script = nlohmann::json::object(),
                                                              kgrobust::ModelEndpoint::Options options = {},
                                                              int max_concurrent = 4) {
    if (!options.sleep) options.sleep = no_sleep;
    auto cfg = mock_config(id, caps, max_concurrent);
    auto backend = std::make_shared<kgrobust::MockBackend>(kgrobust::MockScript::from_json(script), id);
    return std::make_unique<kgrobust::ModelEndpoint>(cfg, backend, options);
}

inline kgrobust::Capabilities chat_only() { return {true, false, false}; }
inline kgrobust::Capabilities scorer_caps() { return {false, true, true}; }

/// Scripted generator: template-like verbalization and a one-word paraphrase.
inline nlohmann::json paraphrase_script() {
    return nlohmann::json::parse(R"JSON({
      "chat": [
        {"kind": "verbalize",
         "regex": "Subject\\(s\\): ([^\\n]*)\\n[^\\n]*\\n- Predicate: ([^\\n]*)\\n[^\\n]*\\n[^\\n]*\\n- Object\\(s\\): ([^\\n]*)",
         "format": "$1 has the $2 relation with $3."},
        {"kind": ["adversarialize", "example_gen"],
         "regex": "\\nSentence: ([^\\n]*?)\\.?\\n",
         "format": "Indeed, $1."}
      ]
    })JSON");
}

struct ReferenceRow {
    std::string group;
    std::string dataset;
    std::string strategy;
    bool few_shot = false;
    std::string model;
    double acc_o = 0, acc_a = 0, r = 0;
    std::string acc_o_text, acc_a_text, r_text;
    bool bold_r = false, bold_acc_o = false, bold_acc_a = false;
};

inline std::vector<ReferenceRow> reference_rows() {
    std::ifstream in(fixture("reference_tables.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<ReferenceRow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        ReferenceRow r;
        r.group = f[0];
        r.dataset = f[1];
        r.strategy = f[2];
        r.few_shot = f[3] == "yes";
        r.model = f[4];
        r.acc_o_text = f[5];
        r.acc_a_text = f[6];
        r.r_text = f[7];
        r.acc_o = std::stod(f[5]);
        r.acc_a = std::stod(f[6]);
        r.r = std::stod(f[7]);
        r.bold_r = f[8] == "1";
        r.bold_acc_o = f[9] == "1";
        r.bold_acc_a = f[10] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

/// Dataset of `count` triplets over a pool large enough that every
/// perturbation has disjoint candidates. Some entities carry aliases that
/// collide with other names case-insensitively, to exercise the disjointness rule.
inline kgrobust::TripletDataset synthetic_dataset(std::size_t count, std::uint64_t seed = 1) {
    std::ostringstream jsonl;
    std::mt19937_64 rng(seed);
    const std::size_t entities = 400;
    const std::size_t predicates = 12;
    auto entity = [&](std::size_t i) {
        nlohmann::json e = {{"id", "E" + std::to_string(i)}, {"name", "Entity " + std::to_string(i)}};
        std::vector<std::string> aliases;
        if (i % 3 == 0) aliases.push_back("Alias of " + std::to_string(i));
        if (i % 7 == 0) aliases.push_back("ENTITY " + std::to_string((i + 1) % entities));
        e["aliases"] = aliases;
        return e;
    };
    for (std::size_t k = 0; k < count; ++k) {
        const auto s = rng() % entities;
        auto o = rng() % entities;
        if (o == s) o = (o + 1) % entities;
        const auto p = rng() % predicates;
        nlohmann::json rec = {
            {"subject", entity(s)},
            {"predicate",
             {{"id", "P" + std::to_string(p)},
              {"name", "relation " + std::to_string(p)},
              {"template", "[X] relation-" + std::to_string(p) + " [Y]."},
              {"description", "synthetic relation number " + std::to_string(p)}}},
            {"object", entity(o)},
        };
        jsonl << rec.dump() << '\n';
    }
    std::istringstream in(jsonl.str());
    return kgrobust::parse_dataset(in, "synthetic");
}

}  // namespace kgtest
