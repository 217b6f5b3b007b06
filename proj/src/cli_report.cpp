// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include "kgrobust/cli_report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include "kgrobust/journal.hpp"
#include "kgrobust/parallel.hpp"

namespace kgrobust {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute() || base.empty() || base == ".") return path;
    return base / path;
}

bool parse_few_shot(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    const auto s = v.get<std::string>();
    if (s == "yes" || s == "fs" || s == "true") return true;
    if (s == "no" || s == "nofs" || s == "false") return false;
    throw ConfigError("few_shot entries must be yes/no, got '" + s + "'");
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double table_value(const RobustnessReport& r, TableKind kind) {
    switch (kind) {
        case TableKind::r: return r.r;
        case TableKind::acc_o: return r.acc_o;
        case TableKind::acc_a: return r.acc_a;
    }
    return r.r;
}

std::string strategy_label(Strategy s) { return s == Strategy::template_based ? "template" : "llm"; }

// One endpoint instance per distinct role id, so roles bound to the same
// endpoint share its concurrency bound and journal.
struct CellEndpointSet {
    std::map<std::string, std::unique_ptr<ModelEndpoint>> by_id;

    ModelEndpoint& get(const std::string& id) { return *by_id.at(id); }
};

CellEndpointSet make_endpoints(const RunConfig& cfg, const std::map<std::string, std::shared_ptr<Backend>>& backends,
                               const std::vector<std::string>& ids, ModelEndpoint::Options options) {
    CellEndpointSet set;
    for (const auto& id : ids) {
        if (set.by_id.contains(id)) continue;
        set.by_id.emplace(id, std::make_unique<ModelEndpoint>(cfg.endpoints.at(id), backends.at(id), options));
    }
    return set;
}

struct Prepared {
    TemplateSet templates;
    std::optional<json> mock;
    std::map<std::string, std::shared_ptr<Backend>> backends;
    std::map<std::string, TripletDataset> datasets;  // keyed by dataset path string
};

Prepared prepare(const RunConfig& cfg, const MatrixOptions& options) {
    cfg.validate();
    Prepared p;
    try {
        p.templates = cfg.template_dir ? TemplateSet::load_dir(*cfg.template_dir) : TemplateSet::builtin();
        p.templates.validate();
    } catch (const PromptError& e) {
        throw ConfigError(e.what());
    }
    if (options.mock_script) {
        p.mock = options.mock_script;
    } else if (cfg.mock_script) {
        std::ifstream in(*cfg.mock_script);
        if (!in) throw ConfigError("cannot open mock script: " + cfg.mock_script->string());
        try {
            p.mock = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("mock script " + cfg.mock_script->string() + ": " + e.what());
        }
    }
    try {
        for (const auto& [id, ep] : cfg.endpoints) p.backends.emplace(id, make_backend(ep, p.mock ? &*p.mock : nullptr));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::regex_error& e) {
        throw ConfigError(std::string("mock script regex: ") + e.what());
    }
    for (const auto& d : cfg.datasets) {
        try {
            p.datasets.emplace(d.path.string(), load_dataset(d.path, DatasetFormat::jsonl, d.domain));
        } catch (const DatasetError& e) {
            throw ConfigError(d.path.string() + ": " + e.what());
        }
    }
    return p;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        const auto datasets = j.value("datasets", json::array());
        for (const auto& d : datasets) {
            if (d.is_string()) {
                c.datasets.push_back({resolve(base_dir, d.get<std::string>()), std::nullopt});
            } else {
                DatasetSpec spec{resolve(base_dir, d.at("path").get<std::string>()), std::nullopt};
                if (d.contains("domain")) spec.domain = parse_domain_tag(d.at("domain").get<std::string>());
                c.datasets.push_back(std::move(spec));
            }
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        if (j.contains("few_shot")) {
            c.few_shot.clear();
            for (const auto& f : j.at("few_shot")) c.few_shot.push_back(parse_few_shot(f));
        }
        const auto endpoints = j.value("endpoints", json::object());
        for (const auto& [id, ep] : endpoints.items()) {
            c.endpoints.emplace(id, endpoint_config_from_json(id, ep));
        }
        c.models = j.value("models", std::vector<std::string>{});
        const auto roles = j.value("roles", json::object());
        if (roles.contains("generator")) c.generator = roles.at("generator").get<std::string>();
        if (roles.contains("classifier")) c.classifier = roles.at("classifier").get<std::string>();
        c.fluency_scorer = roles.value("fluency_scorer", std::string());
        c.embedder = roles.value("embedder", std::string());
        c.n = j.value("n", c.n);
        if (j.contains("filter")) c.filter = filter_config_from_json(j.at("filter"));
        c.j = j.value("j", c.j);
        c.seed = j.value("seed", c.seed);
        const auto gen = j.value("generation", json::object());
        c.generation.generation_temperature = gen.value("generation_temperature", c.generation.generation_temperature);
        c.generation.classification_temperature =
            gen.value("classification_temperature", c.generation.classification_temperature);
        c.generation.max_tokens = gen.value("max_tokens", c.generation.max_tokens);
        c.generation.max_attempts = gen.value("max_attempts", j.value("max_attempts", c.generation.max_attempts));
        c.few_shot_budget.max_triplets = j.value("few_shot_max_triplets", c.few_shot_budget.max_triplets);
        c.workers = j.value("workers", c.workers);
        c.calibration_batch = j.value("calibration_batch", c.calibration_batch);
        c.bold_groups = j.value("bold_groups", c.bold_groups);
        if (j.contains("mock_script")) c.mock_script = resolve(base_dir, j.at("mock_script").get<std::string>());
        if (j.contains("template_dir")) c.template_dir = resolve(base_dir, j.at("template_dir").get<std::string>());
        if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

std::vector<std::string> RunConfig::model_columns() const {
    if (!models.empty()) return models;
    if (classifier) return {*classifier};
    return {};
}

std::string RunConfig::generator_for(const std::string& model) const { return generator.value_or(model); }
std::string RunConfig::classifier_for(const std::string& model) const { return classifier.value_or(model); }

void RunConfig::validate() const {
    if (datasets.empty()) throw ConfigError("config lists no datasets");
    if (strategies.empty()) throw ConfigError("config lists no strategies");
    if (few_shot.empty()) throw ConfigError("config lists no few_shot settings");
    if (n == 0 || n % 3 != 0) throw ConfigError("n must be a positive multiple of 3, got " + std::to_string(n));
    if (j < 1.0) throw ConfigError("j must be >= 1");
    if (generation.max_attempts == 0) throw ConfigError("max_attempts must be positive");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (calibration_batch == 0) throw ConfigError("calibration_batch must be positive");
    const auto cols = model_columns();
    if (cols.empty()) throw ConfigError("config names no models (set 'models' or roles.classifier)");
    auto require = [&](const std::string& role, const std::string& id, Capabilities need) {
        if (id.empty()) throw ConfigError("role '" + role + "' is not bound");
        auto it = endpoints.find(id);
        if (it == endpoints.end()) throw ConfigError("role '" + role + "' names unknown endpoint '" + id + "'");
        const auto& caps = it->second.capabilities;
        if ((need.chat && !caps.chat) || (need.logprobs && !caps.logprobs) || (need.embeddings && !caps.embeddings)) {
            throw ConfigError("endpoint '" + id + "' lacks a capability required by role '" + role + "'");
        }
    };
    for (const auto& m : cols) {
        require("generator", generator_for(m), {true, false, false});
        require("classifier", classifier_for(m), {true, false, false});
    }
    require("fluency_scorer", fluency_scorer, {false, true, false});
    require("embedder", embedder, {false, false, true});
    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (!names.insert(d.path.stem().string()).second) {
            throw ConfigError("two datasets share the name '" + d.path.stem().string() + "'");
        }
    }
    for (const auto& group : bold_groups) {
        for (const auto& m : group) {
            if (std::find(cols.begin(), cols.end(), m) == cols.end()) {
                throw ConfigError("bold group names unknown model '" + m + "'");
            }
        }
    }
}

json RunConfig::to_json() const {
    json ds = json::array();
    for (const auto& d : datasets) {
        json e = {{"path", d.path.string()}};
        if (d.domain) e["domain"] = kgrobust::to_string(*d.domain);
        ds.push_back(e);
    }
    json strat = json::array();
    for (auto s : strategies) strat.push_back(kgrobust::to_string(s));
    json eps = json::object();
    for (const auto& [id, ep] : endpoints) eps[id] = kgrobust::to_json(ep);
    json roles = {{"fluency_scorer", fluency_scorer}, {"embedder", embedder}};
    if (generator) roles["generator"] = *generator;
    if (classifier) roles["classifier"] = *classifier;
    json out = {{"datasets", ds},
                {"strategies", strat},
                {"few_shot", few_shot},
                {"endpoints", eps},
                {"models", models},
                {"roles", roles},
                {"n", n},
                {"filter", kgrobust::to_json(filter)},
                {"j", j},
                {"seed", seed},
                {"generation",
                 {{"generation_temperature", generation.generation_temperature},
                  {"classification_temperature", generation.classification_temperature},
                  {"max_tokens", generation.max_tokens},
                  {"max_attempts", generation.max_attempts}}},
                {"few_shot_max_triplets", few_shot_budget.max_triplets},
                {"workers", workers},
                {"calibration_batch", calibration_batch},
                {"bold_groups", bold_groups},
                {"out_dir", out_dir.string()}};
    if (mock_script) out["mock_script"] = mock_script->string();
    if (template_dir) out["template_dir"] = template_dir->string();
    return out;
}

bool MatrixResult::complete() const { return failures() == 0; }

std::size_t MatrixResult::failures() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const CellStatus& c) { return !c.report; }));
}

std::vector<RobustnessReport> MatrixResult::reports() const {
    std::vector<RobustnessReport> out;
    for (const auto& c : cells) {
        if (c.report) out.push_back(*c.report);
    }
    return out;
}

MatrixResult run_matrix(const RunConfig& cfg, const MatrixOptions& options) {
    auto prep = prepare(cfg, options);
    std::filesystem::create_directories(cfg.out_dir);

    CellConfig cell_cfg;
    cell_cfg.n = cfg.n;
    cell_cfg.filter = cfg.filter;
    cell_cfg.j = cfg.j;
    cell_cfg.generation = cfg.generation;
    cell_cfg.few_shot_budget = cfg.few_shot_budget;
    cell_cfg.workers = cfg.workers;
    cell_cfg.seed = cfg.seed;

    MatrixResult result;
    for (const auto& ds_spec : cfg.datasets) {
        const auto& dataset = prep.datasets.at(ds_spec.path.string());
        for (auto strategy : cfg.strategies) {
            for (bool fs : cfg.few_shot) {
                for (const auto& model : cfg.model_columns()) {
                    CellStatus status;
                    status.condition = {model, dataset.name, strategy, fs};
                    status.run_id = make_run_id(status.condition, cfg.seed);
                    const auto run_dir = cfg.out_dir / status.run_id;
                    const auto report_path = run_dir / "report.json";
                    const auto journal_path = run_dir / "journal.jsonl";

                    if (!options.only_run_ids.empty() && !options.only_run_ids.contains(status.run_id)) {
                        if (std::filesystem::exists(report_path)) {
                            status.report = load_run(run_dir).report;
                            status.skipped = true;
                            result.cells.push_back(std::move(status));
                        }
                        continue;
                    }
                    if (options.resume && std::filesystem::exists(report_path)) {
                        status.report = load_run(run_dir).report;
                        status.skipped = true;
                        result.cells.push_back(std::move(status));
                        continue;
                    }
                    std::filesystem::create_directories(run_dir);
                    std::filesystem::remove(report_path);

                    std::optional<JournalCache> cache;
                    if (options.resume && std::filesystem::exists(journal_path)) {
                        cache = JournalCache::load(journal_path);
                    }
                    try {
                        Journal journal(journal_path, options.resume);
                        ModelEndpoint::Options ep_opts;
                        ep_opts.journal = &journal;
                        ep_opts.cache = cache ? &*cache : nullptr;
                        ep_opts.replay_only = options.replay_only;
                        ep_opts.sleep = options.sleep;
                        ep_opts.jitter_seed = cfg.seed ^ 0x5eedULL;
                        const auto gen_id = cfg.generator_for(model);
                        const auto cls_id = cfg.classifier_for(model);
                        auto eps = make_endpoints(cfg, prep.backends, {gen_id, cls_id, cfg.fluency_scorer, cfg.embedder},
                                                  ep_opts);
                        CellEndpoints roles{eps.get(gen_id), eps.get(cls_id), eps.get(cfg.fluency_scorer),
                                            eps.get(cfg.embedder)};
                        json extra = {{"dataset_path", ds_spec.path.filename().string()},
                                      {"dataset_domain", to_string(dataset.domain)}};
                        auto cell = run_cell(status.condition, dataset, roles, cell_cfg, run_dir, extra, prep.templates);
                        status.report = cell.report;
                    } catch (const GatewayError& e) {
                        status.error = e.what();
                        status.endpoint_failure = true;
                    } catch (const FilterError& e) {
                        status.error = e.what();
                        status.endpoint_failure = true;
                    } catch (const std::exception& e) {
                        status.error = e.what();
                    }
                    if (status.report) canonicalize_journal(journal_path);
                    result.cells.push_back(std::move(status));
                }
            }
        }
    }

    json cells = json::array();
    for (const auto& c : result.cells) {
        json e = {{"run_id", c.run_id}, {"condition", to_json(c.condition)}, {"ok", c.report.has_value()}};
        if (!c.error.empty()) e["error"] = c.error;
        if (c.endpoint_failure) e["endpoint_failure"] = true;
        cells.push_back(std::move(e));
    }
    std::ofstream out(cfg.out_dir / "matrix.json", std::ios::binary | std::ios::trunc);
    out << json{{"seed", cfg.seed}, {"cells", cells}}.dump(2) << '\n';
    return result;
}

std::vector<RobustnessReport> load_reports(const std::filesystem::path& out_dir) {
    std::vector<std::filesystem::path> dirs;
    if (!std::filesystem::is_directory(out_dir)) throw ConfigError("no run directory at " + out_dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "report.json")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<RobustnessReport> out;
    for (const auto& d : dirs) out.push_back(load_run(d).report);
    return out;
}

TableKind parse_table_kind(std::string_view text) {
    if (text == "r" || text == "R") return TableKind::r;
    if (text == "acc_o" || text == "ACC_O") return TableKind::acc_o;
    if (text == "acc_a" || text == "ACC_A") return TableKind::acc_a;
    throw ConfigError("unknown table kind '" + std::string(text) + "' (expected r, acc_o or acc_a)");
}

TableFormat parse_table_format(std::string_view text) {
    if (text == "csv") return TableFormat::csv;
    if (text == "markdown" || text == "md") return TableFormat::markdown;
    throw ConfigError("unknown table format '" + std::string(text) + "' (expected csv or markdown)");
}

std::string format_fixed_half_even(double value, int places) {
    char buf[512];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    std::string s(buf, res.ptr);
    bool negative = false;
    if (!s.empty() && s[0] == '-') {
        negative = true;
        s.erase(0, 1);
    }
    auto dot = s.find('.');
    std::string int_part = dot == std::string::npos ? s : s.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
    const auto keep = static_cast<std::size_t>(places);
    if (frac.size() <= keep) {
        frac.append(keep - frac.size(), '0');
    } else {
        const std::string rest = frac.substr(keep);
        frac.resize(keep);
        std::string digits = int_part + frac;
        const bool beyond_half = rest[0] > '5' || (rest[0] == '5' && rest.find_first_not_of('0', 1) != std::string::npos);
        const bool exactly_half = rest[0] == '5' && !beyond_half;
        const bool odd = (digits.back() - '0') % 2 == 1;
        if (beyond_half || (exactly_half && odd)) {
            int i = static_cast<int>(digits.size()) - 1;
            for (; i >= 0; --i) {
                if (digits[i] == '9') {
                    digits[i] = '0';
                } else {
                    ++digits[i];
                    break;
                }
            }
            if (i < 0) digits.insert(digits.begin(), '1');
        }
        int_part = digits.substr(0, digits.size() - keep);
        frac = digits.substr(digits.size() - keep);
    }
    std::string out = int_part;
    if (keep > 0) out += "." + frac;
    if (negative && out.find_first_not_of("0.") != std::string::npos) out.insert(out.begin(), '-');
    return out;
}

ReportTable build_table(const std::vector<RobustnessReport>& reports, TableKind kind,
                        const std::vector<std::vector<std::string>>& bold_groups) {
    ReportTable t;
    t.kind = kind;
    std::vector<std::string> datasets;
    for (const auto& r : reports) {
        if (std::find(t.columns.begin(), t.columns.end(), r.condition.model_id) == t.columns.end()) {
            t.columns.push_back(r.condition.model_id);
        }
        if (std::find(datasets.begin(), datasets.end(), r.condition.dataset) == datasets.end()) {
            datasets.push_back(r.condition.dataset);
        }
    }
    using RowKey = std::tuple<std::size_t, int, int>;
    std::map<RowKey, std::map<std::string, const RobustnessReport*>> grid;
    for (const auto& r : reports) {
        const auto d = static_cast<std::size_t>(std::find(datasets.begin(), datasets.end(), r.condition.dataset) -
                                                datasets.begin());
        RowKey key{d, static_cast<int>(r.condition.strategy), r.condition.few_shot ? 1 : 0};
        auto [it, inserted] = grid[key].emplace(r.condition.model_id, &r);
        if (!inserted) throw ConfigError("duplicate report for " + r.condition.key());
    }
    for (const auto& [key, cells] : grid) {
        ReportTable::Row row;
        row.dataset = datasets[std::get<0>(key)];
        row.strategy = static_cast<Strategy>(std::get<1>(key));
        row.few_shot = std::get<2>(key) == 1;
        for (const auto& col : t.columns) {
            auto it = cells.find(col);
            if (it == cells.end()) {
                throw ConfigError("ragged grid: no report for model '" + col + "' on " + row.dataset + "/" +
                                  strategy_label(row.strategy) + "/" + (row.few_shot ? "fs" : "nofs"));
            }
            row.values.push_back(table_value(*it->second, kind));
        }
        row.bold.assign(t.columns.size(), false);
        if (t.columns.size() >= 2) {
            for (const auto& group : bold_groups) {
                std::vector<std::size_t> idx;
                for (const auto& m : group) {
                    auto it = std::find(t.columns.begin(), t.columns.end(), m);
                    if (it != t.columns.end()) idx.push_back(static_cast<std::size_t>(it - t.columns.begin()));
                }
                if (idx.size() < 2) continue;
                std::string best;
                double best_value = -1.0;
                for (auto i : idx) {
                    const auto printed = format_fixed_half_even(row.values[i]);
                    const double v = std::stod(printed);
                    if (v > best_value) {
                        best_value = v;
                        best = printed;
                    }
                }
                for (auto i : idx) {
                    if (format_fixed_half_even(row.values[i]) == best) row.bold[i] = true;
                }
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string emit_table(const ReportTable& t, TableFormat format) {
    std::ostringstream out;
    if (format == TableFormat::csv) {
        out << "dataset,strategy,few_shot";
        for (const auto& c : t.columns) out << ',' << csv_field(c);
        out << '\n';
        for (const auto& row : t.rows) {
            out << csv_field(row.dataset) << ',' << strategy_label(row.strategy) << ','
                << (row.few_shot ? "yes" : "no");
            for (double v : row.values) out << ',' << shortest(v);
            out << '\n';
        }
        return out.str();
    }
    out << "| Dataset | Generation Strategy | FS |";
    for (const auto& c : t.columns) out << ' ' << c << " |";
    out << "\n|---|---|---|";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << "---:|";
    out << '\n';
    for (const auto& row : t.rows) {
        out << "| " << row.dataset << " | " << strategy_label(row.strategy) << " | " << (row.few_shot ? "yes" : "no")
            << " |";
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            const auto v = format_fixed_half_even(row.values[i]);
            out << ' ' << (row.bold[i] ? "**" + v + "**" : v) << " |";
        }
        out << '\n';
    }
    return out.str();
}

std::string emit_tables(const std::vector<RobustnessReport>& reports, TableKind kind, TableFormat format,
                        const std::vector<std::vector<std::string>>& bold_groups) {
    return emit_table(build_table(reports, kind, bold_groups), format);
}

std::string emit_calibration(const CalibrationSummary& summary) {
    auto rows = summary.rows;
    std::sort(rows.begin(), rows.end(), [](const CalibrationRow& a, const CalibrationRow& b) {
        return std::tie(a.key, a.metric, a.batch) < std::tie(b.key, b.metric, b.batch);
    });
    std::ostringstream out;
    out << "model,dataset,strategy,metric,batch,min,q1,median,q3,max,n,outliers\n";
    for (const auto& r : rows) {
        out << csv_field(r.key.model) << ',' << csv_field(r.key.dataset) << ',' << csv_field(r.key.strategy) << ','
            << r.metric << ',' << r.batch << ',' << shortest(r.stats.min) << ',' << shortest(r.stats.q1) << ','
            << shortest(r.stats.median) << ',' << shortest(r.stats.q3) << ',' << shortest(r.stats.max) << ','
            << r.stats.n << ',' << r.stats.outliers << '\n';
    }
    return out.str();
}

CalibrationSummary run_calibration(const RunConfig& cfg, const MatrixOptions& options) {
    auto prep = prepare(cfg, options);
    ModelEndpoint::Options ep_opts;
    ep_opts.sleep = options.sleep;
    ep_opts.jitter_seed = cfg.seed ^ 0x5eedULL;
    CalibrationSummary out;
    for (const auto& model : cfg.model_columns()) {
        const auto gen_id = cfg.generator_for(model);
        auto eps = make_endpoints(cfg, prep.backends, {gen_id, cfg.fluency_scorer, cfg.embedder}, ep_opts);
        for (const auto& ds_spec : cfg.datasets) {
            const auto& dataset = prep.datasets.at(ds_spec.path.string());
            const auto sample = sample_and_label(dataset, cfg.n, cfg.seed);
            for (auto strategy : cfg.strategies) {
                std::vector<std::vector<std::pair<std::string, std::string>>> per(sample.labeled.size());
                parallel_for(per.size(), cfg.workers, [&](std::size_t i) {
                    auto sr = verbalize(sample.labeled[i], strategy, &eps.get(gen_id), cfg.generation, prep.templates);
                    for (auto& c : generate_adversarial(sr, eps.get(gen_id), nullptr, cfg.generation, prep.templates)) {
                        per[i].emplace_back(sr.original_sentence, c.adversarial_sentence);
                    }
                });
                std::vector<std::pair<std::string, std::string>> samples;
                for (auto& v : per) samples.insert(samples.end(), v.begin(), v.end());
                if (samples.empty()) continue;
                auto summary = calibrate(samples, eps.get(cfg.fluency_scorer), eps.get(cfg.embedder), cfg.filter,
                                         {model, dataset.name, std::string(to_string(strategy))}, cfg.calibration_batch);
                out.rows.insert(out.rows.end(), summary.rows.begin(), summary.rows.end());
            }
        }
    }
    return out;
}

}  // namespace kgrobust
