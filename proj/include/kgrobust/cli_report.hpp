// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrobust/evaluator.hpp"
#include "kgrobust/kg_store.hpp"
#include "kgrobust/model_gateway.hpp"
#include "kgrobust/prompt_forge.hpp"
#include "kgrobust/scoring_filter.hpp"

namespace kgrobust {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetSpec {
    std::filesystem::path path;
    std::optional<DomainTag> domain;
};

/// Run configuration. Relative paths resolve against the config file's directory.
struct RunConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<Strategy> strategies{Strategy::template_based, Strategy::llm_based};
    std::vector<bool> few_shot{false, true};
    std::map<std::string, EndpointConfig> endpoints;
    // Evaluated models. Each one generates its own adversarial prompts and is
    // classified on them unless `generator`/`classifier` pin a fixed endpoint.
    std::vector<std::string> models;
    std::optional<std::string> generator;
    std::optional<std::string> classifier;
    std::string fluency_scorer;
    std::string embedder;
    std::size_t n = 30;
    FilterConfig filter;
    double j = kDefaultJ;
    std::uint64_t seed = 0;
    GenerationOptions generation;
    FewShotBudget few_shot_budget;
    std::size_t workers = 4;
    std::size_t calibration_batch = 500;
    std::vector<std::vector<std::string>> bold_groups;  // columns compared for bolding
    std::optional<std::filesystem::path> mock_script;
    std::optional<std::filesystem::path> template_dir;
    std::filesystem::path out_dir = "runs";

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
    static RunConfig load(const std::filesystem::path& path);
    /// Throws ConfigError on unbound roles, unknown endpoints, n % 3 != 0 and the like.
    void validate() const;
    nlohmann::json to_json() const;

    std::vector<std::string> model_columns() const;
    std::string generator_for(const std::string& model) const;
    std::string classifier_for(const std::string& model) const;
};

struct CellStatus {
    Condition condition;
    std::string run_id;
    std::optional<RobustnessReport> report;
    std::string error;  // empty on success
    bool endpoint_failure = false;
    bool skipped = false;  // already complete on resume
};

struct MatrixResult {
    std::vector<CellStatus> cells;

    bool complete() const;
    std::size_t failures() const;
    std::vector<RobustnessReport> reports() const;
};

struct MatrixOptions {
    bool resume = false;                // reuse journals and skip cells with a report
    std::set<std::string> only_run_ids;  // empty: all cells
    bool replay_only = false;
    std::optional<nlohmann::json> mock_script;  // overrides cfg.mock_script
    SleepFn sleep;                               // backoff sleeper, for tests
};

/// Every (model, dataset, strategy, few-shot) cell, each under out_dir/<run_id>.
/// A failing cell is recorded and the remaining cells still run.
MatrixResult run_matrix(const RunConfig& cfg, const MatrixOptions& options = {});

/// Reports persisted under `out_dir` (one per run directory holding report.json), sorted by run id.
std::vector<RobustnessReport> load_reports(const std::filesystem::path& out_dir);

enum class TableKind { r, acc_o, acc_a };
enum class TableFormat { csv, markdown };

TableKind parse_table_kind(std::string_view text);
TableFormat parse_table_format(std::string_view text);

struct ReportTable {
    struct Row {
        std::string dataset;
        Strategy strategy = Strategy::template_based;
        bool few_shot = false;
        std::vector<double> values;  // one per column
        std::vector<bool> bold;
    };
    TableKind kind = TableKind::r;
    std::vector<std::string> columns;  // model ids
    std::vector<Row> rows;
};

/// Builds the grid. Throws ConfigError when some (row, column) cell is missing or duplicated.
ReportTable build_table(const std::vector<RobustnessReport>& reports, TableKind kind,
                        const std::vector<std::vector<std::string>>& bold_groups = {});

/// Half-even rounding of the shortest decimal form to `places` digits.
std::string format_fixed_half_even(double value, int places = 3);

/// Markdown prints 3 decimals with bold marks; CSV prints each value in
/// shortest round-trip form so it parses back to the report field.
std::string emit_table(const ReportTable& table, TableFormat format);
std::string emit_tables(const std::vector<RobustnessReport>& reports, TableKind kind, TableFormat format,
                        const std::vector<std::vector<std::string>>& bold_groups = {});

/// CSV rows sorted by (model, dataset, strategy, metric, batch).
std::string emit_calibration(const CalibrationSummary& summary);

/// Samples each (model, dataset, strategy), collects unfiltered candidates, and scores them.
CalibrationSummary run_calibration(const RunConfig& cfg, const MatrixOptions& options = {});

}  // namespace kgrobust
