// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kgrobust/cli_report.hpp"
#include "test_support.hpp"

using namespace kgrobust;
using nlohmann::json;

namespace {

const std::vector<std::vector<std::string>> kBoldGroups{{"Gemma2-2B", "Gemma2-9B"}, {"Phi-3-mini", "Phi-3-small"}};

std::vector<RobustnessReport> reports_for(const std::string& group) {
    std::vector<RobustnessReport> out;
    for (const auto& row : kgtest::reference_rows()) {
        if (row.group != group) continue;
        RobustnessReport r;
        r.condition = {row.model, row.dataset, parse_strategy(row.strategy), row.few_shot};
        r.run_id = make_run_id(r.condition, 0);
        r.acc_o = row.acc_o;
        r.acc_a = row.acc_a;
        r.r = row.r;
        out.push_back(r);
    }
    return out;
}

// The scripted matrix config with every path made absolute, so it can be
// rewritten into a temp directory and handed to the CLI.
json matrix_config(const std::filesystem::path& out_dir) {
    auto cfg = kgtest::read_json(kgtest::fixture("mock_matrix.json"));
    json datasets = json::array();
    for (const auto& d : cfg["datasets"]) datasets.push_back(kgtest::fixture(d.get<std::string>()).string());
    cfg["datasets"] = datasets;
    cfg["mock_script"] = kgtest::fixture("scripted_mock.json").string();
    cfg["out_dir"] = out_dir.string();
    return cfg;
}

std::filesystem::path write_config(const kgtest::TempDir& dir, const json& cfg, const std::string& name = "cfg.json") {
    const auto path = dir / name;
    std::ofstream(path) << cfg.dump(2);
    return path;
}

int run_cli(const std::string& args) {
    const auto cmd = std::string(KGROBUST_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, LoadsFixtureAndResolvesPaths) {
    const auto cfg = RunConfig::load(kgtest::fixture("mock_matrix.json"));
    ASSERT_EQ(cfg.datasets.size(), 3u);
    EXPECT_EQ(cfg.datasets[0].path, kgtest::fixture("geo_facts.jsonl"));
    EXPECT_EQ(cfg.strategies, (std::vector<Strategy>{Strategy::template_based, Strategy::llm_based}));
    EXPECT_EQ(cfg.few_shot, (std::vector<bool>{false, true}));
    EXPECT_EQ(cfg.model_columns(), std::vector<std::string>{"mock-lm"});
    EXPECT_EQ(cfg.generator_for("mock-lm"), "mock-lm");
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ValidationErrors) {
    const auto base = kgtest::read_json(kgtest::fixture("mock_matrix.json"));
    auto expect_invalid = [&](json j, const std::string& needle) {
        try {
            RunConfig::from_json(j, kgtest::fixture("")).validate();
            FAIL() << "expected ConfigError mentioning " << needle;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    auto j = base;
    j["n"] = 31;
    expect_invalid(j, "multiple of 3");
    j = base;
    j["roles"].erase("embedder");
    expect_invalid(j, "embedder");
    j = base;
    j["models"] = {"ghost"};
    expect_invalid(j, "ghost");
    j = base;
    j["roles"]["fluency_scorer"] = "mock-lm";
    expect_invalid(j, "capability");
    j = base;
    j["few_shot"] = {"maybe"};
    expect_invalid(j, "few_shot");
    j = base;
    j["strategies"] = {"vibes"};
    expect_invalid(j, "strategy");
    j = base;
    j["bold_groups"] = json::array({json::array({"mock-lm", "other"})});
    expect_invalid(j, "other");
    EXPECT_THROW(RunConfig::load("/nonexistent.json"), ConfigError);
}

TEST(Config, SnapshotRoundTrip) {
    const auto cfg = RunConfig::load(kgtest::fixture("mock_matrix.json"));
    const auto again = RunConfig::from_json(cfg.to_json());
    EXPECT_EQ(again.to_json(), cfg.to_json());
}

TEST(Report, HalfEvenRounding) {
    EXPECT_EQ(format_fixed_half_even(0.0625), "0.062");
    EXPECT_EQ(format_fixed_half_even(0.1235), "0.124");
    EXPECT_EQ(format_fixed_half_even(0.1245), "0.124");
    EXPECT_EQ(format_fixed_half_even(0.12451), "0.125");
    EXPECT_EQ(format_fixed_half_even(0.9995), "1.000");
    EXPECT_EQ(format_fixed_half_even(0.62), "0.620");
    EXPECT_EQ(format_fixed_half_even(-0.0004), "0.000");
    EXPECT_EQ(format_fixed_half_even(1e-20), "0.000");
    EXPECT_EQ(format_fixed_half_even(2.5, 0), "2");
    EXPECT_EQ(format_fixed_half_even(3.5, 0), "4");
}

TEST(Report, TableLayoutAndBoldMatchReference) {
    for (const char* group : {"first", "second"}) {
        const auto reports = reports_for(group);
        const auto rows = kgtest::reference_rows();
        for (auto kind : {TableKind::r, TableKind::acc_o, TableKind::acc_a}) {
            const auto t = build_table(reports, kind, kBoldGroups);
            std::vector<std::string> models;
            for (const auto& r : reports) {
                if (std::find(models.begin(), models.end(), r.condition.model_id) == models.end()) {
                    models.push_back(r.condition.model_id);
                }
            }
            EXPECT_EQ(t.columns, models);
            ASSERT_EQ(t.rows.size() * t.columns.size(), reports.size());
            for (const auto& ref : rows) {
                if (ref.group != group) continue;
                const auto row = std::find_if(t.rows.begin(), t.rows.end(), [&](const auto& r) {
                    return r.dataset == ref.dataset && r.strategy == parse_strategy(ref.strategy) &&
                           r.few_shot == ref.few_shot;
                });
                ASSERT_NE(row, t.rows.end());
                const auto col = static_cast<std::size_t>(
                    std::find(t.columns.begin(), t.columns.end(), ref.model) - t.columns.begin());
                const bool want = kind == TableKind::r ? ref.bold_r : kind == TableKind::acc_o ? ref.bold_acc_o
                                                                                                 : ref.bold_acc_a;
                EXPECT_EQ(row->bold[col], want) << group << " " << ref.dataset << " " << ref.strategy << " "
                                                << ref.model << " kind=" << static_cast<int>(kind);
                const auto& text = kind == TableKind::r ? ref.r_text : kind == TableKind::acc_o ? ref.acc_o_text
                                                                                                  : ref.acc_a_text;
                EXPECT_EQ(format_fixed_half_even(row->values[col]), text);
            }
        }
    }
}

TEST(Report, MarkdownGolden) {
    auto reports = reports_for("first");
    reports.erase(std::remove_if(reports.begin(), reports.end(),
                                 [](const auto& r) {
                                     return r.condition.dataset != "T-REx" ||
                                            r.condition.strategy != Strategy::template_based;
                                 }),
                  reports.end());
    const auto md = emit_tables(reports, TableKind::r, TableFormat::markdown, kBoldGroups);
    EXPECT_EQ(md,
              "| Dataset | Generation Strategy | FS | Gemma2-2B | Gemma2-9B | Phi-3-mini | Phi-3-small |\n"
              "|---|---|---|---:|---:|---:|---:|\n"
              "| T-REx | template | no | 0.620 | **0.631** | 0.607 | **0.639** |\n"
              "| T-REx | template | yes | 0.610 | **0.641** | 0.639 | **0.642** |\n");
}

TEST(Report, CsvRoundTripsValues) {
    RobustnessReport r;
    r.condition = {"m", "d", Strategy::llm_based, true};
    r.r = 0.1 + 0.2;
    r.acc_o = 2.0 / 3.0;
    const auto csv = emit_tables({r}, TableKind::r, TableFormat::csv);
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    EXPECT_EQ(header, "dataset,strategy,few_shot,m");
    EXPECT_EQ(line.substr(0, line.rfind(',')), "d,llm,yes");
    EXPECT_EQ(std::stod(line.substr(line.rfind(',') + 1)), r.r);
    const auto acc = emit_tables({r}, TableKind::acc_o, TableFormat::csv);
    EXPECT_EQ(std::stod(acc.substr(acc.rfind(',') + 1)), r.acc_o);
}

TEST(Report, SingleModelIsNeverBold) {
    auto reports = reports_for("first");
    reports.erase(std::remove_if(reports.begin(), reports.end(),
                                 [](const auto& r) { return r.condition.model_id != "Gemma2-9B"; }),
                  reports.end());
    const auto t = build_table(reports, TableKind::r, kBoldGroups);
    for (const auto& row : t.rows) EXPECT_FALSE(row.bold[0]);
    EXPECT_EQ(emit_table(t, TableFormat::markdown).find("**"), std::string::npos);
}

TEST(Report, TiesAreAllBold) {
    RobustnessReport a, b;
    a.condition = {"x", "d", Strategy::template_based, false};
    b.condition = {"y", "d", Strategy::template_based, false};
    a.r = 0.6204;
    b.r = 0.6196;
    const auto t = build_table({a, b}, TableKind::r, {{"x", "y"}});
    EXPECT_TRUE(t.rows[0].bold[0]);
    EXPECT_TRUE(t.rows[0].bold[1]);
}

TEST(Report, RaggedAndDuplicateGridsRejected) {
    auto reports = reports_for("first");
    reports.pop_back();
    EXPECT_THROW(build_table(reports, TableKind::r), ConfigError);
    reports = reports_for("first");
    reports.push_back(reports.front());
    EXPECT_THROW(build_table(reports, TableKind::r), ConfigError);
    EXPECT_THROW(parse_table_kind("rr"), ConfigError);
    EXPECT_THROW(parse_table_format("xlsx"), ConfigError);
}

TEST(Report, CalibrationCsvSorted) {
    CalibrationSummary s;
    s.rows.push_back({{"b", "d", "template_based"}, "tf", 0, BoxStats::compute(std::vector<double>{0.5})});
    s.rows.push_back({{"a", "d", "template_based"}, "tf", 1, BoxStats::compute(std::vector<double>{0.25})});
    s.rows.push_back({{"a", "d", "template_based"}, "sf", 0, BoxStats::compute(std::vector<double>{1.0})});
    s.rows.push_back({{"a", "d", "template_based"}, "tf", 0, BoxStats::compute(std::vector<double>{0.75})});
    EXPECT_EQ(emit_calibration(s),
              "model,dataset,strategy,metric,batch,min,q1,median,q3,max,n,outliers\n"
              "a,d,template_based,sf,0,1,1,1,1,1,1,0\n"
              "a,d,template_based,tf,0,0.75,0.75,0.75,0.75,0.75,1,0\n"
              "a,d,template_based,tf,1,0.25,0.25,0.25,0.25,0.25,1,0\n"
              "b,d,template_based,tf,0,0.5,0.5,0.5,0.5,0.5,1,0\n");
}

TEST(Matrix, RunsEveryCellAndReportsLoad) {
    kgtest::TempDir dir;
    auto cfg = RunConfig::from_json(matrix_config(dir / "runs"));
    const auto result = run_matrix(cfg);
    ASSERT_EQ(result.cells.size(), 12u);
    EXPECT_TRUE(result.complete());
    const auto reports = load_reports(dir / "runs");
    EXPECT_EQ(reports.size(), 12u);
    const auto t = build_table(reports, TableKind::r);
    EXPECT_EQ(t.rows.size(), 12u);
    EXPECT_EQ(t.rows[0].dataset, "geo_facts");
    EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "matrix.json"));
    for (const auto& r : reports) EXPECT_EQ(recompute_report(dir / "runs" / r.run_id), r);
}

TEST(Matrix, FailingCellDoesNotStopOthers) {
    kgtest::TempDir dir;
    auto cfg = RunConfig::from_json(matrix_config(dir / "runs"));
    auto script = kgtest::read_json(kgtest::fixture("scripted_mock.json"));
    // Only the few-shot template cell of the medical dataset asks for this.
    script["chat"].insert(script["chat"].begin(), json{{"kind", "adversarialize"},
                                                       {"contains", "Here is five examples"},
                                                       {"regex", "\\nSentence: [^\\n]* is contraindicated with "},
                                                       {"reply", "x"},
                                                       {"fail_first", 1000000}});
    MatrixOptions opts;
    opts.mock_script = script;
    opts.sleep = kgtest::no_sleep;
    const auto result = run_matrix(cfg, opts);
    ASSERT_EQ(result.cells.size(), 12u);
    EXPECT_EQ(result.failures(), 1u);
    for (const auto& c : result.cells) {
        const bool target = c.condition.dataset == "med_facts" && c.condition.strategy == Strategy::template_based &&
                            c.condition.few_shot;
        EXPECT_EQ(!c.report, target) << c.run_id;
        if (target) {
            EXPECT_TRUE(c.endpoint_failure);
            EXPECT_NE(c.error.find("retries exhausted"), std::string::npos);
        }
    }
    const auto matrix = kgtest::read_json(dir / "runs" / "matrix.json");
    EXPECT_EQ(matrix["cells"].size(), 12u);

    // Resuming with a healthy script finishes only the failed cell.
    MatrixOptions resume;
    resume.resume = true;
    const auto second = run_matrix(cfg, resume);
    EXPECT_TRUE(second.complete());
    EXPECT_EQ(std::count_if(second.cells.begin(), second.cells.end(), [](const auto& c) { return !c.skipped; }), 1);
}

TEST(Matrix, ReplayOnlyReproducesFromJournal) {
    kgtest::TempDir dir;
    auto cfg = RunConfig::from_json(matrix_config(dir / "runs"));
    cfg.datasets.resize(1);
    cfg.strategies = {Strategy::llm_based};
    const auto first = run_matrix(cfg);
    ASSERT_TRUE(first.complete());
    const auto id = first.cells[0].run_id;
    const auto pairs = kgtest::read_file(dir / "runs" / id / "pairs.jsonl");
    std::filesystem::remove(dir / "runs" / id / "report.json");

    MatrixOptions opts;
    opts.resume = true;
    opts.replay_only = true;
    opts.mock_script = json{{"chat_default", "never used"}};
    const auto replay = run_matrix(cfg, opts);
    ASSERT_TRUE(replay.complete()) << replay.cells[0].error;
    EXPECT_EQ(kgtest::read_file(dir / "runs" / id / "pairs.jsonl"), pairs);
    EXPECT_EQ(*replay.cells[0].report, *first.cells[0].report);
}

TEST(Cli, ExitCodes) {
    kgtest::TempDir dir;
    const auto good = write_config(dir, matrix_config(dir / "runs"));
    EXPECT_EQ(run_cli("--config " + good.string() + " run"), 0);
    EXPECT_EQ(run_cli("--config " + good.string() + " report --kind all --verify --output " +
                      (dir / "tables.md").string()),
              0);
    const auto tables = kgtest::read_file(dir / "tables.md");
    EXPECT_NE(tables.find("| Dataset | Generation Strategy | FS | mock-lm |"), std::string::npos);

    EXPECT_EQ(run_cli("--config " + (dir / "missing.json").string() + " run"), 1);
    EXPECT_EQ(run_cli("--config " + good.string() + " --n 31 run"), 1);
    EXPECT_EQ(run_cli("--config " + good.string() + " report --kind nonsense"), 1);
    EXPECT_EQ(run_cli("bogus-subcommand"), 1);

    auto broken = matrix_config(dir / "runs-broken");
    const auto script_path = dir / "failing_mock.json";
    std::ofstream(script_path) << json{{"chat", {{{"reply", "x"}, {"fail_first", 1000000}}}}}.dump();
    broken["mock_script"] = script_path.string();
    broken["endpoints"]["mock-lm"]["limits"] = {{"max_retries", 1}, {"backoff_base_ms", 0}, {"backoff_cap_ms", 0}};
    EXPECT_EQ(run_cli("--config " + write_config(dir, broken, "broken.json").string() + " run"), 2);

    auto partial = matrix_config(dir / "runs-partial");
    auto script = kgtest::read_json(kgtest::fixture("scripted_mock.json"));
    script["chat"].insert(script["chat"].begin(),
                          json{{"kind", "verbalize"}, {"contains", "Maida Vale"}, {"reply", "   "}});
    const auto partial_script = dir / "partial_mock.json";
    std::ofstream(partial_script) << script.dump();
    partial["mock_script"] = partial_script.string();
    EXPECT_EQ(run_cli("--config " + write_config(dir, partial, "partial.json").string() + " run"), 3);
}

TEST(Cli, CalibrateWritesCsv) {
    kgtest::TempDir dir;
    auto cfg = matrix_config(dir / "runs");
    cfg["datasets"] = {cfg["datasets"][0]};
    const auto path = write_config(dir, cfg);
    EXPECT_EQ(run_cli("--config " + path.string() + " calibrate --output " + (dir / "calib.csv").string()), 0);
    const auto csv = kgtest::read_file(dir / "calib.csv");
    EXPECT_TRUE(csv.starts_with("model,dataset,strategy,metric,batch,min,q1,median,q3,max,n,outliers\n"));
    EXPECT_NE(csv.find("mock-lm,geo_facts,llm_based,sf,0,"), std::string::npos);
    EXPECT_NE(csv.find("mock-lm,geo_facts,template_based,tf,0,"), std::string::npos);
}
