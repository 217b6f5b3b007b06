// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgrobust/cli_report.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kEndpointFailure = 2, kPartialMatrix = 3 };

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string mock_script;
    std::vector<std::string> datasets;
    std::vector<std::string> strategies;
    std::vector<std::string> few_shot;
    std::optional<std::size_t> n;
    std::optional<double> j;
    std::string template_dir;
};

kgrobust::RunConfig load_config(const GlobalFlags& g, bool required) {
    kgrobust::RunConfig cfg;
    if (!g.config.empty()) {
        cfg = kgrobust::RunConfig::load(g.config);
    } else if (required) {
        throw kgrobust::ConfigError("--config is required for this command");
    }
    if (g.seed) cfg.seed = *g.seed;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (!g.mock_script.empty()) cfg.mock_script = g.mock_script;
    if (!g.datasets.empty()) {
        cfg.datasets.clear();
        for (const auto& d : g.datasets) cfg.datasets.push_back({d, std::nullopt});
    }
    if (!g.strategies.empty()) {
        cfg.strategies.clear();
        for (const auto& s : g.strategies) {
            try {
                cfg.strategies.push_back(kgrobust::parse_strategy(s));
            } catch (const std::invalid_argument& e) {
                throw kgrobust::ConfigError(e.what());
            }
        }
    }
    if (!g.few_shot.empty()) {
        cfg.few_shot.clear();
        for (const auto& f : g.few_shot) {
            if (f != "yes" && f != "no") throw kgrobust::ConfigError("--few-shot takes yes or no, got '" + f + "'");
            cfg.few_shot.push_back(f == "yes");
        }
    }
    if (g.n) cfg.n = *g.n;
    if (g.j) cfg.j = *g.j;
    if (!g.template_dir.empty()) cfg.template_dir = g.template_dir;
    return cfg;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw kgrobust::ConfigError("cannot write " + path);
    out << text;
}

int matrix_exit(const kgrobust::MatrixResult& result) {
    for (const auto& c : result.cells) {
        if (c.report) {
            std::cerr << (c.skipped ? "kept   " : "ok     ") << c.run_id << "  R=" << c.report->r
                      << "  M=" << c.report->m << "/" << c.report->n << '\n';
        } else {
            std::cerr << "FAILED " << c.run_id << ": " << c.error << '\n';
        }
    }
    const auto failed = result.failures();
    if (failed == 0) return kOk;
    std::cerr << failed << " of " << result.cells.size() << " cells failed\n";
    if (failed == result.cells.size()) {
        for (const auto& c : result.cells) {
            if (c.endpoint_failure) return kEndpointFailure;
        }
    }
    return kPartialMatrix;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial robustness evaluation over knowledge-graph triplets"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "Run configuration (JSON)");
    app.add_option("--seed", g.seed, "Override the run seed");
    app.add_option("--out-dir", g.out_dir, "Directory holding one subdirectory per run");
    app.add_option("--mock-script", g.mock_script, "Scripted replies for mock: endpoints");
    app.add_option("--dataset", g.datasets, "Dataset file (repeatable; replaces the config list)");
    app.add_option("--strategy", g.strategies, "template or llm (repeatable)");
    app.add_option("--few-shot", g.few_shot, "yes or no (repeatable)");
    app.add_option("--n", g.n, "Triplets per cell (multiple of 3)");
    app.add_option("--j", g.j, "Robustness exponent");
    app.add_option("--template-dir", g.template_dir, "Directory overriding the built-in prompt templates");

    auto* run = app.add_subcommand("run", "Execute the condition matrix");
    auto* resume = app.add_subcommand("resume", "Finish incomplete cells, replaying journaled exchanges");
    std::vector<std::string> resume_ids;
    resume->add_option("run_id", resume_ids, "Run ids to resume (default: every incomplete cell)");
    resume->add_option("--resume", resume_ids, "Run id to resume");
    bool replay_only = false;
    resume->add_flag("--replay-only", replay_only, "Fail instead of calling an endpoint on a journal miss");

    auto* report = app.add_subcommand("report", "Emit tables from persisted runs");
    std::string kind = "r";
    std::string format = "markdown";
    std::string output;
    bool verify = false;
    report->add_option("--kind", kind, "r, acc_o, acc_a or all")->capture_default_str();
    report->add_option("--format", format, "markdown or csv")->capture_default_str();
    report->add_option("--output", output, "Write to a file instead of stdout");
    report->add_flag("--verify", verify, "Recompute every report from stored raw replies first");

    auto* calibrate = app.add_subcommand("calibrate", "Score unfiltered candidates and emit box-plot statistics");
    std::string calib_output;
    calibrate->add_option("--output", calib_output, "Write the CSV to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*run) {
            auto cfg = load_config(g, true);
            return matrix_exit(kgrobust::run_matrix(cfg));
        }
        if (*resume) {
            auto cfg = load_config(g, true);
            kgrobust::MatrixOptions opts;
            opts.resume = true;
            opts.replay_only = replay_only;
            opts.only_run_ids.insert(resume_ids.begin(), resume_ids.end());
            return matrix_exit(kgrobust::run_matrix(cfg, opts));
        }
        if (*calibrate) {
            auto cfg = load_config(g, true);
            write_output(calib_output, kgrobust::emit_calibration(kgrobust::run_calibration(cfg)));
            return kOk;
        }
        if (*report) {
            auto cfg = load_config(g, false);
            auto reports = kgrobust::load_reports(cfg.out_dir);
            if (reports.empty()) throw kgrobust::ConfigError("no reports under " + cfg.out_dir.string());
            if (verify) {
                for (const auto& r : reports) {
                    if (kgrobust::recompute_report(cfg.out_dir / r.run_id) != r) {
                        std::cerr << "report " << r.run_id << " does not match its raw replies\n";
                        return kConfigError;
                    }
                }
            }
            const auto fmt = kgrobust::parse_table_format(format);
            std::string doc;
            if (kind == "all") {
                for (auto k : {kgrobust::TableKind::r, kgrobust::TableKind::acc_o, kgrobust::TableKind::acc_a}) {
                    if (!doc.empty()) doc += '\n';
                    doc += kgrobust::emit_tables(reports, k, fmt, cfg.bold_groups);
                }
            } else {
                doc = kgrobust::emit_tables(reports, kgrobust::parse_table_kind(kind), fmt, cfg.bold_groups);
            }
            write_output(output, doc);
            return kOk;
        }
    } catch (const kgrobust::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const kgrobust::GatewayError& e) {
        std::cerr << "endpoint failure: " << e.what() << '\n';
        return kEndpointFailure;
    } catch (const kgrobust::FilterError& e) {
        std::cerr << "endpoint failure: " << e.what() << '\n';
        return kEndpointFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}
