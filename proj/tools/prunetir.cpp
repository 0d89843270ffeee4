// SPDX-License-Identifier: Apache-2.0
// prunetir: run, sweep and report experiments; score code pairs.

#include <prunetir/harness.hpp>
#include <prunetir/similarity.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace prunetir;

namespace
{

struct RunOptions
{
    std::string dataset;
    std::size_t runs = 32;
    std::string mode = "prunetir";
    std::string features = "stp,stpr,rtts,intent-merge";
    std::size_t turn_limit = 2;
    std::size_t retry_limit = 2;
    double alpha = 0.5;
    double theta = 0.5;
    std::size_t max_turns = 50;
    std::string backend = "stochastic";
    std::string backend_url;
    std::string model;
    bool no_top_k = false;
    std::string sandbox_url;
    std::string script;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    std::string out;
    std::string label;
    std::string rtts_count = "include_original";
    std::size_t suspension_span = 1;
    bool persistent_sessions = false;
    double tool_timeout_s = 30.0;
};

void add_run_options(CLI::App& app, RunOptions& o)
{
    app.add_option("--dataset", o.dataset, "JSONL file of {id, question, answer}")->required();
    app.add_option("--runs", o.runs, "repeats per problem")->check(CLI::PositiveNumber);
    app.add_option("--mode", o.mode, "vanilla | prunetir | ablation")
        ->check(CLI::IsMember({ "vanilla", "prunetir", "ablation" }));
    app.add_option("--features", o.features, "comma list of stp,stpr,rtts,intent-merge");
    app.add_option("--turn-limit", o.turn_limit)->check(CLI::PositiveNumber);
    app.add_option("--retry-limit", o.retry_limit)->check(CLI::PositiveNumber);
    app.add_option("--alpha", o.alpha)->check(CLI::Range(0.0, 1.0));
    app.add_option("--theta", o.theta)->check(CLI::Range(0.0, 1.0));
    app.add_option("--max-turns", o.max_turns)->check(CLI::PositiveNumber);
    app.add_option("--backend", o.backend, "http | scripted | stochastic")
        ->check(CLI::IsMember({ "http", "scripted", "stochastic" }));
    app.add_option("--backend-url", o.backend_url, "chat-completion endpoint");
    app.add_option("--model", o.model, "model name sent to the endpoint");
    app.add_flag("--no-top-k", o.no_top_k, "omit top_k from chat requests");
    app.add_option("--sandbox-url", o.sandbox_url, "code sandbox base URL; offline simulator when empty");
    app.add_option("--script", o.script, "script file for the scripted backend");
    app.add_option("--seed", o.seed, "seed base for the stochastic backend");
    app.add_option("--parallelism", o.parallelism)->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "output directory")->required();
    app.add_option("--label", o.label, "report row name");
    app.add_option("--rtts-count", o.rtts_count, "include_original | resamples_only")
        ->check(CLI::IsMember({ "include_original", "resamples_only" }));
    app.add_option("--suspension-span", o.suspension_span)->check(CLI::PositiveNumber);
    app.add_flag("--persistent-sessions", o.persistent_sessions, "keep interpreter state per episode");
    app.add_option("--tool-timeout", o.tool_timeout_s, "seconds per tool call")->check(CLI::PositiveNumber);
}

ExperimentSpec to_spec(RunOptions const& o)
{
    auto spec = ExperimentSpec {};
    spec.dataset_path = o.dataset;
    spec.runs = o.runs;
    spec.mode = *parse_run_mode(o.mode);
    spec.engine.features = parse_features(o.features);
    spec.engine.turn_limit = o.turn_limit;
    spec.engine.retry_limit = o.retry_limit;
    spec.engine.similarity.alpha = o.alpha;
    spec.engine.similarity.theta = o.theta;
    spec.engine.max_turns = o.max_turns;
    spec.engine.suspension_span = o.suspension_span;
    spec.engine.persistent_sessions = o.persistent_sessions;
    spec.engine.tool_timeout = std::chrono::milliseconds(static_cast<long long>(o.tool_timeout_s * 1000.0));
    spec.engine.rtts_count_origin =
        o.rtts_count == "resamples_only" ? RttsCountOrigin::ResamplesOnly : RttsCountOrigin::IncludeOriginal;
    spec.backend = *parse_backend_kind(o.backend);
    if (!o.backend_url.empty())
        spec.http.url = o.backend_url;
    spec.http.model = o.model;
    spec.http.send_top_k = !o.no_top_k;
    spec.sandbox_url = o.sandbox_url;
    spec.script_path = o.script;
    spec.seed_base = o.seed;
    spec.parallelism = o.parallelism;
    spec.output_dir = o.out;
    spec.label = o.label;
    return spec;
}

void print_rows(std::vector<ReportRow> const& rows)
{
    std::cout << format_table(rows);
    for (auto const& row: rows)
        if (row.coverage.failed > 0 || row.coverage.completed < row.coverage.cells)
            std::cerr << row.label << ": " << row.coverage.completed << "/" << row.coverage.cells
                      << " cells complete, " << row.coverage.failed << " failed\n";
}

std::string read_text(std::string const& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path);
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App { "Tool-integrated reasoning runner with context pruning" };
    app.require_subcommand(1);

    auto run_options = RunOptions {};
    auto* run = app.add_subcommand("run", "run problems x runs episodes and write logs and a report");
    add_run_options(*run, run_options);

    auto sweep_options = RunOptions {};
    auto grid_path = std::string {};
    auto* sweep = app.add_subcommand("sweep", "one experiment per grid point");
    add_run_options(*sweep, sweep_options);
    sweep->add_option("--grid", grid_path, "JSON grid over turn_limit, retry_limit, alpha, theta")->required();

    auto report_dir = std::string {};
    auto* report = app.add_subcommand("report", "recompute metrics from an experiment directory");
    report->add_option("--in", report_dir)->required();

    auto a_path = std::string {};
    auto b_path = std::string {};
    auto sim = SimilarityParams {};
    auto* similarity = app.add_subcommand("similarity", "score two code files");
    similarity->add_option("--a", a_path)->required();
    similarity->add_option("--b", b_path)->required();
    similarity->add_option("--alpha", sim.alpha)->check(CLI::Range(0.0, 1.0));
    similarity->add_option("--theta", sim.theta)->check(CLI::Range(0.0, 1.0));

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
        {
            auto const spec = to_spec(run_options);
            if (spec.mode == RunMode::Ablation)
                print_rows(run_ablation(spec));
            else
                print_rows({ run_experiment(spec) });
        }
        else if (*sweep)
        {
            auto const spec = to_spec(sweep_options);
            print_rows(run_sweep(spec, parse_sweep_grid(read_text(grid_path), spec.engine)));
        }
        else if (*report)
        {
            auto const row = report_from_directory(report_dir);
            write_report(report_dir, row);
            print_rows({ row });
        }
        else if (*similarity)
        {
            sim.validate();
            auto const score = code_similarity(read_text(a_path), read_text(b_path), sim);
            auto const out = nlohmann::ordered_json {
                { "edit", score.edit },
                { "keyword", score.keyword },
                { "total", score.total },
                { "intent_shift", score.total <= sim.theta },
            };
            std::cout << out.dump() << '\n';
        }
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
