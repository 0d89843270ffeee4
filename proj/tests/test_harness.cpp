// SPDX-License-Identifier: Apache-2.0
#include <prunetir/answer.hpp>
#include <prunetir/harness.hpp>

#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "python_sandbox.hpp"

using namespace prunetir;
using namespace fixtures;
namespace fs = std::filesystem;

namespace
{

void write(fs::path const& path, std::string const& text)
{
    auto out = std::ofstream(path, std::ios::binary);
    out << text;
}

std::size_t count_files(fs::path const& dir, std::string const& ext)
{
    auto n = std::size_t { 0 };
    for (auto const& e: fs::directory_iterator(dir))
        n += e.path().extension() == ext ? 1 : 0;
    return n;
}

ExperimentSpec scripted_spec(fs::path const& dir)
{
    write(dir / "data.jsonl", "{\"id\":\"a\",\"question\":\"1+1?\",\"answer\":\"2\"}\n"
                              "{\"id\":\"b\",\"question\":\"2+2?\",\"answer\":4}\n");
    auto script = nlohmann::json::object();
    script["a"] = { err(), ok(), answer("2") };
    script["b"] = { { "0", { answer("4") } }, { "1", { err(), err(), err() } } };
    write(dir / "script.json", script.dump());

    auto spec = ExperimentSpec {};
    spec.dataset_path = dir / "data.jsonl";
    spec.runs = 2;
    spec.backend = BackendKind::Scripted;
    spec.script_path = dir / "script.json";
    spec.output_dir = dir / "out";
    return spec;
}

} // namespace

TEST_CASE("dataset loading")
{
    auto lines = std::string {};
    for (int i = 0; i < 30; ++i)
        lines += "{\"id\":\"aime-" + std::to_string(i) + "\",\"question\":\"q\",\"answer\":\"" + std::to_string(i) + "\"}\n";
    CHECK(parse_dataset(lines).size() == 30);

    try
    {
        (void)parse_dataset("{\"id\":\"a\",\"question\":\"q\",\"answer\":\"1\"}\n{\"id\":\"b\",\"question\":\"q\"}\n");
        FAIL("expected error");
    }
    catch (InputError const& e)
    {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        CHECK(std::string(e.what()).find("answer") != std::string::npos);
    }
    try
    {
        (void)parse_dataset("{\"id\":\"a\",\"question\":\"q\",\"answer\":\"1\"}\n{\"id\":\"a\",\"question\":\"q\",\"answer\":\"2\"}\n");
        FAIL("expected error");
    }
    catch (InputError const& e)
    {
        CHECK(std::string(e.what()).find("\"a\"") != std::string::npos);
    }
    CHECK_THROWS_AS((void)parse_dataset("not json\n"), InputError);
    CHECK_THROWS_AS((void)parse_dataset("{\"id\":\"a\",\"question\":\"q\",\"answer\":\"\"}\n"), InputError);
    CHECK_THROWS_AS((void)load_dataset("/nonexistent/file.jsonl"), InputError);
}

TEST_CASE("check_answer")
{
    CHECK(check_answer("385", "385"));
    CHECK(check_answer("  385 ", "385"));
    CHECK_FALSE(check_answer("16", "385"));
    CHECK(check_answer("\\boxed{385}", "385"));
    CHECK(check_answer("$385$", "385"));
    CHECK(check_answer("0385", "385"));
    CHECK(check_answer("38.5", "38.5"));
    CHECK(check_answer("12.0", "12"));
    CHECK(check_answer("x  +  1", "x + 1"));
}

TEST_CASE("features, modes and names")
{
    CHECK(parse_features("stp,stpr,rtts,intent-merge") == FeatureFlags::all());
    CHECK(parse_features("none") == FeatureFlags::none());
    CHECK(parse_features("stp") == FeatureFlags { true, false, false, false });
    CHECK_THROWS_AS((void)parse_features("stp,magic"), InputError);
    CHECK(to_string(FeatureFlags::all()) == "stp,stpr,rtts,intent-merge");
    CHECK(parse_run_mode("vanilla") == RunMode::Vanilla);
    CHECK(parse_backend_kind("http") == BackendKind::Http);
    CHECK_FALSE(parse_backend_kind("grpc"));
}

TEST_CASE("cell keys and seeds")
{
    CHECK(cell_key("aime-1", 3) == "aime-1__r3");
    CHECK(cell_key("a/b", 0) != cell_key("a_b", 0));
    CHECK(cell_key("a b", 0).find(' ') == std::string::npos);
    CHECK(cell_seed(1, "p", 0) == cell_seed(1, "p", 0));
    CHECK(cell_seed(1, "p", 0) != cell_seed(1, "p", 1));
    CHECK(cell_seed(1, "p", 0) != cell_seed(2, "p", 0));
    CHECK(cell_seed(1, "p", 0) != cell_seed(1, "q", 0));
}

TEST_CASE("script book")
{
    auto const book = ScriptBook::parse(R"({"a":["x"],"b":{"1":["y","z"]}})");
    CHECK(book.lookup("a", 7) == std::vector<std::string> { "x" });
    CHECK(book.lookup("b", 1).size() == 2);
    CHECK_THROWS_AS((void)book.lookup("b", 0), InputError);
    CHECK_THROWS_AS((void)ScriptBook::parse(R"({"a":{"one":["x"]}})"), InputError);
    CHECK_THROWS_AS((void)ScriptBook::parse(R"({"a":[1]})"), InputError);
}

TEST_CASE("scripted 2 problems x 2 runs")
{
    auto const dir = scratch_dir("run");
    auto const spec = scripted_spec(dir);
    auto const row = run_experiment(spec);

    CHECK(count_files(spec.output_dir / "summaries", ".json") == 4);
    CHECK(count_files(spec.output_dir / "logs", ".jsonl") == 4);
    for (auto const* f: { "report.json", "report.txt", "resolution_histogram.csv", "episodes.jsonl", "run_config.json" })
        CHECK(fs::exists(spec.output_dir / f));

    CHECK(row.coverage == Coverage { 4, 4, 1 }); // b run 1 runs out of script
    CHECK(row.summary.episodes == 4);
    CHECK(row.summary.infra_failed == 1);
    REQUIRE(row.summary.pass_at_1);
    CHECK(*row.summary.pass_at_1 == 100.0);
    CHECK(row.label == "PruneTIR");

    auto const again = report_from_directory(spec.output_dir);
    CHECK(to_json(again).dump() == to_json(row).dump());
    fs::remove_all(dir);
}

TEST_CASE("resumability skips completed cells and retries failed ones")
{
    auto const dir = scratch_dir("resume");
    auto const spec = scripted_spec(dir);
    (void)run_experiment(spec);
    auto const summary = spec.output_dir / "summaries" / (cell_key("a", 0) + ".json");
    auto const before = fs::last_write_time(summary);
    auto const report_before = fixtures::slurp(spec.output_dir / "report.json");

    // an interrupted run: one summary lost
    fs::remove(spec.output_dir / "summaries" / (cell_key("a", 1) + ".json"));
    auto const row = run_experiment(spec);
    CHECK(fs::last_write_time(summary) == before);
    CHECK(row.coverage.completed == 4);
    CHECK(fixtures::slurp(spec.output_dir / "report.json") == report_before);

    // fixing the script lets the failed cell complete on the next run
    auto script = nlohmann::json::parse(fixtures::slurp(spec.script_path));
    script["b"]["1"].push_back(answer("4"));
    write(spec.script_path, script.dump());
    auto const fixed = run_experiment(spec);
    CHECK(fixed.coverage.failed == 0);
    fs::remove_all(dir);
}

TEST_CASE("seeded stochastic runs produce identical reports")
{
    auto const dir = scratch_dir("det");
    write(dir / "data.jsonl", "{\"id\":\"x\",\"question\":\"q\",\"answer\":\"233168\"}\n"
                              "{\"id\":\"y\",\"question\":\"q\",\"answer\":\"115\"}\n");
    auto spec = ExperimentSpec {};
    spec.dataset_path = dir / "data.jsonl";
    spec.runs = 8;
    spec.seed_base = 11;
    spec.parallelism = 4;
    spec.output_dir = dir / "one";
    (void)run_experiment(spec);
    spec.parallelism = 1;
    spec.output_dir = dir / "two";
    (void)run_experiment(spec);
    for (auto const* f: { "report.json", "report.txt", "resolution_histogram.csv" })
        CHECK(fixtures::slurp(dir / "one" / f) == fixtures::slurp(dir / "two" / f));
    fs::remove_all(dir);
}

TEST_CASE("sweep over turn and retry limits gives 9 reports")
{
    auto const dir = scratch_dir("sweep");
    write(dir / "data.jsonl", "{\"id\":\"x\",\"question\":\"q\",\"answer\":\"7\"}\n");
    auto spec = ExperimentSpec {};
    spec.dataset_path = dir / "data.jsonl";
    spec.runs = 3;
    spec.output_dir = dir / "out";
    auto const grid = parse_sweep_grid(R"({"turn_limit":[1,2,3],"retry_limit":[1,2,3]})", spec.engine);
    CHECK(grid.alpha == std::vector<double> { 0.5 });
    auto const rows = run_sweep(spec, grid);
    CHECK(rows.size() == 9);
    auto reports = 0;
    for (auto const& e: fs::directory_iterator(spec.output_dir))
        reports += fs::exists(e.path() / "report.json") ? 1 : 0;
    CHECK(reports == 9);
    CHECK(fs::exists(spec.output_dir / "tl2_rl3_a0.5_th0.5" / "report.json"));
    CHECK(fs::exists(spec.output_dir / "sweep.txt"));

    CHECK_THROWS_AS((void)parse_sweep_grid(R"({"turn_limit":[]})", spec.engine), InputError);
    CHECK_THROWS_AS((void)parse_sweep_grid(R"({"gamma":[1]})", spec.engine), InputError);
    fs::remove_all(dir);
}

TEST_CASE("ablation ladder writes four rows in table layout")
{
    auto const dir = scratch_dir("ablation");
    write(dir / "data.jsonl", "{\"id\":\"x\",\"question\":\"q\",\"answer\":\"7\"}\n");
    auto spec = ExperimentSpec {};
    spec.dataset_path = dir / "data.jsonl";
    spec.runs = 4;
    spec.output_dir = dir / "out";
    auto const rows = run_ablation(spec);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].label == "vanilla");
    CHECK(rows[3].label == "+STP+STPR+RTTS");
    auto const table = fixtures::slurp(spec.output_dir / "ablation.txt");
    CHECK(table.starts_with("Method"));
    CHECK(table.find("Pass@1") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("scripted episodes against the python sandbox")
{
    auto const dir = scratch_dir("live");
    fixtures::PythonSandbox sandbox(dir / "sandbox");
    write(dir / "data.jsonl", "{\"id\":\"x\",\"question\":\"q\",\"answer\":\"6\"}\n");
    auto script = nlohmann::json::object();
    script["x"] = { call("print(undefined)"), call("print(2 * 3)"), answer("6") };
    write(dir / "script.json", script.dump());

    auto spec = ExperimentSpec {};
    spec.dataset_path = dir / "data.jsonl";
    spec.runs = 1;
    spec.backend = BackendKind::Scripted;
    spec.script_path = dir / "script.json";
    spec.sandbox_url = sandbox.url();
    spec.output_dir = dir / "out";
    auto const row = run_experiment(spec);
    CHECK(row.summary.pass_at_1 == 100.0);
    CHECK(row.summary.tcn_mean == 2.0);
    CHECK(row.summary.recurrence_by_type.count("NameError") == 1);
    fs::remove_all(dir);
}

TEST_CASE("unreachable sandbox is recorded per cell")
{
    auto const dir = scratch_dir("dead");
    auto spec = scripted_spec(dir);
    spec.sandbox_url = "http://127.0.0.1:1";
    auto const row = run_experiment(spec);
    CHECK(row.coverage.completed == 4);
    CHECK(row.coverage.failed == 3); // only b run 0 answers without a tool call
    fs::remove_all(dir);
}
