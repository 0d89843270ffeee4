// SPDX-License-Identifier: Apache-2.0
#include <prunetir/harness.hpp>

#include <prunetir/answer.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace fs = std::filesystem;

namespace prunetir
{

namespace
{

    std::string read_file(fs::path const& path)
    {
        auto in = std::ifstream(path, std::ios::binary);
        if (!in)
            throw InputError("cannot open " + path.string());
        auto buffer = std::ostringstream {};
        buffer << in.rdbuf();
        return buffer.str();
    }

    void write_file_atomic(fs::path const& path, std::string_view content)
    {
        auto tmp = path;
        tmp += ".tmp";
        {
            auto out = std::ofstream(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write " + tmp.string());
            out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!out)
                throw std::runtime_error("short write to " + tmp.string());
        }
        fs::rename(tmp, path);
    }

    std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t fnv1a(std::string_view text) noexcept
    {
        auto h = std::uint64_t { 0xcbf29ce484222325ULL };
        for (unsigned char c: text)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::string text_field(nlohmann::json const& j, char const* key)
    {
        auto const it = j.find(key);
        if (it == j.end() || it->is_null())
            throw InputError(std::string("missing \"") + key + "\"");
        if (it->is_string())
            return it->get<std::string>();
        if (it->is_number())
            return it->dump();
        throw InputError(std::string("\"") + key + "\" must be a string or number");
    }

    std::string default_label(RunMode mode, FeatureFlags const& f)
    {
        if (mode == RunMode::Vanilla || !f.any())
            return "vanilla";
        if (f == FeatureFlags::all())
            return "PruneTIR";
        auto label = std::string {};
        if (f.stp)
            label += "+STP";
        if (f.stpr)
            label += "+STPR";
        if (f.rtts)
            label += "+RTTS";
        if (f.stp && !f.intent_merge)
            label += " w/o merge";
        return label;
    }

    nlohmann::ordered_json config_json(ExperimentSpec const& spec, EngineConfig const& engine, std::size_t cells)
    {
        return {
            { "mode", to_string(spec.mode) },
            { "backend", to_string(spec.backend) },
            { "runs", spec.runs },
            { "cells", cells },
            { "seed_base", spec.seed_base },
            { "features", to_string(engine.features) },
            { "turn_limit", engine.turn_limit },
            { "retry_limit", engine.retry_limit },
            { "alpha", engine.similarity.alpha },
            { "theta", engine.similarity.theta },
            { "max_turns", engine.max_turns },
            { "suspension_span", engine.suspension_span },
            { "rtts_count_origin",
              engine.rtts_count_origin == RttsCountOrigin::IncludeOriginal ? "include_original" : "resamples_only" },
        };
    }

    struct Cell
    {
        Problem const* problem = nullptr;
        std::size_t run_index = 0;
        std::string key;
    };

    bool cell_complete(fs::path const& summary_path)
    {
        if (!fs::exists(summary_path))
            return false;
        try
        {
            return parse_summary(read_file(summary_path)).outcome != EpisodeOutcome::BackendFailure;
        }
        catch (std::exception const&)
        {
            return false;
        }
    }

    class CellRunner
    {
      public:
        CellRunner(ExperimentSpec const& spec, EngineConfig engine): _spec(spec), _engine(std::move(engine))
        {
            if (spec.sandbox_url.empty())
                _tool = std::make_unique<SimulatedTool>();
            else
            {
                auto config = spec.sandbox;
                config.base_url = spec.sandbox_url;
                _tool = std::make_unique<HttpToolGateway>(config);
            }
            if (spec.backend == BackendKind::Http)
                _http = std::make_unique<HttpChatBackend>(spec.http);
            if (spec.backend == BackendKind::Scripted)
                _scripts = ScriptBook::load(spec.script_path);
        }

        void run(Cell const& cell) const
        {
            auto const logs = _spec.output_dir / "logs";
            auto const summaries = _spec.output_dir / "summaries";
            auto log = std::ostringstream {};
            auto options = EpisodeOptions {};
            options.observer = log_writer(cell.key, log);
            if (_engine.persistent_sessions)
                options.session_id = cell.key;

            auto const start = std::chrono::steady_clock::now();
            auto result = EpisodeResult {};
            try
            {
                auto owned = std::unique_ptr<ModelBackend> {};
                auto* backend = static_cast<ModelBackend*>(_http.get());
                if (_spec.backend == BackendKind::Scripted)
                    backend = (owned = std::make_unique<ScriptedBackend>(_scripts.lookup(cell.problem->id, cell.run_index),
                                                                         _engine.prompt.code_tag))
                                  .get();
                else if (_spec.backend == BackendKind::Stochastic)
                {
                    auto params = _spec.stochastic;
                    params.rng_seed = cell_seed(_spec.seed_base, cell.problem->id, cell.run_index);
                    backend = (owned = std::make_unique<StochasticBackend>(params, cell.problem->answer,
                                                                           _engine.prompt.code_tag))
                                  .get();
                }
                result = run_episode(cell.problem->question, cell.problem->answer, _engine, *backend, *_tool, options);
            }
            catch (std::exception const& e)
            {
                result = EpisodeResult {};
                result.outcome = EpisodeOutcome::BackendFailure;
                result.trajectory = Trajectory(cell.problem->question);
                result.failure = e.what();
            }
            auto const seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            write_file_atomic(logs / (cell.key + ".jsonl"), log.str());
            auto const summary = make_summary(result, cell.key, cell.problem->id, cell.run_index, seconds);
            write_file_atomic(summaries / (cell.key + ".json"), to_json_line(summary) + "\n");
        }

      private:
        ExperimentSpec const& _spec;
        EngineConfig _engine;
        std::unique_ptr<ToolGateway> _tool;
        std::unique_ptr<HttpChatBackend> _http;
        ScriptBook _scripts;
    };

    void run_cells(std::vector<Cell> const& cells, std::size_t parallelism, CellRunner const& runner)
    {
        auto next = std::atomic<std::size_t> { 0 };
        auto const work = [&] {
            for (auto i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
            {
                try
                {
                    runner.run(cells[i]);
                }
                catch (std::exception const&)
                {
                    // Disk failure for this cell; it stays incomplete and is retried on resume.
                }
            }
        };
        auto const workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(1, cells.size()));
        auto pool = std::vector<std::jthread> {};
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(work);
        work();
    }

    void write_table(fs::path const& dir, std::string const& stem, std::vector<ReportRow> const& rows,
                     nlohmann::ordered_json const& index)
    {
        write_file_atomic(dir / (stem + ".json"), index.dump(2) + "\n");
        write_file_atomic(dir / (stem + ".txt"), format_table(rows));
    }

} // namespace

// ----------------------------------------------------------------------------
// Dataset and scripts

std::vector<Problem> parse_dataset(std::string_view jsonl)
{
    auto problems = std::vector<Problem> {};
    auto seen = std::set<std::string> {};
    auto stream = std::istringstream(std::string(jsonl));
    auto line_number = std::size_t { 0 };
    for (auto line = std::string {}; std::getline(stream, line);)
    {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto const where = "dataset line " + std::to_string(line_number) + ": ";
        auto const j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw InputError(where + "not a JSON object");
        auto problem = Problem {};
        try
        {
            problem.id = text_field(j, "id");
            problem.question = text_field(j, "question");
            problem.answer = text_field(j, "answer");
        }
        catch (InputError const& e)
        {
            throw InputError(where + e.what());
        }
        if (problem.answer.empty())
            throw InputError(where + "empty \"answer\"");
        if (!seen.insert(problem.id).second)
            throw InputError(where + "duplicate id \"" + problem.id + "\"");
        problems.push_back(std::move(problem));
    }
    return problems;
}

std::vector<Problem> load_dataset(fs::path const& path)
{
    return parse_dataset(read_file(path));
}

ScriptBook ScriptBook::parse(std::string_view json)
{
    auto const j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw InputError("script file: top level must be an object keyed by problem id");
    auto const responses = [](nlohmann::json const& list, std::string const& where) {
        if (!list.is_array())
            throw InputError("script file: " + where + " must be a list of strings");
        auto out = std::vector<std::string> {};
        for (auto const& item: list)
        {
            if (!item.is_string())
                throw InputError("script file: " + where + " must be a list of strings");
            out.push_back(item.get<std::string>());
        }
        return out;
    };

    auto book = ScriptBook {};
    for (auto const& [id, value]: j.items())
    {
        if (value.is_array())
        {
            book.set(id, std::nullopt, responses(value, id));
            continue;
        }
        if (!value.is_object())
            throw InputError("script file: " + id + " must be a list or an object keyed by run index");
        for (auto const& [run, list]: value.items())
        {
            auto index = std::size_t { 0 };
            auto stream = std::istringstream(run);
            if (!(stream >> index) || !stream.eof())
                throw InputError("script file: " + id + ": run index \"" + run + "\" is not a number");
            book.set(id, index, responses(list, id + "/" + run));
        }
    }
    return book;
}

ScriptBook ScriptBook::load(fs::path const& path)
{
    return parse(read_file(path));
}

void ScriptBook::set(std::string problem_id, std::optional<std::size_t> run_index, std::vector<std::string> responses)
{
    if (run_index)
        _per_run[{ std::move(problem_id), *run_index }] = std::move(responses);
    else
        _shared[std::move(problem_id)] = std::move(responses);
}

std::vector<std::string> const& ScriptBook::lookup(std::string const& problem_id, std::size_t run_index) const
{
    if (auto const it = _per_run.find({ problem_id, run_index }); it != _per_run.end())
        return it->second;
    if (auto const it = _shared.find(problem_id); it != _shared.end())
        return it->second;
    throw InputError("no script for problem \"" + problem_id + "\" run " + std::to_string(run_index));
}

// ----------------------------------------------------------------------------
// Names

std::optional<BackendKind> parse_backend_kind(std::string_view text) noexcept
{
    if (text == "http")
        return BackendKind::Http;
    if (text == "scripted")
        return BackendKind::Scripted;
    if (text == "stochastic")
        return BackendKind::Stochastic;
    return std::nullopt;
}

std::optional<RunMode> parse_run_mode(std::string_view text) noexcept
{
    if (text == "vanilla")
        return RunMode::Vanilla;
    if (text == "prunetir")
        return RunMode::PruneTir;
    if (text == "ablation")
        return RunMode::Ablation;
    return std::nullopt;
}

std::string_view to_string(BackendKind kind) noexcept
{
    switch (kind)
    {
        case BackendKind::Http: return "http";
        case BackendKind::Scripted: return "scripted";
        case BackendKind::Stochastic: return "stochastic";
    }
    return "?";
}

std::string_view to_string(RunMode mode) noexcept
{
    switch (mode)
    {
        case RunMode::Vanilla: return "vanilla";
        case RunMode::PruneTir: return "prunetir";
        case RunMode::Ablation: return "ablation";
    }
    return "?";
}

FeatureFlags parse_features(std::string_view text)
{
    auto flags = FeatureFlags::none();
    if (text.empty() || text == "none")
        return flags;
    while (!text.empty())
    {
        auto const comma = text.find(',');
        auto const item = text.substr(0, comma);
        if (item == "stp")
            flags.stp = true;
        else if (item == "stpr")
            flags.stpr = true;
        else if (item == "rtts")
            flags.rtts = true;
        else if (item == "intent-merge")
            flags.intent_merge = true;
        else
            throw InputError("unknown feature \"" + std::string(item) + "\"");
        text = comma == std::string_view::npos ? std::string_view {} : text.substr(comma + 1);
    }
    return flags;
}

std::string to_string(FeatureFlags const& f)
{
    auto parts = std::vector<std::string_view> {};
    if (f.stp)
        parts.push_back("stp");
    if (f.stpr)
        parts.push_back("stpr");
    if (f.rtts)
        parts.push_back("rtts");
    if (f.intent_merge)
        parts.push_back("intent-merge");
    if (parts.empty())
        return "none";
    auto out = std::string {};
    for (auto const& p: parts)
        out += (out.empty() ? "" : ",") + std::string(p);
    return out;
}

void ExperimentSpec::validate() const
{
    if (runs < 1)
        throw InputError("runs must be at least 1");
    if (parallelism < 1)
        throw InputError("parallelism must be at least 1");
    if (output_dir.empty())
        throw InputError("output directory is required");
    if (backend == BackendKind::Scripted && script_path.empty())
        throw InputError("the scripted backend needs a script file");
    engine.validate();
    if (backend == BackendKind::Stochastic)
        stochastic.validate();
}

std::uint64_t cell_seed(std::uint64_t seed_base, std::string_view problem_id, std::size_t run_index) noexcept
{
    auto h = splitmix64(seed_base);
    h = splitmix64(h ^ fnv1a(problem_id));
    return splitmix64(h ^ static_cast<std::uint64_t>(run_index));
}

std::string cell_key(std::string_view problem_id, std::size_t run_index)
{
    auto safe = std::string {};
    for (char c: problem_id)
    {
        auto const ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-'
                        || c == '_' || c == '.';
        safe += ok ? c : '_';
    }
    if (safe != problem_id || safe.empty() || safe.find("__r") != std::string::npos)
    {
        char suffix[24];
        std::snprintf(suffix, sizeof suffix, "-%08llx",
                      static_cast<unsigned long long>(fnv1a(problem_id) & 0xffffffffULL));
        safe += suffix;
    }
    return safe + "__r" + std::to_string(run_index);
}

// ----------------------------------------------------------------------------
// Experiments

void write_report(fs::path const& dir, ReportRow const& row)
{
    write_file_atomic(dir / "report.json", to_json(row).dump(2) + "\n");
    auto const one = std::vector<ReportRow> { row };
    write_file_atomic(dir / "report.txt", format_table(one));
    write_file_atomic(dir / "resolution_histogram.csv", histogram_csv(row.summary.resolution_histogram));
}

ReportRow report_from_directory(fs::path const& dir)
{
    auto const summaries_dir = dir / "summaries";
    if (!fs::is_directory(summaries_dir))
        throw InputError(dir.string() + " has no summaries/ directory");

    auto paths = std::vector<fs::path> {};
    for (auto const& entry: fs::directory_iterator(summaries_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            paths.push_back(entry.path());

    auto records = std::vector<EpisodeRecord> {};
    auto row = ReportRow {};
    for (auto const& path: paths)
    {
        auto const summary = parse_summary(read_file(path));
        auto events = std::vector<LogEvent> {};
        auto const log_path = dir / "logs" / (path.stem().string() + ".jsonl");
        if (fs::exists(log_path))
        {
            auto in = std::ifstream(log_path, std::ios::binary);
            events = read_log(in);
        }
        records.push_back(record_from_log(summary, events));
        ++row.coverage.completed;
        if (summary.outcome == EpisodeOutcome::BackendFailure)
            ++row.coverage.failed;
    }
    std::sort(records.begin(), records.end(), [](EpisodeRecord const& a, EpisodeRecord const& b) {
        return std::tie(a.problem_id, a.run_index) < std::tie(b.problem_id, b.run_index);
    });
    row.summary = summarize(records);
    row.coverage.cells = row.coverage.completed;

    if (auto const config_path = dir / "run_config.json"; fs::exists(config_path))
    {
        auto const j = nlohmann::ordered_json::parse(read_file(config_path), nullptr, false);
        if (!j.is_discarded() && j.is_object())
        {
            row.label = j.value("label", std::string {});
            if (auto const it = j.find("config"); it != j.end())
            {
                row.config = *it;
                row.coverage.cells = it->value("cells", row.coverage.cells);
            }
        }
    }
    if (row.label.empty())
        row.label = dir.filename().string();
    return row;
}

ReportRow run_experiment(ExperimentSpec const& spec)
{
    spec.validate();
    if (spec.mode == RunMode::Ablation)
        throw InputError("ablation mode runs through run_ablation");

    auto engine = spec.engine;
    if (spec.mode == RunMode::Vanilla)
        engine.features = FeatureFlags::none();

    auto const problems = load_dataset(spec.dataset_path);
    fs::create_directories(spec.output_dir / "logs");
    fs::create_directories(spec.output_dir / "summaries");

    auto cells = std::vector<Cell> {};
    for (auto const& problem: problems)
        for (std::size_t run = 0; run < spec.runs; ++run)
            cells.push_back({ &problem, run, cell_key(problem.id, run) });

    auto const label = spec.label.empty() ? default_label(spec.mode, engine.features) : spec.label;
    auto const config = nlohmann::ordered_json { { "label", label },
                                                 { "config", config_json(spec, engine, cells.size()) } };
    write_file_atomic(spec.output_dir / "run_config.json", config.dump(2) + "\n");

    auto pending = std::vector<Cell> {};
    for (auto const& cell: cells)
        if (!cell_complete(spec.output_dir / "summaries" / (cell.key + ".json")))
            pending.push_back(cell);

    auto const runner = CellRunner(spec, engine);
    run_cells(pending, spec.parallelism, runner);

    auto episodes = std::string {};
    for (auto const& cell: cells)
    {
        auto const path = spec.output_dir / "summaries" / (cell.key + ".json");
        if (fs::exists(path))
            episodes += read_file(path);
    }
    write_file_atomic(spec.output_dir / "episodes.jsonl", episodes);

    auto row = report_from_directory(spec.output_dir);
    write_report(spec.output_dir, row);
    return row;
}

std::vector<ReportRow> run_ablation(ExperimentSpec const& spec)
{
    struct Step
    {
        char const* dir;
        char const* label;
        RunMode mode;
        FeatureFlags features;
    };
    auto const merge = spec.engine.features.intent_merge;
    auto const steps = std::vector<Step> {
        { "vanilla", "vanilla", RunMode::Vanilla, FeatureFlags::none() },
        { "stp", "+STP", RunMode::PruneTir, { true, false, false, merge } },
        { "stp_stpr", "+STP+STPR", RunMode::PruneTir, { true, true, false, merge } },
        { "stp_stpr_rtts", "+STP+STPR+RTTS", RunMode::PruneTir, { true, true, true, merge } },
    };

    auto rows = std::vector<ReportRow> {};
    auto index = nlohmann::ordered_json::array();
    for (auto const& step: steps)
    {
        auto sub = spec;
        sub.mode = step.mode;
        sub.engine.features = step.features;
        sub.label = step.label;
        sub.output_dir = spec.output_dir / step.dir;
        rows.push_back(run_experiment(sub));
        index.push_back({ { "dir", step.dir }, { "report", to_json(rows.back()) } });
    }
    write_table(spec.output_dir, "ablation", rows, index);
    return rows;
}

SweepGrid parse_sweep_grid(std::string_view json, EngineConfig const& base)
{
    auto const j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw InputError("sweep grid: top level must be an object");
    for (auto const& [key, value]: j.items())
        if (key != "turn_limit" && key != "retry_limit" && key != "alpha" && key != "theta")
            throw InputError("sweep grid: unknown axis \"" + key + "\"");

    auto grid = SweepGrid {};
    auto const axis = [&]<typename T>(char const* key, std::vector<T>& out, T fallback) {
        auto const it = j.find(key);
        if (it == j.end())
        {
            out = { fallback };
            return;
        }
        if (!it->is_array() || it->empty())
            throw InputError(std::string("sweep grid: \"") + key + "\" must be a non-empty array");
        try
        {
            for (auto const& v: *it)
            {
                if (!v.is_number())
                    throw InputError(std::string("sweep grid: \"") + key + "\" holds a non-number");
                out.push_back(v.get<T>());
            }
        }
        catch (nlohmann::json::exception const& e)
        {
            throw InputError(std::string("sweep grid: ") + key + ": " + e.what());
        }
    };
    axis(static_cast<char const*>("turn_limit"), grid.turn_limit, base.turn_limit);
    axis(static_cast<char const*>("retry_limit"), grid.retry_limit, base.retry_limit);
    axis(static_cast<char const*>("alpha"), grid.alpha, base.similarity.alpha);
    axis(static_cast<char const*>("theta"), grid.theta, base.similarity.theta);
    return grid;
}

std::vector<ReportRow> run_sweep(ExperimentSpec const& spec, SweepGrid const& grid)
{
    if (spec.mode == RunMode::Ablation)
        throw InputError("sweep runs a single mode; choose vanilla or prunetir");
    if (grid.turn_limit.empty() || grid.retry_limit.empty() || grid.alpha.empty() || grid.theta.empty())
        throw InputError("sweep grid axes must be non-empty");

    auto rows = std::vector<ReportRow> {};
    auto index = nlohmann::ordered_json::array();
    for (auto const tl: grid.turn_limit)
        for (auto const rl: grid.retry_limit)
            for (auto const alpha: grid.alpha)
                for (auto const theta: grid.theta)
                {
                    auto const name = "tl" + std::to_string(tl) + "_rl" + std::to_string(rl) + "_a"
                                      + format_number(alpha) + "_th" + format_number(theta);
                    auto point = spec;
                    point.engine.turn_limit = tl;
                    point.engine.retry_limit = rl;
                    point.engine.similarity.alpha = alpha;
                    point.engine.similarity.theta = theta;
                    point.output_dir = spec.output_dir / name;
                    point.label = name;
                    rows.push_back(run_experiment(point));
                    index.push_back({ { "dir", name },
                                      { "turn_limit", tl },
                                      { "retry_limit", rl },
                                      { "alpha", alpha },
                                      { "theta", theta },
                                      { "report", to_json(rows.back()) } });
                }
    write_table(spec.output_dir, "sweep", rows, index);
    return rows;
}

} // namespace prunetir
